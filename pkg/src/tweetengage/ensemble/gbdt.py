"""Second-order gradient-boosted trees for binary engagement labels.

Each round fits one regression tree to the gradient ``g = p - y`` and
hessian ``h = p (1 - p)`` of the logistic loss. For a node holding sums
``G``, ``H`` the leaf weight is ``-G / (H + lambda)`` (scaled by the
learning rate when stored) and a split into L/R gains::

    0.5 * (G_L^2 / (H_L + lambda) + G_R^2 / (H_R + lambda) - G^2 / (H + lambda))

Trees grow level by level. Split search is exact: every midpoint between two
consecutive distinct non-missing values of a feature inside the node is a
candidate, and rows whose value is missing (NaN) are tried on the left, then
on the right; the better side becomes the node's default direction. The
candidate order is (feature ascending, threshold ascending, missing-left
before missing-right) and a later candidate only replaces the incumbent when
it wins by more than a relative 1e-10, so ties resolve to the earliest.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from ..records import EngagementType
from .matrix import FeatureMatrix

MIN_SPLIT_GAIN = 1e-10
TIE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class GbdtHyperparams:
    n_trees: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    min_child_weight: float = 1.0
    l2_lambda: float = 1.0
    subsample_fraction: float = 0.8
    colsample_fraction: float = 0.8
    base_score: float | None = None  # probability; None = training positive rate
    seed: int = 0
    early_stopping_rounds: int = 20
    tree_method: str = "exact"  # or "hist"
    max_bins: int = 256

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1:
            raise ValueError("n_trees and max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        for name in ("subsample_fraction", "colsample_fraction"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.l2_lambda < 0 or self.min_child_weight < 0:
            raise ValueError("l2_lambda and min_child_weight must be >= 0")
        if self.base_score is not None and not 0.0 < self.base_score < 1.0:
            raise ValueError("base_score must lie in (0, 1)")
        if self.tree_method not in ("exact", "hist"):
            raise ValueError(f"unknown tree_method {self.tree_method!r}")
        if self.max_bins < 2:
            raise ValueError("max_bins must be >= 2")

    def replace(self, **changes) -> GbdtHyperparams:
        return GbdtHyperparams.from_dict({**asdict(self), **changes})

    @classmethod
    def from_dict(cls, data: dict) -> GbdtHyperparams:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown GBDT hyperparameters: {sorted(unknown)}")
        return cls(**data)


@dataclass
class Tree:
    feature: np.ndarray  # -1 on leaves
    threshold: np.ndarray  # go left when value < threshold
    default_left: np.ndarray  # direction for missing values
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf output (already scaled by the learning rate)
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "default_left": self.default_left.astype(int).tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Tree:
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=np.float64),
                   np.array(d["default_left"], dtype=np.bool_), np.array(d["left"], dtype=np.int64),
                   np.array(d["right"], dtype=np.int64), np.array(d["value"], dtype=np.float64),
                   np.array(d["gain"], dtype=np.float64))


@dataclass
class GbdtModel:
    trees: list[Tree]
    base_score: float  # margin (log-odds)
    feature_names: list[str]
    engagement: EngagementType | None = None
    hyperparams: GbdtHyperparams = field(default_factory=GbdtHyperparams)
    train_logloss: list[float] = field(default_factory=list)
    valid_logloss: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "engagement": None if self.engagement is None else self.engagement.label,
            "base_score": self.base_score,
            "feature_names": list(self.feature_names),
            "hyperparams": asdict(self.hyperparams),
            "train_logloss": list(self.train_logloss),
            "valid_logloss": list(self.valid_logloss),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> GbdtModel:
        return cls(
            trees=[Tree.from_dict(t) for t in d["trees"]],
            base_score=float(d["base_score"]),
            feature_names=list(d["feature_names"]),
            engagement=None if d.get("engagement") is None else EngagementType.parse(d["engagement"]),
            hyperparams=GbdtHyperparams.from_dict(d.get("hyperparams", {})),
            train_logloss=list(d.get("train_logloss", [])),
            valid_logloss=list(d.get("valid_logloss", [])),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> GbdtModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logloss_from_margin(y: np.ndarray, margin: np.ndarray) -> float:
    # log(1 + e^m) - y m
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


@numba.njit(cache=True, nogil=True)
def _split_threshold(lo, hi):
    thr = lo + (hi - lo) * 0.5
    if thr <= lo:
        thr = hi
    return thr


@numba.njit(cache=True, nogil=True)
def _score(g, h, lam):
    return g * g / (h + lam)


@numba.njit(cache=True, nogil=True)
def _grow(X, sorted_idx, sorted_off, miss_idx, miss_off, g, h, sampled, feats,
          max_depth, lam, mcw, eta):
    n = X.shape[0]
    max_nodes = 2 ** (max_depth + 1) - 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    low_value = np.zeros(max_nodes)
    default_left = np.ones(max_nodes, dtype=np.bool_)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)
    gain_out = np.zeros(max_nodes)
    G = np.zeros(max_nodes)
    H = np.zeros(max_nodes)

    node_of = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if sampled[i]:
            node_of[i] = 0
            G[0] += g[i]
            H[0] += h[i]
    n_nodes = 1
    level = np.zeros(1, dtype=np.int64)

    is_open = np.zeros(max_nodes, dtype=np.bool_)
    best_gain = np.zeros(max_nodes)
    best_feat = np.full(max_nodes, -1, dtype=np.int64)
    best_thr = np.zeros(max_nodes)
    best_low = np.zeros(max_nodes)
    best_dleft = np.ones(max_nodes, dtype=np.bool_)
    GL = np.zeros(max_nodes)
    HL = np.zeros(max_nodes)
    Gm = np.zeros(max_nodes)
    Hm = np.zeros(max_nodes)
    n_miss = np.zeros(max_nodes, dtype=np.int64)
    last = np.zeros(max_nodes)
    has_last = np.zeros(max_nodes, dtype=np.bool_)

    for depth in range(max_depth):
        if level.shape[0] == 0:
            break
        for nd in level:
            is_open[nd] = True
            best_gain[nd] = -np.inf
            best_feat[nd] = -1
        for f in feats:
            for nd in level:
                GL[nd] = 0.0
                HL[nd] = 0.0
                Gm[nd] = 0.0
                Hm[nd] = 0.0
                n_miss[nd] = 0
                has_last[nd] = False
            for k in range(miss_off[f], miss_off[f + 1]):
                i = miss_idx[k]
                nd = node_of[i]
                if nd >= 0 and is_open[nd]:
                    Gm[nd] += g[i]
                    Hm[nd] += h[i]
                    n_miss[nd] += 1
            for k in range(sorted_off[f], sorted_off[f + 1]):
                i = sorted_idx[k]
                nd = node_of[i]
                if nd < 0 or not is_open[nd]:
                    continue
                x = X[i, f]
                if has_last[nd] and x > last[nd]:
                    g_nm = G[nd] - Gm[nd]
                    h_nm = H[nd] - Hm[nd]
                    parent = _score(G[nd], H[nd], lam)
                    for side in range(2):
                        if side == 0:  # missing rows go left
                            gl = GL[nd] + Gm[nd]
                            hl = HL[nd] + Hm[nd]
                            gr = g_nm - GL[nd]
                            hr = h_nm - HL[nd]
                        else:
                            if n_miss[nd] == 0:
                                break
                            gl = GL[nd]
                            hl = HL[nd]
                            gr = g_nm - GL[nd] + Gm[nd]
                            hr = h_nm - HL[nd] + Hm[nd]
                        if hl < mcw or hr < mcw:
                            continue
                        gain = 0.5 * (_score(gl, hl, lam) + _score(gr, hr, lam) - parent)
                        incumbent = best_gain[nd]
                        if best_feat[nd] < 0 or gain > incumbent + TIE_TOLERANCE * max(1.0, abs(incumbent)):
                            best_gain[nd] = gain
                            best_feat[nd] = f
                            best_thr[nd] = _split_threshold(last[nd], x)
                            best_low[nd] = last[nd]
                            best_dleft[nd] = side == 0
                GL[nd] += g[i]
                HL[nd] += h[i]
                last[nd] = x
                has_last[nd] = True

        n_next = 0
        next_level = np.empty(2 * level.shape[0], dtype=np.int64)
        for nd in level:
            is_open[nd] = False
            if best_feat[nd] >= 0 and best_gain[nd] > MIN_SPLIT_GAIN:
                feature[nd] = best_feat[nd]
                threshold[nd] = best_thr[nd]
                low_value[nd] = best_low[nd]
                default_left[nd] = best_dleft[nd]
                gain_out[nd] = best_gain[nd]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                next_level[n_next] = n_nodes
                next_level[n_next + 1] = n_nodes + 1
                n_next += 2
                n_nodes += 2
        for i in range(n):
            nd = node_of[i]
            if nd < 0 or feature[nd] < 0 or left[nd] < 0:
                continue
            x = X[i, feature[nd]]
            if np.isnan(x):
                go_left = default_left[nd]
            else:
                go_left = x < threshold[nd]
            child = left[nd] if go_left else right[nd]
            node_of[i] = child
            G[child] += g[i]
            H[child] += h[i]
        level = next_level[:n_next]

    for nd in range(n_nodes):
        if left[nd] < 0:
            value[nd] = -G[nd] / (H[nd] + lam) * eta
    return (feature[:n_nodes], threshold[:n_nodes], low_value[:n_nodes], default_left[:n_nodes],
            left[:n_nodes], right[:n_nodes], value[:n_nodes], gain_out[:n_nodes])


@numba.njit(cache=True, nogil=True)
def _predict_tree(X, rows_feature, threshold, default_left, left, right, value, out):
    for i in range(X.shape[0]):
        nd = 0
        while left[nd] >= 0:
            x = X[i, rows_feature[nd]]
            if np.isnan(x):
                nd = left[nd] if default_left[nd] else right[nd]
            elif x < threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] += value[nd]


def _presort(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    sorted_parts, miss_parts = [], []
    for f in range(X.shape[1]):
        col = X[:, f]
        miss = np.isnan(col)
        present = np.flatnonzero(~miss)
        sorted_parts.append(present[np.argsort(col[present], kind="stable")])
        miss_parts.append(np.flatnonzero(miss))
    sorted_off = np.concatenate([[0], np.cumsum([len(p) for p in sorted_parts])]).astype(np.int64)
    miss_off = np.concatenate([[0], np.cumsum([len(p) for p in miss_parts])]).astype(np.int64)
    cat = lambda parts: np.concatenate(parts).astype(np.int64) if parts else np.zeros(0, np.int64)
    return cat(sorted_parts), sorted_off, cat(miss_parts), miss_off


def _bin_edges(X: np.ndarray, max_bins: int) -> list[np.ndarray]:
    edges = []
    for f in range(X.shape[1]):
        col = X[:, f]
        col = col[~np.isnan(col)]
        uniq = np.unique(col)
        if len(uniq) <= max_bins:
            edges.append(uniq)
        else:
            qs = np.quantile(col, np.linspace(0, 1, max_bins + 1)[1:], method="inverted_cdf")
            edges.append(np.unique(qs))
    return edges


def _apply_bins(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    """Replace each value by the smallest bin edge >= it (NaN stays NaN)."""
    out = X.copy()
    for f, e in enumerate(edges):
        col = X[:, f]
        ok = ~np.isnan(col)
        pos = np.minimum(np.searchsorted(e, col[ok], side="left"), len(e) - 1)
        out[ok, f] = e[pos]
    return out


def _check_features(X: np.ndarray) -> None:
    if np.isinf(X).any():
        raise ValueError("features contain non-finite values other than the missing sentinel (NaN)")


def _labels(matrix: FeatureMatrix, engagement: EngagementType) -> np.ndarray:
    return matrix.labels[EngagementType.parse(engagement)].astype(np.float64)


def train_gbdt(train: FeatureMatrix, engagement: EngagementType, hp: GbdtHyperparams | None = None,
               valid: FeatureMatrix | None = None) -> GbdtModel:
    """Fit one boosted ensemble for ``engagement``.

    With ``valid`` given, training stops once the validation logloss has not
    improved for ``hp.early_stopping_rounds`` rounds and the ensemble is cut
    back to its best round.
    """
    hp = hp or GbdtHyperparams()
    engagement = EngagementType.parse(engagement)
    X = np.ascontiguousarray(train.values, dtype=np.float64)
    y = _labels(train, engagement)
    _check_features(X)
    n, n_feat = X.shape
    if n == 0 or y.min() == y.max():
        raise ValueError(f"{engagement.label}: training labels must contain both classes")

    rate = float(y.mean())
    base = math.log(rate / (1 - rate)) if hp.base_score is None else math.log(hp.base_score / (1 - hp.base_score))

    if hp.tree_method == "hist":
        edges = _bin_edges(X, hp.max_bins)
        Xs = _apply_bins(X, edges)
    else:
        Xs = X
    sorted_idx, sorted_off, miss_idx, miss_off = _presort(Xs)

    Xv = yv = None
    if valid is not None:
        Xv = np.ascontiguousarray(valid.select(train.columns).values, dtype=np.float64)
        _check_features(Xv)
        yv = _labels(valid, engagement)
        margin_v = np.full(len(yv), base)

    rng = np.random.default_rng(hp.seed)
    margin = np.full(n, base)
    n_cols = max(1, int(round(hp.colsample_fraction * n_feat)))
    trees: list[Tree] = []
    train_loss: list[float] = []
    valid_loss: list[float] = []
    best_round, best_valid = -1, math.inf
    for _ in range(hp.n_trees):
        p = _sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        if hp.subsample_fraction < 1.0:
            sampled = rng.random(n) < hp.subsample_fraction
        else:
            sampled = np.ones(n, dtype=np.bool_)
        if n_cols < n_feat:
            feats = np.sort(rng.choice(n_feat, size=n_cols, replace=False)).astype(np.int64)
        else:
            feats = np.arange(n_feat, dtype=np.int64)
        feat, thr, low, dleft, lft, rgt, val, gain = _grow(
            Xs, sorted_idx, sorted_off, miss_idx, miss_off, g, h, sampled, feats,
            hp.max_depth, hp.l2_lambda, hp.min_child_weight, hp.learning_rate)
        if hp.tree_method == "hist":
            # left holds values whose bin edge is <= low, i.e. original value <= low
            split = feat >= 0
            thr = thr.copy()
            thr[split] = np.nextafter(low[split], np.inf)
        tree = Tree(feat, thr, dleft, lft, rgt, val, gain)
        trees.append(tree)
        _predict_tree(X, tree.feature, tree.threshold, tree.default_left, tree.left, tree.right,
                      tree.value, margin)
        train_loss.append(logloss_from_margin(y, margin))
        if Xv is not None:
            _predict_tree(Xv, tree.feature, tree.threshold, tree.default_left, tree.left, tree.right,
                          tree.value, margin_v)
            vl = logloss_from_margin(yv, margin_v)
            valid_loss.append(vl)
            if vl < best_valid:
                best_round, best_valid = len(trees) - 1, vl
            elif len(trees) - 1 - best_round >= hp.early_stopping_rounds:
                break
    if Xv is not None and best_round >= 0:
        trees = trees[: best_round + 1]
    return GbdtModel(trees, base, list(train.columns), engagement, hp, train_loss, valid_loss)


def predict_margin(model: GbdtModel, features: FeatureMatrix) -> np.ndarray:
    X = np.ascontiguousarray(features.select(model.feature_names).values, dtype=np.float64)
    _check_features(X)
    out = np.full(X.shape[0], model.base_score)
    for t in model.trees:
        _predict_tree(X, t.feature, t.threshold, t.default_left, t.left, t.right, t.value, out)
    return out


def predict(model: GbdtModel, features: FeatureMatrix) -> np.ndarray:
    """Engagement probabilities, ``sigmoid(base_score + sum of tree outputs)``."""
    p = _sigmoid(predict_margin(model, features))
    # keep strictly inside (0, 1) for downstream log losses
    return np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def feature_importance(model: GbdtModel) -> dict[str, float]:
    """Total split gain per feature name."""
    out: dict[str, float] = {}
    for t in model.trees:
        for f, gn in zip(t.feature, t.gain):
            if f >= 0:
                name = model.feature_names[f]
                out[name] = out.get(name, 0.0) + float(gn)
    return dict(sorted(out.items(), key=lambda kv: -kv[1]))


def train_all(train: FeatureMatrix, engagements: Sequence[EngagementType], hp: GbdtHyperparams,
              valid: FeatureMatrix | None = None, threads: int = 1) -> dict[EngagementType, GbdtModel]:
    """One model per engagement type; types train concurrently when ``threads > 1``."""
    if threads <= 1:
        return {e: train_gbdt(train, e, hp, valid) for e in engagements}
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {e: pool.submit(train_gbdt, train, e, hp, valid) for e in engagements}
        return {e: f.result() for e, f in futures.items()}
