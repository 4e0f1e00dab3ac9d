"""Content feature group: TF-IDF over token-id n-grams and per-engagement linear scorers.

Terms are n-grams (n = 1, 2, 3) of raw token ids, never decoded text. Each of
the four engagement types gets its own linear classifier trained by
stochastic subgradient descent; a Platt-style sigmoid fitted on a held-out
slice maps its margin to a probability, and those four probabilities form the
feature block.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numba
import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize

from .blocks import FeatureBlock
from .records import ENGAGEMENTS, EngagementRecord, EngagementType

log = logging.getLogger(__name__)

MAX_N = 3
D4_COLUMNS = [f"p_{e.label}" for e in ENGAGEMENTS]


def ngrams(tokens: Sequence[int], max_n: int = MAX_N) -> Iterable[tuple[int, ...]]:
    tokens = tuple(tokens)
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            yield tokens[i:i + n]


@dataclass
class TfidfVocabulary:
    ngrams: list[tuple[int, ...]]
    idf: np.ndarray
    max_features: int
    min_df: int
    n_docs: int
    index: dict[tuple[int, ...], int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.idf = np.asarray(self.idf, dtype=np.float64)
        self.index = {g: i for i, g in enumerate(self.ngrams)}

    def __len__(self) -> int:
        return len(self.ngrams)

    def to_dict(self) -> dict:
        return {
            "max_features": self.max_features,
            "min_df": self.min_df,
            "n_docs": self.n_docs,
            "ngrams": [" ".join(map(str, g)) for g in self.ngrams],
            "idf": self.idf.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> TfidfVocabulary:
        grams = [tuple(int(t) for t in g.split()) for g in data["ngrams"]]
        return cls(grams, np.array(data["idf"], dtype=np.float64),
                   int(data["max_features"]), int(data["min_df"]), int(data["n_docs"]))


def fit_vocabulary(corpus: Sequence[Sequence[int]], max_features: int = 2 ** 18,
                   min_df: int = 2) -> TfidfVocabulary:
    """Keep the ``max_features`` n-grams with the highest document frequency.

    Ties in document frequency go to the lexicographically smaller n-gram.
    ``idf = ln((1 + N) / (1 + df)) + 1``.
    """
    if len(corpus) == 0:
        raise ValueError("cannot fit a vocabulary on an empty corpus")
    if max_features < 1 or min_df < 1:
        raise ValueError("max_features and min_df must be positive")
    df: Counter[tuple[int, ...]] = Counter()
    for doc in corpus:
        df.update(set(ngrams(doc)))
    kept = sorted((g for g, c in df.items() if c >= min_df), key=lambda g: (-df[g], g))[:max_features]
    n = len(corpus)
    idf = np.array([math.log((1 + n) / (1 + df[g])) + 1.0 for g in kept])
    return TfidfVocabulary(kept, idf, max_features, min_df, n)


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        if len(idx) and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.dim):
            raise ValueError("indices must be strictly increasing within [0, dim)")
        if np.any(val == 0) or not np.all(np.isfinite(val)):
            raise ValueError("values must be non-zero and finite")

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def dot(self, dense: np.ndarray) -> float:
        return float(np.dot(dense[self.indices], self.values))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


def transform(vocabulary: TfidfVocabulary, tokens: Sequence[int]) -> SparseVector:
    """Raw n-gram counts times idf, then scaled to unit L2 norm."""
    counts: Counter[int] = Counter()
    index = vocabulary.index
    for g in ngrams(tokens):
        j = index.get(g)
        if j is not None:
            counts[j] += 1
    if not counts:
        return SparseVector(np.zeros(0, np.int64), np.zeros(0), len(vocabulary))
    idx = np.array(sorted(counts), dtype=np.int64)
    val = np.array([counts[j] for j in idx], dtype=np.float64) * vocabulary.idf[idx]
    return SparseVector(idx, val / np.linalg.norm(val), len(vocabulary))


def stack(vectors: Sequence[SparseVector], dim: int | None = None) -> sp.csr_matrix:
    if dim is None:
        dim = vectors[0].dim if vectors else 0
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(v.indices) for v in vectors])
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.zeros(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def transform_records(vocabulary: TfidfVocabulary, records: Sequence[EngagementRecord]) -> sp.csr_matrix:
    """One TF-IDF row per record; tweets seen twice reuse the first vector."""
    cache: dict[str, SparseVector] = {}
    rows = []
    for r in records:
        v = cache.get(r.tweet_id)
        if v is None:
            v = cache[r.tweet_id] = transform(vocabulary, r.text_tokens)
        rows.append(v)
    return stack(rows, len(vocabulary))


@dataclass
class LinearModel:
    weight: np.ndarray
    bias: float
    calibration: tuple[float, float] = (1.0, 0.0)
    loss: str = "hinge"

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if not (np.all(np.isfinite(self.weight)) and math.isfinite(self.bias)
                and all(math.isfinite(c) for c in self.calibration)):
            raise ValueError("linear model parameters must be finite")

    def margin(self, X: sp.csr_matrix | SparseVector) -> np.ndarray | float:
        if isinstance(X, SparseVector):
            return X.dot(self.weight) + self.bias
        return X @ self.weight + self.bias

    def to_dict(self) -> dict:
        return {"loss": self.loss, "bias": self.bias, "calibration": list(self.calibration),
                "weight": self.weight.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping) -> LinearModel:
        return cls(np.array(data["weight"], dtype=np.float64), float(data["bias"]),
                   tuple(float(c) for c in data["calibration"]), data.get("loss", "hinge"))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def predict_score(model: LinearModel, x: SparseVector | sp.csr_matrix):
    """Calibrated probability ``sigmoid(a * margin + b)``."""
    a, b = model.calibration
    out = _sigmoid(a * model.margin(x) + b)
    return float(out) if np.ndim(out) == 0 else out


@numba.njit(cache=True)
def _sgd(indptr, indices, data, y, n_features, order, alpha, logistic, t0):
    # w = scale * v, so the l2 shrink is O(1) per step
    v = np.zeros(n_features)
    scale = 1.0
    bias = 0.0
    t = 1.0
    for e in range(order.shape[0]):
        for i in order[e]:
            eta = 1.0 / (alpha * (t0 + t))
            lo, hi = indptr[i], indptr[i + 1]
            m = 0.0
            for k in range(lo, hi):
                m += v[indices[k]] * data[k]
            m = m * scale + bias
            z = y[i] * m
            if logistic:
                if z > 18.0:
                    d = -y[i] * math.exp(-z)
                elif z < -18.0:
                    d = -y[i]
                else:
                    d = -y[i] / (1.0 + math.exp(z))
            else:
                d = -y[i] if z < 1.0 else 0.0
            scale *= 1.0 - eta * alpha
            if scale < 1e-9:
                for k in range(n_features):
                    v[k] *= scale
                scale = 1.0
            if d != 0.0:
                step = -eta * d / scale
                for k in range(lo, hi):
                    v[indices[k]] += step * data[k]
                bias -= eta * d
            t += 1.0
    return v * scale, bias


def _platt(margins: np.ndarray, y01: np.ndarray) -> tuple[float, float]:
    """Fit (a, b) of sigmoid(a*m + b) with Platt's smoothed targets."""
    n_pos = float(y01.sum())
    n_neg = float(len(y01) - n_pos)
    target = np.where(y01 == 1, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))

    def nll(params):
        a, b = params
        z = a * margins + b
        # log(1 + e^z) - t z, written stably
        loss = np.logaddexp(0.0, z) - target * z
        p = _sigmoid(z)
        g = p - target
        return loss.sum(), np.array([np.dot(g, margins), g.sum()])

    b0 = math.log((n_pos + 1) / (n_neg + 1))
    res = minimize(nll, x0=np.array([1.0, b0]), jac=True, method="BFGS")
    a, b = (float(v) for v in res.x)
    return a, b


def train_linear(X: Sequence[SparseVector] | sp.csr_matrix, y: Sequence[int], loss: str = "hinge",
                 l2: float = 1e-4, epochs: int = 5, seed: int = 0,
                 calibration_fraction: float = 0.1) -> LinearModel:
    """Stochastic subgradient training plus Platt calibration.

    The step size follows ``1 / (l2 * (t0 + t))``; ``calibration_fraction`` of
    the rows (chosen by ``seed``) is held out to fit the calibration sigmoid.
    """
    if loss not in ("hinge", "logistic"):
        raise ValueError(f"unknown loss {loss!r}")
    if not l2 > 0:
        raise ValueError("l2 must be positive")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    X = X if sp.issparse(X) else stack(list(X))
    X = sp.csr_matrix(X)
    y01 = np.asarray(y, dtype=np.int64)
    if X.shape[0] != len(y01) or len(y01) == 0:
        raise ValueError("X and y must be non-empty and the same length")
    if y01.min() == y01.max():
        raise ValueError("training labels contain a single class")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(y01))
    n_cal = int(round(calibration_fraction * len(y01))) if len(y01) >= 10 else 0
    cal_idx, fit_idx = np.sort(perm[:n_cal]), np.sort(perm[n_cal:])
    if y01[fit_idx].min() == y01[fit_idx].max():
        cal_idx, fit_idx = np.zeros(0, np.int64), np.arange(len(y01))

    Xf = X[fit_idx]
    ysign = np.where(y01[fit_idx] == 1, 1.0, -1.0)
    order = np.stack([rng.permutation(len(fit_idx)) for _ in range(epochs)])
    typw = math.sqrt(1.0 / math.sqrt(l2))
    t0 = 1.0 / (typw * l2)
    v, bias = _sgd(Xf.indptr.astype(np.int64), Xf.indices.astype(np.int64), Xf.data,
                   ysign, X.shape[1], order, float(l2), loss == "logistic", t0)
    model = LinearModel(v, float(bias), (1.0, 0.0), loss)
    if len(cal_idx):
        model.calibration = _platt(np.asarray(model.margin(X[cal_idx])), y01[cal_idx])
    return model


@dataclass
class ContentParams:
    max_features: int = 2 ** 18
    min_df: int = 2
    loss: str = "hinge"
    l2: float = 1e-4
    epochs: int = 5
    seed: int = 0


@dataclass
class ContentModels:
    vocabulary: TfidfVocabulary
    models: dict[EngagementType, LinearModel]

    def score(self, records: Sequence[EngagementRecord]) -> FeatureBlock:
        X = transform_records(self.vocabulary, records)
        values = np.full((len(records), 4), np.nan)
        for e, model in self.models.items():
            values[:, e] = predict_score(model, X)
        return FeatureBlock("d4", list(D4_COLUMNS), values)

    def save(self, path: str | Path) -> None:
        payload = {
            "vocabulary": self.vocabulary.to_dict(),
            "models": {e.label: m.to_dict() for e, m in sorted(self.models.items())},
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path: str | Path) -> ContentModels:
        data = json.loads(Path(path).read_text())
        return cls(TfidfVocabulary.from_dict(data["vocabulary"]),
                   {EngagementType.parse(k): LinearModel.from_dict(v) for k, v in data["models"].items()})


def unique_documents(records: Iterable[EngagementRecord]) -> list[tuple[int, ...]]:
    seen: dict[str, tuple[int, ...]] = {}
    for r in records:
        seen.setdefault(r.tweet_id, r.text_tokens)
    return list(seen.values())


def fit_content(records: Sequence[EngagementRecord], params: ContentParams | None = None) -> ContentModels:
    """Vocabulary over distinct training tweets, then one scorer per engagement.

    Engagement types whose labels hold a single class get no model; their
    score column stays missing.
    """
    params = params or ContentParams()
    vocab = fit_vocabulary(unique_documents(records), params.max_features, params.min_df)
    X = transform_records(vocab, records)
    models = {}
    for e in ENGAGEMENTS:
        y = np.array([r.label(e) for r in records])
        if y.min() == y.max():
            log.warning("no %s model: training labels hold a single class", e.label)
            continue
        models[e] = train_linear(X, y, params.loss, params.l2, params.epochs, params.seed + int(e))
    return ContentModels(vocab, models)


def out_of_fold_scores(records: Sequence[EngagementRecord], folds: int,
                       params: ContentParams | None = None) -> FeatureBlock:
    """Scores for training rows from models that never saw those rows."""
    if folds < 2:
        raise ValueError("out-of-fold scoring needs at least two folds")
    params = params or ContentParams()
    fold_of = np.random.default_rng(params.seed).integers(0, folds, size=len(records))
    values = np.full((len(records), 4), np.nan)
    for f in range(folds):
        inside = np.flatnonzero(fold_of != f)
        outside = np.flatnonzero(fold_of == f)
        if len(outside) == 0:
            continue
        fitted = fit_content([records[i] for i in inside], params)
        values[outside] = fitted.score([records[i] for i in outside]).values
    return FeatureBlock("d4", list(D4_COLUMNS), values)
