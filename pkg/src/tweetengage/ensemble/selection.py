"""Feature-group ablation, hyperparameter grid search and the model presets."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..evaluation import EngagementMetrics, evaluate_type
from ..records import EngagementType
from .gbdt import GbdtHyperparams, predict, train_gbdt
from .matrix import GROUPS, FeatureMatrix, normalize_group

PRESETS: dict[int, tuple[str, ...]] = {
    1: ("d1",),
    2: ("d1", "d2"),
    3: ("d1", "d3"),
    4: ("d1", "d4"),
}


def preset_groups(preset: int) -> tuple[str, ...]:
    try:
        return PRESETS[int(preset)]
    except (KeyError, ValueError):
        raise ValueError(f"unknown model preset {preset!r}; choose 1-4") from None


def group_subsets(groups: Sequence[str] = GROUPS) -> list[tuple[str, ...]]:
    """Non-empty subsets, smaller first, each in canonical group order."""
    canon = sorted({normalize_group(g) for g in groups}, key=GROUPS.index)
    return [c for k in range(1, len(canon) + 1) for c in itertools.combinations(canon, k)]


def _fit_and_score(train: FeatureMatrix, dev: FeatureMatrix, engagement: EngagementType,
                   hp: GbdtHyperparams) -> EngagementMetrics:
    model = train_gbdt(train, engagement, hp)
    baseline = float(train.labels[engagement].mean())
    return evaluate_type(predict(model, dev), dev.labels[engagement], baseline)


@dataclass
class AblationResult:
    engagement: EngagementType
    rows: list[tuple[tuple[str, ...], EngagementMetrics]]
    best: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "engagement": self.engagement.label,
            "best": list(self.best),
            "rows": [{"groups": list(g), "prauc": m.prauc, "rce": m.rce} for g, m in self.rows],
        }


def ablate(train: FeatureMatrix, dev: FeatureMatrix, engagement: EngagementType,
           hp: GbdtHyperparams | None = None, groups: Sequence[str] | None = None) -> AblationResult:
    """Train and evaluate every non-empty subset of the feature groups.

    The best subset maximizes dev RCE; equal RCE goes to the subset with
    fewer groups, then to the earlier subset in enumeration order.
    """
    hp = hp or GbdtHyperparams()
    engagement = EngagementType.parse(engagement)
    available = groups if groups is not None else train.groups
    subsets = group_subsets(available)
    if not subsets:
        raise ValueError("ablation needs at least one feature group")
    rows = []
    for subset in subsets:
        rows.append((subset, _fit_and_score(train.select_groups(subset), dev, engagement, hp)))
    order = sorted(range(len(rows)), key=lambda i: (-rows[i][1].rce, len(rows[i][0]), i))
    return AblationResult(engagement, rows, rows[order[0]][0])


@dataclass
class GridResult:
    engagement: EngagementType
    rows: list[tuple[dict, EngagementMetrics]]
    best_index: int
    best: GbdtHyperparams

    def to_dict(self) -> dict:
        return {
            "engagement": self.engagement.label,
            "best_index": self.best_index,
            "best": dict(self.rows[self.best_index][0]),
            "rows": [{"params": p, "prauc": m.prauc, "rce": m.rce} for p, m in self.rows],
        }


def grid_points(grid: Mapping[str, Sequence]) -> list[dict]:
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must name at least one parameter and every list must be non-empty")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search(train: FeatureMatrix, valid: FeatureMatrix, engagement: EngagementType,
                grid: Mapping[str, Sequence], base: GbdtHyperparams | None = None) -> GridResult:
    """Exhaustive search over the cartesian product of ``grid``; best valid RCE wins.

    Points are visited in ``itertools.product`` order and an equal RCE keeps
    the earlier point.
    """
    base = base or GbdtHyperparams()
    engagement = EngagementType.parse(engagement)
    points = grid_points(grid)
    rows = []
    for point in points:
        hp = base.replace(**point)
        rows.append((point, _fit_and_score(train, valid, engagement, hp)))
    rces = np.array([m.rce for _, m in rows])
    best = int(np.flatnonzero(rces == rces.max())[0])
    return GridResult(engagement, rows, best, base.replace(**points[best]))
