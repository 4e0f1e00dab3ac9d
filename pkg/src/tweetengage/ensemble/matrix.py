"""Row-aligned feature matrices assembled from feature blocks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..blocks import FeatureBlock
from ..records import ENGAGEMENTS, EngagementRecord, EngagementType

GROUPS = ("d1", "d2", "d3", "d4")


def normalize_group(name: str) -> str:
    g = name.strip().lower()
    if g not in GROUPS:
        raise ValueError(f"unknown feature group {name!r}; expected one of D1..D4")
    return g


def record_labels(records: Sequence[EngagementRecord]) -> dict[EngagementType, np.ndarray]:
    return {e: np.fromiter((r.label(e) for r in records), dtype=np.int8, count=len(records))
            for e in ENGAGEMENTS}


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (n_rows, n_cols) float64, NaN = missing
    columns: list[str]
    labels: dict[EngagementType, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise ValueError("values shape does not match column names")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")
        for e, y in self.labels.items():
            if len(y) != self.n_rows:
                raise ValueError(f"{e.label} labels have {len(y)} rows, matrix has {self.n_rows}")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def groups(self) -> list[str]:
        return sorted({c.split(".", 1)[0] for c in self.columns})

    def select(self, columns: Sequence[str]) -> FeatureMatrix:
        index = {c: i for i, c in enumerate(self.columns)}
        missing = [c for c in columns if c not in index]
        if missing:
            shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
            raise KeyError(f"feature matrix lacks {len(missing)} model column(s): {shown}")
        if list(columns) == self.columns:
            return self
        return FeatureMatrix(self.values[:, [index[c] for c in columns]], list(columns), self.labels)

    def select_groups(self, groups: Iterable[str]) -> FeatureMatrix:
        wanted = {normalize_group(g) for g in groups}
        return self.select([c for c in self.columns if c.split(".", 1)[0] in wanted])

    def take(self, rows) -> FeatureMatrix:
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureMatrix(self.values[rows], list(self.columns),
                             {e: y[rows] for e, y in self.labels.items()})

    def with_column(self, name: str, values: np.ndarray) -> FeatureMatrix:
        col = np.asarray(values, dtype=np.float64).reshape(-1, 1)
        return FeatureMatrix(np.hstack([self.values, col]), self.columns + [name], self.labels)


def assemble(records: Sequence[EngagementRecord],
             blocks: Mapping[str, FeatureBlock] | Sequence[FeatureBlock]) -> FeatureMatrix:
    """Concatenate blocks column-wise in group order d1, d2, d3, d4.

    Columns are prefixed with the group name (``d1.pair_count``). Labels come
    from the records' engagement timestamps, so unlabeled records yield zeros.
    """
    if isinstance(blocks, Mapping):
        items = [(normalize_group(k), b) for k, b in blocks.items()]
    else:
        items = [(normalize_group(b.name), b) for b in blocks]
    if not items:
        raise ValueError("at least one feature group is required")
    names = [g for g, _ in items]
    if len(set(names)) != len(names):
        raise ValueError(f"feature group given twice: {names}")
    items.sort(key=lambda kv: GROUPS.index(kv[0]))
    n = len(records)
    for g, b in items:
        if b.n_rows != n:
            raise ValueError(f"feature group {g.upper()} has {b.n_rows} rows but there are {n} records")
    values = np.hstack([b.values for _, b in items]) if n else np.zeros((0, sum(len(b.columns) for _, b in items)))
    columns = [f"{g}.{c}" for g, b in items for c in b.columns]
    return FeatureMatrix(values, columns, record_labels(records))
