"""Row-aligned feature blocks and their on-disk columnar format.

A block is written as ``<stem>.npy`` (float64, C order, one row per record)
next to a ``<stem>.json`` sidecar listing the group name and column names.
``NaN`` is the missing-value sentinel throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MISSING = np.nan


@dataclass
class FeatureBlock:
    name: str
    columns: list[str]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            self.values = self.values.reshape(len(self.values), -1)
        if self.values.shape[1] != len(self.columns):
            raise ValueError(
                f"block {self.name}: {len(self.columns)} column names for "
                f"{self.values.shape[1]} columns")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"block {self.name}: duplicate column names")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def take(self, rows: Sequence[int] | np.ndarray) -> FeatureBlock:
        return FeatureBlock(self.name, list(self.columns), self.values[np.asarray(rows, dtype=np.int64)])

    def equals(self, other: FeatureBlock) -> bool:
        return (self.name == other.name and self.columns == other.columns
                and self.values.shape == other.values.shape
                and np.array_equal(self.values, other.values, equal_nan=True))


def _stem(path: str | Path) -> Path:
    path = Path(path)
    return path.with_suffix("") if path.suffix in (".npy", ".json") else path


def save_block(block: FeatureBlock, path: str | Path) -> Path:
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    np.save(stem.with_suffix(".npy"), block.values, allow_pickle=False)
    meta = {"name": block.name, "columns": block.columns, "n_rows": block.n_rows}
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")
    return stem


def load_block(path: str | Path) -> FeatureBlock:
    stem = _stem(path)
    meta = json.loads(stem.with_suffix(".json").read_text())
    values = np.load(stem.with_suffix(".npy"), allow_pickle=False)
    if values.shape[0] != meta["n_rows"]:
        raise ValueError(f"{stem}: sidecar says {meta['n_rows']} rows, array has {values.shape[0]}")
    return FeatureBlock(meta["name"], list(meta["columns"]), values)


def write_block_tsv(block: FeatureBlock, path: str | Path) -> None:
    """Debug dump: header line of column names, ``NA`` for missing cells."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(block.columns) + "\n")
        for row in block.values:
            fh.write("\t".join("NA" if np.isnan(v) else repr(float(v)) for v in row) + "\n")


def concat_rows(blocks: Sequence[FeatureBlock]) -> FeatureBlock:
    first = blocks[0]
    for b in blocks[1:]:
        if b.columns != first.columns:
            raise ValueError("cannot stack blocks with different columns")
    return FeatureBlock(first.name, list(first.columns), np.vstack([b.values for b in blocks]))
