"""Fixed-width comparison tables and plot-ready data files."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping, Sequence

from .evaluation import TABLE_NAMES, TABLE_ORDER, MetricReport

COLUMNS = [f"{metric} {TABLE_NAMES[e]}" for e in TABLE_ORDER for metric in ("PRAUC", "RCE")]


def best_per_column(reports: Mapping[str, MetricReport]) -> list[set[str]]:
    """Names holding the maximum of each column (both metrics are higher-is-better)."""
    rows = {name: rep.row() for name, rep in reports.items()}
    best = []
    for c in range(len(COLUMNS)):
        values = {name: row[c] for name, row in rows.items() if not math.isnan(row[c])}
        top = max(values.values()) if values else None
        best.append({name for name, v in values.items() if v == top})
    return best


def _cell(value: float, col: int, marked: bool) -> str:
    if math.isnan(value):
        text = "-"
    else:
        text = f"{value:.4f}" if col % 2 == 0 else f"{value:.2f}"
    return text + ("*" if marked else " ")


def compare_table(reports: Mapping[str, MetricReport]) -> str:
    if not reports:
        raise ValueError("nothing to compare")
    best = best_per_column(reports)
    name_w = max(5, *(len(n) for n in reports))
    widths = [max(len(c), 10) for c in COLUMNS]
    lines = ["  ".join(["Model".ljust(name_w)] + [c.rjust(w) for c, w in zip(COLUMNS, widths)])]
    for name, rep in reports.items():
        cells = [_cell(v, c, name in best[c]).rjust(w) for c, (v, w) in enumerate(zip(rep.row(), widths))]
        lines.append("  ".join([name.ljust(name_w)] + cells))
    return "\n".join(lines) + "\n"


def compare_json(reports: Mapping[str, MetricReport]) -> dict:
    best = best_per_column(reports)
    return {
        "columns": COLUMNS,
        "rows": [{"model": name, "values": [None if math.isnan(v) else v for v in rep.row()],
                  "best": [name in best[c] for c in range(len(COLUMNS))]}
                 for name, rep in reports.items()],
    }


def compare(reports: Mapping[str, MetricReport], json_path: str | Path | None = None) -> tuple[str, dict]:
    table, payload = compare_table(reports), compare_json(reports)
    if json_path is not None:
        Path(json_path).write_text(json.dumps(payload, indent=1, allow_nan=False) + "\n")
    return table, payload


def write_training_curve(train_loss: Sequence[float], valid_loss: Sequence[float] | None,
                         path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("round,train_logloss,valid_logloss\n")
        for i, t in enumerate(train_loss):
            v = "" if not valid_loss or i >= len(valid_loss) else repr(float(valid_loss[i]))
            fh.write(f"{i + 1},{float(t)!r},{v}\n")
