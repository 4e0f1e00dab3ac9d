from __future__ import annotations

import json
import math

from tweetengage import reportfmt
from tweetengage.evaluation import EngagementMetrics, MetricReport
from tweetengage.records import EngagementType as E


def _rep(like_prauc, like_rce, reply=None):
    per = {E.LIKE: EngagementMetrics(like_prauc, like_rce, 10, 0.5)}
    if reply is not None:
        per[E.REPLY] = EngagementMetrics(reply, 1.0, 10, 0.1)
    return MetricReport(per)


def test_best_marked_and_ties_both_marked():
    reports = {"m1": _rep(0.5, 3.0, 0.2), "m4": _rep(0.7, 3.0)}
    best = reportfmt.best_per_column(reports)
    like_prauc = reportfmt.COLUMNS.index("PRAUC Like")
    like_rce = reportfmt.COLUMNS.index("RCE Like")
    assert best[like_prauc] == {"m4"} and best[like_rce] == {"m1", "m4"}
    table = reportfmt.compare_table(reports)
    lines = table.splitlines()
    assert lines[0].split()[0] == "Model" and len(lines) == 3
    assert "0.7000*" in lines[2] and "0.5000 " in lines[1]
    assert lines[1].count("3.00*") == 1 and lines[2].count("3.00*") == 1
    assert len({len(l) for l in lines}) == 1


def test_missing_column_rendered_as_dash_and_json_null(tmp_path):
    reports = {"m1": _rep(0.5, 3.0), "m2": _rep(0.6, 2.0)}
    table, payload = reportfmt.compare(reports, tmp_path / "c.json")
    assert " -" in table
    data = json.loads((tmp_path / "c.json").read_text())
    assert data["columns"][0] == "PRAUC Retweet"
    assert data["rows"][0]["values"][0] is None
    assert data["rows"][1]["best"][reportfmt.COLUMNS.index("PRAUC Like")]
    assert payload == data


def test_training_curve(tmp_path):
    reportfmt.write_training_curve([0.5, 0.4], [0.6], tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines() == [
        "round,train_logloss,valid_logloss", "1,0.5,0.6", "2,0.4,"]
    assert not math.isnan(0.0)
