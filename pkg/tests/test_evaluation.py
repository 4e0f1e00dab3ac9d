from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tweetengage import evaluation as ev
from tweetengage.records import EngagementType


def test_prauc_hand_example():
    assert abs(ev.prauc([0.9, 0.8, 0.7], [1, 0, 1]) - (1 + 2 / 3) / 2) < 1e-12


def test_prauc_perfect_and_trapezoid():
    assert ev.prauc([0.9, 0.1], [1, 0]) == 1.0
    assert ev.prauc([0.9, 0.8, 0.7], [1, 0, 1], "trapezoid") > 0
    with pytest.raises(ValueError):
        ev.prauc([0.9, 0.1], [1, 0], "linear")


def test_prauc_ties_share_a_threshold():
    # all tied: single point at precision = base rate
    assert abs(ev.prauc([0.5] * 4, [1, 0, 0, 0]) - 0.25) < 1e-12


def test_rce_hand_example():
    expected = 100 * (1 - math.log(1 / 0.8) / math.log(2))
    assert abs(ev.rce([0.8, 0.2], [1, 0], 0.5) - expected) < 1e-9
    assert abs(expected - 67.807) < 1e-3


def test_rce_baseline_predictor_is_zero():
    assert abs(ev.rce([0.25] * 4, [1, 0, 0, 0], 0.25)) < 1e-12


def test_degenerate_inputs_raise():
    with pytest.raises(ValueError):
        ev.prauc([0.1, 0.2], [0, 0])
    with pytest.raises(ValueError):
        ev.rce([0.1, 0.2], [1, 0], 0.0)
    with pytest.raises(ValueError):
        ev.prauc([0.1], [1, 0])
    with pytest.raises(ValueError):
        ev.prauc([0.1, 0.2], [2, 0])


def test_extreme_scores_are_clipped():
    assert math.isfinite(ev.rce([0.0, 1.0], [1, 0], 0.5))


labelled = st.integers(2, 60).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0.001, 0.999), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
)).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


@settings(max_examples=80, deadline=None)
@given(labelled)
def test_prauc_invariant_to_monotone_transform(data):
    s, y = np.array(data[0]), np.array(data[1])
    assert abs(ev.prauc(s, y) - ev.prauc(s ** 3, y)) < 1e-12
    assert 0.0 <= ev.prauc(s, y) <= 1.0


@settings(max_examples=80, deadline=None)
@given(labelled, st.floats(0.01, 0.99))
def test_rce_bounded_and_row_order_free(data, base):
    s, y = np.array(data[0]), np.array(data[1])
    r = ev.rce(s, y, base)
    assert r <= 100.0
    perm = np.random.default_rng(0).permutation(len(s))
    assert abs(ev.rce(s[perm], y[perm], base) - r) < 1e-9
    assert abs(ev.prauc(s[perm], y[perm]) - ev.prauc(s, y)) < 1e-12


def test_report_round_trip(tmp_path):
    preds = {EngagementType.LIKE: [0.9, 0.2, 0.6], EngagementType.REPLY: [0.1, 0.7, 0.3]}
    labels = {EngagementType.LIKE: [1, 0, 1], EngagementType.REPLY: [0, 1, 0]}
    rep = ev.report(preds, labels, {EngagementType.LIKE: 0.5, EngagementType.REPLY: 0.3})
    rep.save(tmp_path / "r.json")
    import json
    back = ev.MetricReport.from_dict(json.loads((tmp_path / "r.json").read_text()))
    assert back.to_dict() == rep.to_dict()
    row = rep.row()
    assert math.isnan(row[0]) and row[4] == rep.per_type[EngagementType.LIKE].prauc
    with pytest.raises(ValueError):
        ev.report(preds, labels, {EngagementType.LIKE: 0.5})


def test_pr_points_file(tmp_path):
    ev.write_pr_points([0.9, 0.8, 0.7], [1, 0, 1], tmp_path / "pr.csv")
    lines = (tmp_path / "pr.csv").read_text().splitlines()
    assert lines[0] == "threshold,precision,recall" and len(lines) == 4
    assert lines[-1].endswith(",1.0")
