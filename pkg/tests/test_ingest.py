from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import record
from tweetengage import ingest, synthgen
from tweetengage.records import ENGAGEMENTS, EngagementType, strip_labels


def test_engagement_type_ordinals_are_stable():
    assert [e.name for e in EngagementType] == ["REPLY", "RETWEET", "QUOTE", "LIKE"]
    assert [int(e) for e in EngagementType] == [0, 1, 2, 3]
    assert EngagementType.parse("Like") is EngagementType.LIKE
    with pytest.raises(ValueError):
        EngagementType.parse("favourite")


def test_empty_like_column_means_absent():
    line = ingest.format_line(record(like=None, reply=1_600_000_100))
    rec = ingest.parse_line(line)
    assert rec.like_ts is None
    assert rec.reply_ts == 1_600_000_100


def test_tokens_split_on_pipe():
    fields = ingest.format_line(record()).split("\t")
    assert fields[0] == "101|2003|102"
    assert ingest.parse_line("\t".join(fields)).text_tokens == (101, 2003, 102)


def test_short_line_reports_line_and_expected(tmp_path):
    good = ingest.format_line(record())
    bad = "\t".join(good.split("\t")[:22])
    path = tmp_path / "log.tsv"
    path.write_text(good + "\n" + bad + "\n")
    with pytest.raises(ingest.IngestError) as info:
        ingest.read_tsv(path)
    assert info.value.line == 2
    assert info.value.expected == 23


def test_bad_field_reports_index(tmp_path):
    fields = ingest.format_line(record()).split("\t")
    fields[7] = "yesterday"
    with pytest.raises(ingest.IngestError) as info:
        ingest.parse_line("\t".join(fields), lineno=4)
    assert info.value.line == 4 and info.value.field == 7


def test_lenient_mode_skips_and_collects(tmp_path):
    good = ingest.format_line(record())
    path = tmp_path / "log.tsv"
    path.write_text(good + "\nnot a record\n" + good + "\n")
    errors = []
    recs = list(ingest.parse_tsv(path, strict=False, errors=errors))
    assert len(recs) == 2 and len(errors) == 1 and errors[0].line == 2


def test_invalid_record_rejected():
    fields = ingest.format_line(record(like=1_600_000_000 - 5)).split("\t")
    with pytest.raises(ingest.IngestError):
        ingest.parse_line("\t".join(fields))
    same_user = ingest.format_line(record(author="x", reader="x"))
    with pytest.raises(ingest.IngestError):
        ingest.parse_line(same_user)


def test_round_trip_synthetic(tmp_path, small_log):
    records, _, _ = small_log
    path = tmp_path / "log.tsv"
    synthgen.write_tsv(records, path)
    assert ingest.read_tsv(path) == records


def test_round_trip_empty_lists(tmp_path):
    rec = record(tokens=(), hashtags=(), media=(), domains=())
    path = tmp_path / "one.tsv"
    synthgen.write_tsv([rec], path)
    fields = path.read_text().rstrip("\n").split("\t")
    assert len(fields) == 23
    assert fields[0] == fields[1] == fields[3] == fields[4] == ""
    assert ingest.read_tsv(path) == [rec]


def test_empty_file_round_trip(tmp_path):
    path = tmp_path / "empty.tsv"
    synthgen.write_tsv([], path)
    assert path.read_text() == ""
    assert ingest.read_tsv(path) == []


def test_random_split_deterministic_partition(small_log):
    records, _, _ = small_log
    a = ingest.split(records, 0.9, "random", seed=3)
    b = ingest.split(records, 0.9, "random", seed=3)
    assert a == b
    train, dev = a
    assert len(train) + len(dev) == len(records)
    assert sorted(map(id, train + dev)) == sorted(map(id, records))


def test_chronological_ceiling_rule():
    recs = [record(tweet_id=f"t{i}", ts=1_600_000_000 + (7 * i) % 10) for i in range(10)]
    train, dev = ingest.split(recs, 0.9, "chronological")
    assert len(train) == 9 and len(dev) == 1
    assert max(r.tweet_timestamp for r in train) <= min(r.tweet_timestamp for r in dev)


@pytest.mark.parametrize("ratio", [1.5, 0.0, 1.0, -0.1])
def test_bad_ratio(ratio):
    with pytest.raises(ValueError):
        ingest.split([record()], ratio)


def test_stats_empty_and_counts():
    empty = ingest.dataset_stats([])
    assert empty.n == 0 and all(v == 0 for v in empty.counts.values())
    assert all(v == 0.0 for v in empty.positive_rates.values())
    recs = [record(tweet_id=f"t{i}", like=1_600_000_010 if i == 0 else None) for i in range(4)]
    assert ingest.dataset_stats(recs).positive_rates["like"] == 0.25


def test_stats_match_generator_rate():
    cfg = synthgen.GenConfig(n_records=100_000, signal_weights={}, seed=5)
    records, _ = synthgen.generate(cfg)
    rate = ingest.dataset_stats(records).positive_rates["like"]
    assert abs(rate - 0.4) <= 0.01


def test_strip_labels():
    rec = strip_labels(record(like=1_600_000_005, quote=1_600_000_009))
    assert all(rec.label(e) == 0 for e in ENGAGEMENTS)


_ids = st.text(alphabet="abcdef0123456789", min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(tokens=st.lists(st.integers(0, 10**6), max_size=6), tags=st.lists(_ids, max_size=3),
       media=st.lists(st.sampled_from(["Photo", "Video", "GIF"]), max_size=3),
       ts=st.integers(1, 2_000_000_000), offs=st.lists(st.one_of(st.none(), st.integers(0, 10**6)),
                                                       min_size=4, max_size=4),
       follows=st.booleans())
def test_round_trip_property(tokens, tags, media, ts, offs, follows):
    r = record(tokens=tokens, hashtags=tags, media=media, ts=ts, follows=follows,
               reply=None if offs[0] is None else ts + offs[0], retweet=None if offs[1] is None else ts + offs[1],
               quote=None if offs[2] is None else ts + offs[2], like=None if offs[3] is None else ts + offs[3])
    assert ingest.parse_line(ingest.format_line(r)) == r


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 300), ratio=st.floats(0.01, 0.99), seed=st.integers(0, 10**6))
def test_split_indices_partition(n, ratio, seed):
    ts = np.random.default_rng(seed).integers(0, 50, n)
    for mode in ("random", "chronological"):
        tr, dv = ingest.split_indices(n, ratio, mode, seed, ts)
        assert np.array_equal(np.sort(np.concatenate([tr, dv])), np.arange(n))
