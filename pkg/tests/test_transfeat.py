from __future__ import annotations

import numpy as np
from hypothesis import given, settings, strategies as st

from conftest import record
from tweetengage import synthgen, transfeat
from tweetengage.blocks import FeatureBlock, concat_rows, load_block, save_block, write_block_tsv


def _col(block, name):
    return block.column(name)


def test_first_record_has_zero_counters():
    block = transfeat.augment([record()])
    assert all(_col(block, c)[0] == 0 for c in transfeat.COUNTER_COLUMNS)


def test_earlier_like_is_counted():
    a = record(tweet_id="A", ts=90, like=100)
    b = record(tweet_id="B", ts=150)
    block = transfeat.augment([a, b])
    assert _col(block, "reader_like_count")[1] == 1
    assert _col(block, "author_like_received")[1] == 1
    assert _col(block, "pair_count")[1] == 1
    assert _col(block, "reader_like_count")[0] == 0


def test_event_at_same_second_excluded():
    a = record(tweet_id="A", ts=90, like=100)
    b = record(tweet_id="B", ts=100)
    block = transfeat.augment([a, b])
    assert _col(block, "reader_like_count")[1] == 0


def test_own_label_never_leaks():
    a = record(tweet_id="A", ts=90, like=90, retweet=95)
    block = transfeat.augment([a])
    assert all(block.values[0, i] == 0 for i in range(len(transfeat.COUNTER_COLUMNS)))


def test_pair_count_only_same_author():
    a = record(tweet_id="A", author="x", ts=10, reply=20)
    b = record(tweet_id="B", author="y", ts=30)
    block = transfeat.augment([a, b])
    assert _col(block, "reader_reply_count")[1] == 1
    assert _col(block, "pair_count")[1] == 0
    assert _col(block, "author_reply_received")[1] == 0


def test_per_type_pairs_columns():
    a = record(tweet_id="A", ts=10, reply=20, like=21)
    b = record(tweet_id="B", ts=30)
    block = transfeat.augment([a, b], per_type_pairs=True)
    assert block.columns == transfeat.d1_columns(True)
    assert _col(block, "pair_reply_count")[1] == 1 and _col(block, "pair_like_count")[1] == 1
    assert _col(block, "pair_quote_count")[1] == 0


def test_raw_columns():
    r = record(media=("Photo", "GIF"), hashtags=("h1", "h2"), domains=("d",), tweet_type="Reply",
               follows=True, author_followers=1234)
    block = transfeat.augment([r])
    assert _col(block, "author_follower_count")[0] == 1234
    assert _col(block, "media_photo")[0] == 1 and _col(block, "media_video")[0] == 0
    assert _col(block, "tweet_type_reply")[0] == 1 and _col(block, "tweet_type_toplevel")[0] == 0
    assert _col(block, "hashtag_count")[0] == 2 and _col(block, "domain_count")[0] == 1
    assert _col(block, "reader_follows_author")[0] == 1
    age = (r.tweet_timestamp - r.author.account_creation) / 86_400
    assert _col(block, "author_account_age_days")[0] == age
    assert not np.isnan(block.values).any()


def test_empty_and_single():
    assert transfeat.augment([]).n_rows == 0
    assert transfeat.brute_force_counters([]).n_rows == 0
    single = transfeat.brute_force_counters([record()])
    assert single.equals(transfeat.augment([record()]))


def test_fixed_fixtures_match_oracle():
    fixtures = [
        [record(tweet_id="A", ts=90, like=100), record(tweet_id="B", ts=150)],
        [record(tweet_id="A", ts=90, like=100), record(tweet_id="B", ts=100)],
        [record(tweet_id=f"t{i}", author="ab"[i % 2], reader="rs"[i % 3 == 0], ts=10 * i,
                like=10 * i + 5 if i % 2 else None, reply=10 * i + 15 if i % 3 else None)
         for i in range(1, 12)],
    ]
    for recs in fixtures:
        assert transfeat.augment(recs).equals(transfeat.brute_force_counters(recs))


def test_random_logs_match_oracle(small_log):
    records, _, _ = small_log
    assert transfeat.augment(records).equals(transfeat.brute_force_counters(records))
    assert transfeat.augment(records, True).equals(transfeat.brute_force_counters(records, True))


def test_permutation_invariance(small_log):
    records, _, _ = small_log
    perm = np.random.default_rng(0).permutation(len(records))
    base = transfeat.augment(records)
    shuffled = transfeat.augment([records[i] for i in perm])
    assert np.array_equal(shuffled.values, base.values[perm])


def test_counters_monotone_per_reader(small_log):
    records, _, _ = small_log
    block = transfeat.augment(records)
    cols = [block.columns.index(f"reader_{e}_count") for e in ("reply", "retweet", "quote", "like")]
    by_reader = {}
    for i, r in enumerate(records):
        by_reader.setdefault(r.reader.user_id, []).append(i)
    for rows in by_reader.values():
        rows.sort(key=lambda i: records[i].tweet_timestamp)
        vals = block.values[np.ix_(rows, cols)]
        assert np.all(np.diff(vals, axis=0) >= 0)
    pair = block.column("pair_count")
    assert np.all(pair <= block.values[:, cols].sum(axis=1))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 300))
def test_oracle_property(seed, n):
    cfg = synthgen.GenConfig(n_users=max(3, n // 10), n_tweets=max(1, n // 3), n_records=n,
                             fans_per_author=1, time_span_days=1, seed=seed)
    records, _ = synthgen.generate(cfg)
    assert transfeat.augment(records).equals(transfeat.brute_force_counters(records))


def test_block_round_trip(tmp_path, small_log):
    records, _, _ = small_log
    block = transfeat.augment(records)
    save_block(block, tmp_path / "d1")
    loaded = load_block(tmp_path / "d1.npy")
    assert loaded.equals(block)
    assert (tmp_path / "d1.json").exists()


def test_block_tsv_and_missing(tmp_path):
    block = FeatureBlock("d3", ["x", "y"], np.array([[1.0, np.nan], [2.5, 3.0]]))
    write_block_tsv(block, tmp_path / "b.tsv")
    lines = (tmp_path / "b.tsv").read_text().splitlines()
    assert lines[0] == "x\ty" and lines[1].endswith("NA")
    both = concat_rows([block, block])
    assert both.n_rows == 4 and both.equals(concat_rows([block, block]))
