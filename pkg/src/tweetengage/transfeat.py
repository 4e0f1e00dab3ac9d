"""Point-in-time transactional counters plus the raw transactional columns.

An engagement event happens at its own engagement timestamp. The counters of
a record only see events that happened strictly before the record's
``tweet_timestamp``, so no label of the record itself (or of anything later)
can leak into its features.
"""

from __future__ import annotations

import zlib
from typing import Sequence

import numba
import numpy as np

from .blocks import FeatureBlock
from .records import ENGAGEMENTS, MEDIA_TYPES, TWEET_TYPES, EngagementRecord

SECONDS_PER_DAY = 86_400.0

COUNTER_COLUMNS = (
    [f"reader_{e.label}_count" for e in ENGAGEMENTS]
    + [f"author_{e.label}_received" for e in ENGAGEMENTS]
    + ["pair_count"]
)
PER_TYPE_PAIR_COLUMNS = [f"pair_{e.label}_count" for e in ENGAGEMENTS]

RAW_COLUMNS = (
    ["author_follower_count", "author_following_count", "author_is_verified", "author_account_age_days",
     "reader_follower_count", "reader_following_count", "reader_is_verified", "reader_account_age_days"]
    + [f"tweet_type_{t.lower()}" for t in TWEET_TYPES]
    + [f"media_{m.lower()}" for m in MEDIA_TYPES]
    + ["language_code", "hashtag_count", "domain_count", "reader_follows_author"]
)


def d1_columns(per_type_pairs: bool = False) -> list[str]:
    counters = COUNTER_COLUMNS[:-1] + PER_TYPE_PAIR_COLUMNS if per_type_pairs else COUNTER_COLUMNS
    return list(counters) + RAW_COLUMNS


def language_code(language: str) -> int:
    """Stable numeric code for a language id, identical across datasets."""
    return zlib.crc32(language.encode("utf-8"))


def raw_features(records: Sequence[EngagementRecord]) -> np.ndarray:
    out = np.zeros((len(records), len(RAW_COLUMNS)))
    for i, r in enumerate(records):
        a, u = r.author, r.reader
        row = out[i]
        row[0] = a.follower_count
        row[1] = a.following_count
        row[2] = a.is_verified
        row[3] = (r.tweet_timestamp - a.account_creation) / SECONDS_PER_DAY
        row[4] = u.follower_count
        row[5] = u.following_count
        row[6] = u.is_verified
        row[7] = (r.tweet_timestamp - u.account_creation) / SECONDS_PER_DAY
        row[8 + TWEET_TYPES.index(r.tweet_type)] = 1.0
        for m in r.present_media:
            row[12 + MEDIA_TYPES.index(m)] = 1.0
        row[15] = language_code(r.language)
        row[16] = len(r.hashtags)
        row[17] = len(r.present_domains)
        row[18] = r.reader_follows_author
    return out


def _user_codes(records: Sequence[EngagementRecord]) -> tuple[np.ndarray, np.ndarray]:
    ids: dict[str, int] = {}
    readers = np.fromiter((ids.setdefault(r.reader.user_id, len(ids)) for r in records),
                          dtype=np.int64, count=len(records))
    authors = np.fromiter((ids.setdefault(r.author.user_id, len(ids)) for r in records),
                          dtype=np.int64, count=len(records))
    return readers, authors


def _event_times(records: Sequence[EngagementRecord]) -> np.ndarray:
    """(n, 4) engagement times, -1 where absent."""
    out = np.full((len(records), 4), -1, dtype=np.int64)
    for i, r in enumerate(records):
        for k, ts in enumerate(r.engagement_times()):
            if ts is not None:
                out[i, k] = ts
    return out


def _assemble(counters: np.ndarray, records: Sequence[EngagementRecord],
              per_type_pairs: bool) -> FeatureBlock:
    values = np.hstack([counters.astype(np.float64), raw_features(records)])
    return FeatureBlock("d1", d1_columns(per_type_pairs), values)


def augment(records: Sequence[EngagementRecord], per_type_pairs: bool = False) -> FeatureBlock:
    """Counters and raw columns for every record, rows aligned with the input.

    One sweep over the time-ordered merge of engagement events and records:
    every event older than the current record is folded into the running
    per-reader, per-author and per-pair tallies before the record reads them.
    """
    n = len(records)
    n_pair_cols = 4 if per_type_pairs else 1
    counters = np.zeros((n, 8 + n_pair_cols), dtype=np.int64)
    if n == 0:
        return _assemble(counters, records, per_type_pairs)

    readers, authors = _user_codes(records)
    times = _event_times(records)
    ev_rec, ev_type = np.nonzero(times >= 0)
    ev_time = times[ev_rec, ev_type]
    ev_order = np.lexsort((ev_type, ev_rec, ev_time))
    ev_rec, ev_type, ev_time = ev_rec[ev_order], ev_type[ev_order], ev_time[ev_order]
    tweet_ts = np.fromiter((r.tweet_timestamp for r in records), dtype=np.int64, count=n)
    rec_order = np.argsort(tweet_ts, kind="stable")

    n_users = int(max(readers.max(), authors.max())) + 1
    reader_tally = np.zeros((n_users, 4), dtype=np.int64)
    author_tally = np.zeros((n_users, 4), dtype=np.int64)
    pair_tally: dict[tuple[int, int], np.ndarray] = {}

    ev_rec_l, ev_type_l, ev_time_l = ev_rec.tolist(), ev_type.tolist(), ev_time.tolist()
    n_events = len(ev_rec_l)
    ptr = 0
    for i in rec_order.tolist():
        ts = tweet_ts[i]
        while ptr < n_events and ev_time_l[ptr] < ts:
            j, k = ev_rec_l[ptr], ev_type_l[ptr]
            reader_tally[readers[j], k] += 1
            author_tally[authors[j], k] += 1
            key = (int(readers[j]), int(authors[j]))
            tally = pair_tally.get(key)
            if tally is None:
                tally = pair_tally[key] = np.zeros(4, dtype=np.int64)
            tally[k] += 1
            ptr += 1
        row = counters[i]
        row[0:4] = reader_tally[readers[i]]
        row[4:8] = author_tally[authors[i]]
        pair = pair_tally.get((int(readers[i]), int(authors[i])))
        if pair is not None:
            if per_type_pairs:
                row[8:12] = pair
            else:
                row[8] = pair.sum()
    return _assemble(counters, records, per_type_pairs)


@numba.njit(cache=True)
def _brute_counts(readers, authors, tweet_ts, times, per_type_pairs):
    n = readers.shape[0]
    out = np.zeros((n, 12 if per_type_pairs else 9), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            same_reader = readers[j] == readers[i]
            same_author = authors[j] == authors[i]
            if not (same_reader or same_author):
                continue
            for k in range(4):
                t = times[j, k]
                if t < 0 or t >= tweet_ts[i]:
                    continue
                if same_reader:
                    out[i, k] += 1
                if same_author:
                    out[i, 4 + k] += 1
                if same_reader and same_author:
                    out[i, 8 + k if per_type_pairs else 8] += 1
    return out


def brute_force_counters(records: Sequence[EngagementRecord], per_type_pairs: bool = False) -> FeatureBlock:
    """Quadratic reference implementation of :func:`augment`, for testing."""
    n = len(records)
    if n == 0:
        return _assemble(np.zeros((0, 12 if per_type_pairs else 9), dtype=np.int64), records, per_type_pairs)
    readers, authors = _user_codes(records)
    tweet_ts = np.array([r.tweet_timestamp for r in records], dtype=np.int64)
    counts = _brute_counts(readers, authors, tweet_ts, _event_times(records), per_type_pairs)
    return _assemble(counts, records, per_type_pairs)
