"""Reading, splitting and summarising canonical engagement-log TSV files.

Each line carries 23 tab-separated columns, no header::

    text_tokens hashtags tweet_id present_media present_domains tweet_type
    language tweet_timestamp author_user_id author_follower_count
    author_following_count author_is_verified author_account_creation
    reader_user_id reader_follower_count reader_following_count
    reader_is_verified reader_account_creation reader_follows_author
    reply_ts retweet_ts quote_ts like_ts

List columns use ``|`` as the inner delimiter and an empty field stands for an
empty list or an absent timestamp.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .records import ENGAGEMENTS, EngagementRecord, UserSnapshot

log = logging.getLogger(__name__)

N_FIELDS = 23
LIST_SEP = "|"

COLUMNS = (
    "text_tokens", "hashtags", "tweet_id", "present_media", "present_domains",
    "tweet_type", "language", "tweet_timestamp",
    "author_user_id", "author_follower_count", "author_following_count",
    "author_is_verified", "author_account_creation",
    "reader_user_id", "reader_follower_count", "reader_following_count",
    "reader_is_verified", "reader_account_creation",
    "reader_follows_author", "reply_ts", "retweet_ts", "quote_ts", "like_ts",
)


class IngestError(ValueError):
    """A line of an engagement log could not be parsed.

    ``field`` is the 0-based column index, or ``None`` for line-level problems
    such as a wrong number of columns.
    """

    def __init__(self, line: int, message: str, field: int | None = None,
                 expected: int | None = None) -> None:
        self.line = line
        self.field = field
        self.expected = expected
        self.path: str | None = None  # set by parse_tsv
        where = f"line {line}" if field is None else f"line {line}, field {field} ({COLUMNS[field]})"
        super().__init__(f"{where}: {message}")


def _split_list(text: str) -> list[str]:
    return text.split(LIST_SEP) if text else []


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"expected 'true' or 'false', got {text!r}")


def _parse_opt_int(text: str) -> int | None:
    return int(text) if text else None


_FIELD_PARSERS = {
    0: lambda s: tuple(int(t) for t in _split_list(s)),
    7: int,
    9: int, 10: int, 11: _parse_bool, 12: int,
    14: int, 15: int, 16: _parse_bool, 17: int,
    18: _parse_bool,
    19: _parse_opt_int, 20: _parse_opt_int, 21: _parse_opt_int, 22: _parse_opt_int,
}


def parse_line(line: str, lineno: int = 1) -> EngagementRecord:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != N_FIELDS:
        raise IngestError(lineno, f"expected {N_FIELDS} fields, got {len(fields)}",
                          expected=N_FIELDS)
    # parse typed columns one by one so errors point at the offending field
    v: dict[int, object] = {}
    for idx, parser in _FIELD_PARSERS.items():
        try:
            v[idx] = parser(fields[idx])
        except ValueError as exc:
            raise IngestError(lineno, str(exc), field=idx) from None
    record = EngagementRecord(
        text_tokens=v[0],
        hashtags=tuple(_split_list(fields[1])),
        tweet_id=fields[2],
        present_media=tuple(_split_list(fields[3])),
        present_domains=tuple(_split_list(fields[4])),
        tweet_type=fields[5],
        language=fields[6],
        tweet_timestamp=v[7],
        author=UserSnapshot(fields[8], v[9], v[10], v[11], v[12]),
        reader=UserSnapshot(fields[13], v[14], v[15], v[16], v[17]),
        reader_follows_author=v[18],
        reply_ts=v[19],
        retweet_ts=v[20],
        quote_ts=v[21],
        like_ts=v[22],
    )
    try:
        record.validate()
    except ValueError as exc:
        raise IngestError(lineno, str(exc)) from None
    return record


def _fmt_bool(value: bool) -> str:
    return "true" if value else "false"


def _fmt_opt(value: int | None) -> str:
    return "" if value is None else str(value)


def format_line(record: EngagementRecord) -> str:
    """Serialise a record to one TSV line (without the trailing newline)."""
    a, r = record.author, record.reader
    return "\t".join((
        LIST_SEP.join(str(t) for t in record.text_tokens),
        LIST_SEP.join(record.hashtags),
        record.tweet_id,
        LIST_SEP.join(record.present_media),
        LIST_SEP.join(record.present_domains),
        record.tweet_type,
        record.language,
        str(record.tweet_timestamp),
        a.user_id, str(a.follower_count), str(a.following_count),
        _fmt_bool(a.is_verified), str(a.account_creation),
        r.user_id, str(r.follower_count), str(r.following_count),
        _fmt_bool(r.is_verified), str(r.account_creation),
        _fmt_bool(record.reader_follows_author),
        _fmt_opt(record.reply_ts), _fmt_opt(record.retweet_ts),
        _fmt_opt(record.quote_ts), _fmt_opt(record.like_ts),
    ))


def parse_tsv(path: str | Path, strict: bool = True,
              errors: list[IngestError] | None = None) -> Iterator[EngagementRecord]:
    """Yield records from ``path`` in file order.

    In strict mode the first malformed line raises :class:`IngestError`. In
    lenient mode malformed lines are skipped; they are logged and appended to
    ``errors`` when a list is supplied.
    """
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip("\n"):
                continue
            try:
                yield parse_line(line, lineno)
            except IngestError as exc:
                if strict:
                    exc.path = str(path)
                    raise
                log.warning("skipping malformed line: %s", exc)
                if errors is not None:
                    errors.append(exc)


def read_tsv(path: str | Path, strict: bool = True) -> list[EngagementRecord]:
    return list(parse_tsv(path, strict=strict))


def split_indices(n: int, ratio: float, mode: str = "random", seed: int = 0,
                  timestamps: Sequence[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    if n <= 0:
        raise ValueError("cannot split an empty sequence")
    if mode == "random":
        in_train = np.random.default_rng(seed).random(n) < ratio
    elif mode == "chronological":
        if timestamps is None:
            raise ValueError("chronological split needs timestamps")
        order = np.argsort(np.asarray(timestamps, dtype=np.int64), kind="stable")
        # guard against ratio*n landing a hair above an integer
        k = math.ceil(ratio * n - 1e-9)
        in_train = np.zeros(n, dtype=bool)
        in_train[order[:k]] = True
    else:
        raise ValueError(f"unknown split mode: {mode!r}")
    idx = np.arange(n)
    return idx[in_train], idx[~in_train]


def split(records: Sequence[EngagementRecord], ratio: float, mode: str = "random",
          seed: int = 0) -> tuple[list[EngagementRecord], list[EngagementRecord]]:
    """Partition records into (train, dev).

    ``random`` assigns each record to train with probability ``ratio``;
    ``chronological`` puts the earliest ``ceil(ratio * n)`` records in train.
    Both sides keep the input order.
    """
    ts = [r.tweet_timestamp for r in records] if mode == "chronological" else None
    train_idx, dev_idx = split_indices(len(records), ratio, mode, seed, ts)
    return [records[i] for i in train_idx], [records[i] for i in dev_idx]


@dataclass
class StatsReport:
    n: int
    counts: dict[str, int]
    positive_rates: dict[str, float]
    languages: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "counts": dict(self.counts),
            "positive_rates": dict(self.positive_rates),
            "languages": dict(self.languages),
        }


def dataset_stats(records: Iterable[EngagementRecord]) -> StatsReport:
    n = 0
    counts = Counter({e.label: 0 for e in ENGAGEMENTS})
    languages: Counter[str] = Counter()
    for rec in records:
        n += 1
        languages[rec.language] += 1
        for e, ts in zip(ENGAGEMENTS, rec.engagement_times()):
            if ts is not None:
                counts[e.label] += 1
    rates = {e.label: (counts[e.label] / n if n else 0.0) for e in ENGAGEMENTS}
    return StatsReport(
        n=n,
        counts={e.label: counts[e.label] for e in ENGAGEMENTS},
        positive_rates=rates,
        languages=dict(sorted(languages.items())),
    )
