"""Sentiment feature group: polarity label plus two logits per tweet.

Two providers fill the same contract. :func:`score_lexicon` is a
deterministic token-polarity scorer that only covers English tweets;
:func:`load_precomputed` reads scores produced elsewhere (for instance by a
fine-tuned transformer) keyed by tweet id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Collection, Iterable, Mapping, Sequence

import numpy as np

from .blocks import FeatureBlock
from .records import EngagementRecord

D3_COLUMNS = ["label", "logit_neg", "logit_pos"]


@dataclass(frozen=True)
class SentimentFeatures:
    label: int | None  # 0 negative, 1 positive, None missing
    logit_neg: float | None = None
    logit_pos: float | None = None

    def __post_init__(self) -> None:
        if self.label is None:
            if self.logit_neg is not None or self.logit_pos is not None:
                raise ValueError("missing sentiment cannot carry logits")
            return
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.logit_neg is None or self.logit_pos is None:
            raise ValueError("a present label needs both logits")
        if not (math.isfinite(self.logit_neg) and math.isfinite(self.logit_pos)):
            raise ValueError("logits must be finite")
        # ties resolve to the first (negative) class, like argmax
        expected = 1 if self.logit_pos > self.logit_neg else 0
        if self.label != expected:
            raise ValueError(
                f"label {self.label} disagrees with argmax of logits ({self.logit_neg}, {self.logit_pos})")

    @property
    def missing(self) -> bool:
        return self.label is None

    def as_row(self) -> list[float]:
        if self.label is None:
            return [math.nan, math.nan, math.nan]
        return [float(self.label), self.logit_neg, self.logit_pos]


MISSING = SentimentFeatures(None)


def score_lexicon(record: EngagementRecord, lexicon: Mapping[int, float],
                  english_language_ids: Collection[str]) -> SentimentFeatures:
    """Average polarity of the tweet's lexicon tokens; non-English tweets are missing.

    A score of exactly zero (including "no token matched") counts as negative.
    """
    if not lexicon:
        raise ValueError("lexicon must not be empty")
    if record.language not in english_language_ids:
        return MISSING
    matched = [lexicon[t] for t in record.text_tokens if t in lexicon]
    s = sum(matched) / max(1, len(matched))
    return SentimentFeatures(1 if s > 0 else 0, -s, s)


def read_lexicon(path: str | Path) -> dict[int, float]:
    lexicon = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected token_id<TAB>polarity")
            try:
                lexicon[int(parts[0])] = float(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad lexicon entry {line.strip()!r}") from None
    return lexicon


def write_lexicon(lexicon: Mapping[int, float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for token, polarity in sorted(lexicon.items()):
            fh.write(f"{token}\t{float(polarity)!r}\n")


def write_precomputed(scores: Mapping[str, SentimentFeatures], path: str | Path) -> None:
    """Write tweet_id, label, logit_neg, logit_pos; missing entries are skipped."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tweet_id, f in scores.items():
            if not f.missing:
                fh.write(f"{tweet_id}\t{f.label}\t{float(f.logit_neg)!r}\t{float(f.logit_pos)!r}\n")


def load_precomputed(path: str | Path) -> dict[str, SentimentFeatures]:
    scores: dict[str, SentimentFeatures] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            tweet_id, label, neg, pos = parts
            try:
                scores[tweet_id] = SentimentFeatures(int(label), float(neg), float(pos))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return scores


def lexicon_block(records: Sequence[EngagementRecord], lexicon: Mapping[int, float],
                  english_language_ids: Collection[str]) -> FeatureBlock:
    rows = [score_lexicon(r, lexicon, english_language_ids).as_row() for r in records]
    return FeatureBlock("d3", list(D3_COLUMNS), np.array(rows, dtype=np.float64).reshape(len(rows), 3))


def precomputed_block(records: Iterable[EngagementRecord],
                      scores: Mapping[str, SentimentFeatures]) -> FeatureBlock:
    rows = [scores.get(r.tweet_id, MISSING).as_row() for r in records]
    return FeatureBlock("d3", list(D3_COLUMNS), np.array(rows, dtype=np.float64).reshape(len(rows), 3))
