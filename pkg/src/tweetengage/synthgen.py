"""Synthetic engagement logs with a planted logistic ground truth.

Each impression gets five planted covariates:

``hot_hashtag``
    the tweet carries the designated hot hashtag, which also appears as a
    token id in ``text_tokens``
``affinity``
    the reader belongs to the author's fan set (fans see the author's tweets
    more often, so the pair recurs in the log)
``author_class``
    follower class of the author divided by 7
``language_match``
    the tweet language equals the reader's own language
``follows``
    ``reader_follows_author``

and the probability of engagement ``e`` is
``sigmoid(logit(base_rates[e]) + sum_f weight[e, f] * x_f)``.  A weight key
``"like:hot_hashtag"`` targets a single engagement type; a bare key such as
``"affinity"`` applies to all four.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .ingest import format_line
from .records import ENGAGEMENTS, MEDIA_TYPES, TWEET_TYPES, EngagementRecord, EngagementType, UserSnapshot

SIGNAL_FEATURES = ("hot_hashtag", "affinity", "author_class", "language_match", "follows")

CLASS_BOUNDS = (150, 500, 1_000, 10_000, 100_000, 1_000_000, 10_000_000, 200_000_000)

ENGLISH = "en"
HOT_HASHTAG = "h0000"
CLS_TOKEN, SEP_TOKEN = 101, 102
VOCAB_OFFSET = 1000

START_TS = 1_580_515_200  # 2020-02-01


def _default_base_rates() -> dict[str, float]:
    return {"reply": 0.03, "retweet": 0.1, "quote": 0.01, "like": 0.4}


def _default_weights() -> dict[str, float]:
    return {"hot_hashtag": 1.0, "affinity": 1.5, "author_class": 0.3,
            "language_match": 0.5, "follows": 0.5}


@dataclass
class GenConfig:
    n_users: int = 2_000
    n_tweets: int = 20_000
    n_records: int = 100_000
    n_hashtags: int = 500
    n_domains: int = 200
    n_languages: int = 10
    english_fraction: float = 0.4
    base_rates: dict[str, float] = field(default_factory=_default_base_rates)
    signal_weights: dict[str, float] = field(default_factory=_default_weights)
    # exponent of the discrete power law over follower classes, P(k) ~ (k+1)^-a
    follower_count_distribution: float = 1.0
    hot_fraction: float = 0.2
    hot_token: int = 777
    vocab_size: int = 5_000
    mean_tokens: float = 18.0
    fans_per_author: int = 5
    fan_share: float = 0.3
    follow_rate: float = 0.1
    fan_follow_rate: float = 0.7
    time_span_days: int = 30
    seed: int = 0

    def __post_init__(self) -> None:
        self.base_rates = {EngagementType.parse(k).label: float(v)
                           for k, v in self.base_rates.items()}
        for e in ENGAGEMENTS:
            self.base_rates.setdefault(e.label, 0.0)
        self.validate()

    def validate(self) -> None:
        for name in ("n_users", "n_tweets", "n_records", "n_hashtags", "n_domains",
                     "n_languages", "vocab_size"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_users < 2:
            raise ValueError("need at least two users")
        if not 1 <= self.fans_per_author < self.n_users:
            raise ValueError("fans_per_author must lie in [1, n_users)")
        if VOCAB_OFFSET <= self.hot_token < VOCAB_OFFSET + self.vocab_size:
            raise ValueError("hot_token must lie outside the random vocabulary range")
        if self.n_records < self.n_tweets:
            raise ValueError("n_records must be >= n_tweets")
        fractions = {"english_fraction": self.english_fraction, "hot_fraction": self.hot_fraction,
                     "fan_share": self.fan_share, "follow_rate": self.follow_rate,
                     "fan_follow_rate": self.fan_follow_rate, **self.base_rates}
        for name, value in fractions.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        for key in self.signal_weights:
            self.weight_for(key.split(":")[-1], EngagementType.LIKE)  # validates name
            if ":" in key:
                EngagementType.parse(key.split(":")[0])

    def weight_for(self, feature: str, engagement: EngagementType) -> float:
        if feature not in SIGNAL_FEATURES:
            raise ValueError(f"unknown signal feature {feature!r}")
        specific = f"{engagement.label}:{feature}"
        if specific in self.signal_weights:
            return float(self.signal_weights[specific])
        return float(self.signal_weights.get(feature, 0.0))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> GenConfig:
        known = cls.__dataclass_fields__
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown generator config keys: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def from_json(cls, path: str | Path) -> GenConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class GroundTruth:
    probabilities: np.ndarray  # (n_records, 4), columns in EngagementType order
    features: np.ndarray  # (n_records, 5), columns in SIGNAL_FEATURES order
    intercepts: np.ndarray  # (4,)
    coefficients: np.ndarray  # (4, 5)


def _logit(p: float) -> float:
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    return math.log(p / (1.0 - p))


def _follower_counts(rng: np.random.Generator, n: int,
                     exponent: float) -> tuple[np.ndarray, np.ndarray]:
    weights = np.arange(1, 9, dtype=float) ** -exponent
    classes = rng.choice(8, size=n, p=weights / weights.sum())
    classes[: min(n, 8)] = np.arange(min(n, 8))  # every class populated
    lows = np.array((0,) + CLASS_BOUNDS[:-1], dtype=float) + 1
    highs = np.array(CLASS_BOUNDS, dtype=float)
    lows[0] = 1.0
    # log-uniform within the class range
    u = rng.random(n)
    counts = np.exp(np.log(lows[classes]) + u * (np.log(highs[classes]) - np.log(lows[classes])))
    counts = np.clip(np.floor(counts), lows[classes], highs[classes]).astype(np.int64)
    counts[classes == 0] -= 1  # class 0 may hold zero followers
    return counts, classes


def _languages(rng: np.random.Generator, n: int, config: GenConfig) -> np.ndarray:
    others = config.n_languages - 1
    is_en = rng.random(n) < config.english_fraction
    if others == 0:
        return np.zeros(n, dtype=np.int64)
    other = rng.integers(1, config.n_languages, size=n)
    return np.where(is_en, 0, other)


def _language_name(code: int) -> str:
    return ENGLISH if code == 0 else f"l{code:02d}"


def generate(config: GenConfig) -> tuple[list[EngagementRecord], GroundTruth]:
    rng = np.random.default_rng(config.seed)
    n_users, n_tweets, n = config.n_users, config.n_tweets, config.n_records
    span = config.time_span_days * 86_400

    # users
    followers, classes = _follower_counts(rng, n_users, config.follower_count_distribution)
    following = np.minimum(rng.lognormal(5.0, 1.2, size=n_users).astype(np.int64), 50_000)
    verified = rng.random(n_users) < 0.01 + 0.15 * classes / 7.0
    created = rng.integers(1_200_000_000, START_TS - 10_000_000, size=n_users)
    user_lang = _languages(rng, n_users, config)
    users = [
        UserSnapshot(f"u{i:06d}", int(followers[i]), int(following[i]),
                     bool(verified[i]), int(created[i]))
        for i in range(n_users)
    ]

    n_fans = config.fans_per_author
    fans = np.empty((n_users, n_fans), dtype=np.int64)
    for a in range(n_users):
        pool = rng.choice(n_users - 1, size=n_fans, replace=False)
        fans[a] = pool + (pool >= a)  # skip the author

    # tweets
    t_author = rng.integers(0, n_users, size=n_tweets)
    t_ts = START_TS + rng.integers(0, span, size=n_tweets)
    t_lang = _languages(rng, n_tweets, config)
    t_type = rng.choice(len(TWEET_TYPES), size=n_tweets, p=[0.6, 0.1, 0.2, 0.1])
    t_hot = rng.random(n_tweets) < config.hot_fraction
    n_media = rng.choice(3, size=n_tweets, p=[0.6, 0.3, 0.1])
    n_tags = rng.poisson(0.8, size=n_tweets)
    has_domain = rng.random(n_tweets) < 0.3
    n_tokens = np.maximum(1, rng.poisson(config.mean_tokens, size=n_tweets))
    # Zipf-like token popularity over the vocabulary
    token_p = 1.0 / np.arange(1, config.vocab_size + 1, dtype=float)
    token_ids = rng.permutation(config.vocab_size) + VOCAB_OFFSET
    all_tokens = token_ids[rng.choice(config.vocab_size, size=int(n_tokens.sum()),
                                      p=token_p / token_p.sum())]
    tok_ends = np.cumsum(n_tokens)
    all_tags = rng.integers(1, max(2, config.n_hashtags), size=int(n_tags.sum()))
    tag_ends = np.cumsum(n_tags)
    hot_pos = rng.integers(0, n_tokens + 1)
    media_kind = rng.integers(0, 3, size=n_tweets)
    domain_id = rng.integers(0, config.n_domains, size=n_tweets)

    tweets = []
    for t in range(n_tweets):
        body = all_tokens[tok_ends[t] - n_tokens[t]: tok_ends[t]].tolist()
        tags = [f"h{j:04d}" for j in all_tags[tag_ends[t] - n_tags[t]: tag_ends[t]]]
        if t_hot[t]:
            body.insert(int(hot_pos[t]), config.hot_token)
            tags.insert(0, HOT_HASHTAG)
        kind = MEDIA_TYPES[media_kind[t]]
        media: tuple[str, ...] = ()
        if n_media[t]:
            media = ("Photo",) * int(n_media[t]) if kind == "Photo" else (kind,)
        domains = (f"d{domain_id[t]:04d}",) if has_domain[t] else ()
        tweets.append((
            tuple([CLS_TOKEN] + body + [SEP_TOKEN]),
            tuple(dict.fromkeys(tags)),
            f"t{t:08d}",
            media,
            domains,
            TWEET_TYPES[t_type[t]],
            _language_name(int(t_lang[t])),
        ))

    # impressions: every tweet once, the rest drawn uniformly
    rec_tweet = np.concatenate([np.arange(n_tweets), rng.integers(0, n_tweets, size=n - n_tweets)])
    rec_tweet = rec_tweet[rng.permutation(n)]
    rec_author = t_author[rec_tweet]
    is_fan = rng.random(n) < config.fan_share
    fan_pick = fans[rec_author, rng.integers(0, n_fans, size=n)]
    random_reader = rng.integers(0, n_users - 1, size=n)
    random_reader = random_reader + (random_reader >= rec_author)
    rec_reader = np.where(is_fan, fan_pick, random_reader)
    # a random reader may still be a fan
    fan_member = (fans[rec_author] == rec_reader[:, None]).any(axis=1)
    follows_p = np.where(fan_member, config.fan_follow_rate, config.follow_rate)
    follows = rng.random(n) < follows_p

    x = np.column_stack([
        t_hot[rec_tweet].astype(float),
        fan_member.astype(float),
        classes[rec_author] / 7.0,
        (t_lang[rec_tweet] == user_lang[rec_reader]).astype(float),
        follows.astype(float),
    ])
    intercepts = np.array([_logit(config.base_rates[e.label]) for e in ENGAGEMENTS])
    coef = np.array([[config.weight_for(f, e) for f in SIGNAL_FEATURES] for e in ENGAGEMENTS])
    with np.errstate(invalid="ignore", over="ignore"):
        z = intercepts[None, :] + x @ coef.T
        probs = 1.0 / (1.0 + np.exp(-z))
    probs = np.where(np.isneginf(intercepts)[None, :], 0.0, probs)
    probs = np.where(np.isposinf(intercepts)[None, :], 1.0, probs)
    labels = rng.random((n, 4)) < probs
    offsets = 1 + np.floor(rng.exponential(3_600.0, size=(n, 4))).astype(np.int64)

    records = []
    for i in range(n):
        tok, tags, tid, media, domains, ttype, lang = tweets[rec_tweet[i]]
        ts = int(t_ts[rec_tweet[i]])
        eng = [ts + int(offsets[i, k]) if labels[i, k] else None for k in range(4)]
        records.append(EngagementRecord(
            text_tokens=tok, hashtags=tags, tweet_id=tid, present_media=media,
            present_domains=domains, tweet_type=ttype, language=lang, tweet_timestamp=ts,
            author=users[rec_author[i]], reader=users[rec_reader[i]],
            reader_follows_author=bool(follows[i]),
            reply_ts=eng[0], retweet_ts=eng[1], quote_ts=eng[2], like_ts=eng[3],
        ))
    truth = GroundTruth(probabilities=probs, features=x, intercepts=intercepts, coefficients=coef)
    return records, truth


def write_tsv(records: Iterable[EngagementRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(format_line(rec))
            fh.write("\n")


def make_lexicon(config: GenConfig, size: int = 300) -> dict[int, float]:
    """Random +/-1 polarities for ``size`` vocabulary tokens, seeded from ``config``."""
    rng = np.random.default_rng([config.seed, 0x5E17])
    size = min(size, config.vocab_size)
    tokens = rng.choice(config.vocab_size, size=size, replace=False) + VOCAB_OFFSET
    polarity = rng.choice([-1.0, 1.0], size=size)
    return {int(t): float(p) for t, p in sorted(zip(tokens, polarity)) if t != config.hot_token}
