"""Core record types shared by every stage of the pipeline."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

MAX_FOLLOWER_COUNT = 200_000_000_000

TWEET_TYPES = ("TopLevel", "Quote", "Retweet", "Reply")
MEDIA_TYPES = ("Photo", "Video", "GIF")


class EngagementType(enum.IntEnum):
    REPLY = 0
    RETWEET = 1
    QUOTE = 2  # retweet with comment
    LIKE = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: str | int | EngagementType) -> EngagementType:
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown engagement type: {value!r}") from None


ENGAGEMENTS = tuple(EngagementType)


@dataclass(frozen=True, slots=True)
class UserSnapshot:
    user_id: str
    follower_count: int
    following_count: int
    is_verified: bool
    account_creation: int

    def validate(self) -> None:
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        if not 0 <= self.follower_count <= MAX_FOLLOWER_COUNT:
            raise ValueError(f"follower_count out of range: {self.follower_count}")
        if self.following_count < 0:
            raise ValueError(f"following_count must be >= 0: {self.following_count}")
        if self.account_creation <= 0:
            raise ValueError(f"account_creation must be > 0: {self.account_creation}")


@dataclass(frozen=True, slots=True)
class EngagementRecord:
    """One impression of a tweet on a reader's timeline.

    The four engagement timestamps are the labels; ``None`` means the reader
    did not perform that engagement.
    """

    text_tokens: tuple[int, ...]
    hashtags: tuple[str, ...]
    tweet_id: str
    present_media: tuple[str, ...]
    present_domains: tuple[str, ...]
    tweet_type: str
    language: str
    tweet_timestamp: int
    author: UserSnapshot
    reader: UserSnapshot
    reader_follows_author: bool
    reply_ts: int | None = None
    retweet_ts: int | None = None
    quote_ts: int | None = None
    like_ts: int | None = None

    def engagement_ts(self, engagement: EngagementType) -> int | None:
        return (self.reply_ts, self.retweet_ts, self.quote_ts, self.like_ts)[engagement]

    def engagement_times(self) -> tuple[int | None, int | None, int | None, int | None]:
        return (self.reply_ts, self.retweet_ts, self.quote_ts, self.like_ts)

    def label(self, engagement: EngagementType) -> int:
        return int(self.engagement_ts(engagement) is not None)

    def validate(self) -> None:
        if not self.tweet_id:
            raise ValueError("tweet_id must be non-empty")
        if self.tweet_type not in TWEET_TYPES:
            raise ValueError(f"unknown tweet_type: {self.tweet_type!r}")
        if not self.language:
            raise ValueError("language must be non-empty")
        if self.tweet_timestamp <= 0:
            raise ValueError(f"tweet_timestamp must be > 0: {self.tweet_timestamp}")
        for media in self.present_media:
            if media not in MEDIA_TYPES:
                raise ValueError(f"unknown media type: {media!r}")
        if any(t < 0 for t in self.text_tokens):
            raise ValueError("token ids must be non-negative")
        self.author.validate()
        self.reader.validate()
        if self.author.user_id == self.reader.user_id:
            raise ValueError("author and reader must differ")
        for engagement, ts in zip(ENGAGEMENTS, self.engagement_times()):
            if ts is not None and ts < self.tweet_timestamp:
                raise ValueError(
                    f"{engagement.label}_ts {ts} precedes tweet_timestamp {self.tweet_timestamp}"
                )


def strip_labels(record: EngagementRecord) -> EngagementRecord:
    """Return a copy with every engagement timestamp removed."""
    return replace(record, reply_ts=None, retweet_ts=None, quote_ts=None, like_ts=None)
