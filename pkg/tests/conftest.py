from __future__ import annotations

import pytest

from tweetengage import synthgen
from tweetengage.records import EngagementRecord, UserSnapshot


def user(uid: str, followers: int = 10, following: int = 5, verified: bool = False,
         created: int = 1_500_000_000) -> UserSnapshot:
    return UserSnapshot(uid, followers, following, verified, created)


def record(tweet_id: str = "t1", author: str = "a", reader: str = "r", ts: int = 1_600_000_000,
           tokens=(101, 2003, 102), hashtags=(), media=(), domains=(), tweet_type: str = "TopLevel",
           language: str = "en", follows: bool = False, reply=None, retweet=None, quote=None,
           like=None, author_followers: int = 10, reader_followers: int = 10) -> EngagementRecord:
    return EngagementRecord(
        text_tokens=tuple(tokens), hashtags=tuple(hashtags), tweet_id=tweet_id,
        present_media=tuple(media), present_domains=tuple(domains), tweet_type=tweet_type,
        language=language, tweet_timestamp=ts, author=user(author, author_followers),
        reader=user(reader, reader_followers), reader_follows_author=follows,
        reply_ts=reply, retweet_ts=retweet, quote_ts=quote, like_ts=like)


@pytest.fixture(scope="session")
def small_log():
    cfg = synthgen.GenConfig(n_users=200, n_tweets=800, n_records=3000, n_hashtags=40,
                             n_domains=20, seed=11)
    records, truth = synthgen.generate(cfg)
    return records, truth, cfg


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
