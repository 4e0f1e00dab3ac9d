"""Per-record embedding features (reader, author and tweet vectors)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..blocks import FeatureBlock
from ..records import EngagementRecord
from .graph import NodeKey
from .sgns import EmbeddingTable


def d2_columns(dimension: int) -> list[str]:
    return [f"{role}_e{i}" for role in ("reader", "author", "tweet") for i in range(dimension)]


def _tweet_vector(table: EmbeddingTable, record: EngagementRecord) -> np.ndarray:
    vec = table.get(NodeKey("Tweet", record.tweet_id))
    if vec is not None:
        return vec
    # cold start: average whatever attribute nodes the table knows
    attrs = [NodeKey("Hashtag", h) for h in record.hashtags]
    attrs += [NodeKey("Domain", d) for d in record.present_domains]
    attrs += [NodeKey("Language", record.language), NodeKey("TweetType", record.tweet_type)]
    known = [table[k] for k in attrs if k in table]
    if not known:
        return np.zeros(table.dimension)
    return np.mean(known, axis=0)


def embed_record(table: EmbeddingTable, record: EngagementRecord) -> np.ndarray:
    zero = np.zeros(table.dimension)
    reader = table.get(NodeKey("User", record.reader.user_id))
    author = table.get(NodeKey("User", record.author.user_id))
    return np.concatenate([
        zero if reader is None else reader,
        zero if author is None else author,
        _tweet_vector(table, record),
    ])


def embed_records(table: EmbeddingTable, records: Sequence[EngagementRecord]) -> FeatureBlock:
    values = np.zeros((len(records), 3 * table.dimension))
    for i, r in enumerate(records):
        values[i] = embed_record(table, r)
    return FeatureBlock("d2", d2_columns(table.dimension), values)
