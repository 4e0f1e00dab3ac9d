from __future__ import annotations

import numpy as np
import pytest

from conftest import record
from graphs import barbell, clique_separation
from tweetengage.kg import (EmbeddingTable, NodeKey, WalkParams, d2_columns, embed_record, embed_records,
                            generate_walks, train_embeddings, walks_from_keys)


def test_dimension_and_coverage():
    walks = [["a", "b", "c"], ["c", "d"]]
    table = train_embeddings(walks, dimension=7, epochs=2)
    assert table.dimension == 7
    assert set(table.keys) == {"a", "b", "c", "d"}


def test_loss_decreases():
    g = barbell(10)
    table = train_embeddings(generate_walks(g, WalkParams(seed=1)), dimension=16, epochs=3, seed=1)
    assert len(table.losses) == 3
    assert table.losses[2] < table.losses[0]


def test_deterministic():
    walks = generate_walks(barbell(8), WalkParams(walk_length=10, walks_per_node=3))
    a = train_embeddings(walks, dimension=8, seed=5)
    b = train_embeddings(walks, dimension=8, seed=5)
    assert np.array_equal(a.vectors, b.vectors)


@pytest.mark.parametrize("arg", ["dimension", "window", "negatives", "epochs"])
def test_positive_arguments(arg):
    with pytest.raises(ValueError):
        train_embeddings([["a", "b"]], **{arg: 0})


def test_barbell_separation():
    g = barbell()
    table = train_embeddings(generate_walks(g, WalkParams(seed=0)), seed=0)
    assert clique_separation(table) >= 0.2


def test_save_load_round_trip(tmp_path):
    walks = walks_from_keys([[NodeKey("User", "a"), NodeKey("Tweet", "t")]])
    table = train_embeddings(walks, dimension=4, epochs=1)
    table.save(tmp_path / "emb.txt")
    header = (tmp_path / "emb.txt").read_text().splitlines()[0]
    assert header == "2 4"
    back = EmbeddingTable.load(tmp_path / "emb.txt")
    assert back.keys == table.keys and np.array_equal(back.vectors, table.vectors)


def _table():
    keys = [NodeKey("User", "r"), NodeKey("User", "a"), NodeKey("Tweet", "t1"),
            NodeKey("Hashtag", "h1"), NodeKey("Hashtag", "h2")]
    vectors = np.arange(10, dtype=float).reshape(5, 2)
    return EmbeddingTable(keys, vectors)


def test_seen_nodes_concatenate():
    row = embed_record(_table(), record(tweet_id="t1"))
    assert row.tolist() == [0, 1, 2, 3, 4, 5]


def test_unseen_everything_is_zero():
    row = embed_record(_table(), record(tweet_id="new", author="x", reader="y", language="zz"))
    assert row.tolist() == [0.0] * 6


def test_cold_start_tweet_uses_attributes():
    row = embed_record(_table(), record(tweet_id="new", hashtags=("h1", "h2", "unknown")))
    assert row[4:].tolist() == [7.0, 8.0]


def test_block_columns():
    block = embed_records(_table(), [record(), record(tweet_id="new")])
    assert block.columns == d2_columns(2) and block.name == "d2" and block.n_rows == 2
