from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import record
from tweetengage import sentiment
from tweetengage.sentiment import MISSING, SentimentFeatures

LEX = {10: 1.0, 11: 1.0, 12: -1.0}
EN = {"en"}


def test_non_english_missing():
    assert sentiment.score_lexicon(record(language="fr", tokens=(10,)), LEX, EN) == MISSING


def test_two_positive_tokens():
    f = sentiment.score_lexicon(record(tokens=(10, 11, 99)), LEX, EN)
    assert f == SentimentFeatures(1, -1.0, 1.0)


def test_no_match_is_negative():
    f = sentiment.score_lexicon(record(tokens=(99,)), LEX, EN)
    assert f.label == 0 and f.logit_neg == 0.0 and f.logit_pos == 0.0


def test_mixed_average():
    f = sentiment.score_lexicon(record(tokens=(10, 12, 12)), LEX, EN)
    assert f.label == 0 and math.isclose(f.logit_pos, -1 / 3)


def test_label_must_match_argmax():
    with pytest.raises(ValueError):
        SentimentFeatures(1, 2.0, 1.0)
    with pytest.raises(ValueError):
        SentimentFeatures(1, 0.5, 0.5)
    with pytest.raises(ValueError):
        SentimentFeatures(None, 0.1, 0.2)
    with pytest.raises(ValueError):
        sentiment.score_lexicon(record(), {}, EN)


def test_precomputed_round_trip(tmp_path):
    scores = {"t1": SentimentFeatures(1, -0.25, 0.75), "t2": SentimentFeatures(0, 0.1, -3.0), "t3": MISSING}
    path = tmp_path / "sent.tsv"
    sentiment.write_precomputed(scores, path)
    back = sentiment.load_precomputed(path)
    assert back == {k: v for k, v in scores.items() if not v.missing}


def test_precomputed_join_missing(tmp_path):
    block = sentiment.precomputed_block([record(tweet_id="t1"), record(tweet_id="zz")],
                                        {"t1": SentimentFeatures(1, -1.0, 1.0)})
    assert block.values[0].tolist() == [1.0, -1.0, 1.0]
    assert np.isnan(block.values[1]).all()


def test_precomputed_mismatch_has_line_number(tmp_path):
    path = tmp_path / "sent.tsv"
    path.write_text("t1\t1\t-1.0\t1.0\nt2\t1\t2.0\t1.0\n")
    with pytest.raises(ValueError, match=":2:"):
        sentiment.load_precomputed(path)
    path.write_text("t1\t1\t-1.0\n")
    with pytest.raises(ValueError, match=":1:"):
        sentiment.load_precomputed(path)


def test_lexicon_file_round_trip(tmp_path):
    sentiment.write_lexicon(LEX, tmp_path / "lex.tsv")
    assert sentiment.read_lexicon(tmp_path / "lex.tsv") == LEX


def test_provider_invariant_on_synthetic(small_log):
    from tweetengage import synthgen
    records, _, cfg = small_log
    lex = synthgen.make_lexicon(cfg)
    block = sentiment.lexicon_block(records, lex, EN)
    present = ~np.isnan(block.values[:, 0])
    assert np.array_equal(present, [r.language == "en" for r in records])
    v = block.values[present]
    assert np.array_equal(v[:, 0], (v[:, 2] > v[:, 1]).astype(float))
    again = sentiment.lexicon_block(records, lex, EN)
    assert again.equals(block)
