from __future__ import annotations

import numpy as np
import pytest

from tweetengage import synthgen
from tweetengage.kg import follower_class
from tweetengage.records import EngagementType


def test_same_seed_same_bytes(tmp_path):
    cfg = synthgen.GenConfig(n_users=100, n_tweets=300, n_records=1000, seed=4)
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    synthgen.write_tsv(synthgen.generate(cfg)[0], a)
    synthgen.write_tsv(synthgen.generate(cfg)[0], b)
    assert a.read_bytes() == b.read_bytes()


def test_zero_weights_rate():
    cfg = synthgen.GenConfig(n_records=100_000, signal_weights={},
                             base_rates={"like": 0.3, "reply": 0, "retweet": 0, "quote": 0})
    records, _ = synthgen.generate(cfg)
    rate = np.mean([r.label(EngagementType.LIKE) for r in records])
    assert abs(rate - 0.3) <= 0.01


def test_degenerate_config_emits_negatives():
    cfg = synthgen.GenConfig(n_users=50, n_tweets=100, n_records=500, signal_weights={},
                             base_rates={"like": 0, "reply": 0, "retweet": 0, "quote": 0})
    records, truth = synthgen.generate(cfg)
    assert all(r.label(e) == 0 for r in records for e in EngagementType)
    # a zero base rate pins the probability at exactly zero
    assert np.all(truth.probabilities == 0.0)


def _hot_rates(weight: float, seed: int = 0):
    cfg = synthgen.GenConfig(n_records=100_000, signal_weights={"like:hot_hashtag": weight},
                             base_rates={"like": 0.1}, seed=seed)
    records, _ = synthgen.generate(cfg)
    hot = np.array([synthgen.HOT_HASHTAG in r.hashtags for r in records])
    y = np.array([r.label(EngagementType.LIKE) for r in records])
    return y[hot].mean(), y[~hot].mean()


def test_hot_hashtag_raises_like_rate():
    hot, cold = _hot_rates(2.0)
    assert hot > cold


def test_monotone_signal():
    rates = [_hot_rates(w)[0] for w in (0.0, 1.0, 2.0)]
    assert rates == sorted(rates)


def test_hot_token_is_in_text():
    cfg = synthgen.GenConfig(n_users=100, n_tweets=300, n_records=1000)
    records, _ = synthgen.generate(cfg)
    for r in records:
        assert (cfg.hot_token in r.text_tokens) == (synthgen.HOT_HASHTAG in r.hashtags)


def test_all_follower_classes_populated():
    records, _ = synthgen.generate(synthgen.GenConfig())
    classes = {follower_class(u.follower_count) for r in records for u in (r.author, r.reader)}
    assert classes == set(range(8))


def test_records_valid_and_timestamps_after_tweet(small_log):
    records, truth, cfg = small_log
    for r in records:
        r.validate()
    assert truth.probabilities.shape == (len(records), 4)
    assert abs(np.mean([r.language == "en" for r in records]) - cfg.english_fraction) < 0.05


@pytest.mark.parametrize("bad", [{"n_records": 10, "n_tweets": 20}, {"english_fraction": 1.5},
                                 {"signal_weights": {"bogus": 1.0}}, {"n_users": 0}])
def test_invalid_configs(bad):
    with pytest.raises(ValueError):
        synthgen.GenConfig(**bad)


def test_config_json_round_trip(tmp_path):
    cfg = synthgen.GenConfig(n_tweets=2000, n_records=5000, signal_weights={"like:affinity": 2.0})
    path = tmp_path / "gen.json"
    import json
    path.write_text(json.dumps(cfg.to_dict()))
    assert synthgen.GenConfig.from_json(path) == cfg


def test_lexicon_polarities():
    lex = synthgen.make_lexicon(synthgen.GenConfig(), size=50)
    assert len(lex) == 50 and set(lex.values()) <= {-1.0, 1.0}
