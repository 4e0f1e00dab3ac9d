from __future__ import annotations

import json

import numpy as np
import pytest

from tweetengage import ingest, pipeline, sentiment, synthgen
from tweetengage.pipeline import Cache, MissingArtifactError, PipelineConfig
from tweetengage.records import ENGAGEMENTS, EngagementType as E

SMALL = dict(gbdt={"n_trees": 15, "max_depth": 3}, walks={"walks_per_node": 2, "walk_length": 10},
             embedding={"dimension": 8, "epochs": 1}, content={"loss": "logistic", "epochs": 2},
             content_folds=2, stage1_sample_size=2000)


def _config(tmp_path, **kw):
    return PipelineConfig(**{**SMALL, "workdir": str(tmp_path / "work"), **kw})


@pytest.fixture
def log_files(tmp_path, small_log):
    records, _, cfg = small_log
    synthgen.write_tsv(records, tmp_path / "log.tsv")
    sentiment.write_lexicon(synthgen.make_lexicon(cfg), tmp_path / "lex.tsv")
    return tmp_path / "log.tsv", tmp_path / "lex.tsv"


def test_config_round_trip_and_validation(tmp_path):
    cfg = _config(tmp_path, seed=3)
    (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
    assert PipelineConfig.from_json(tmp_path / "c.json") == cfg
    assert cfg.gbdt_params().seed == 8 and cfg.walk_params().seed == 5
    for bad in ({"split_ratio": 0.0}, {"preset": 9}, {"content_folds": 1}, {"gbdt": {"depth": 2}},
                {"walks": {"seed": 1}}, {"split_mode": "sideways"}, {"bogus": 1}):
        with pytest.raises(ValueError):
            PipelineConfig.from_dict(bad)
    with pytest.raises(MissingArtifactError):
        PipelineConfig.from_json(tmp_path / "absent.json")


def test_records_digest_tracks_content(small_log):
    records, _, _ = small_log
    assert pipeline.records_digest(records) == pipeline.records_digest(list(records))
    assert pipeline.records_digest(records) != pipeline.records_digest(records[1:])


def test_cached_blocks_are_bit_identical(tmp_path, small_log):
    records, _, _ = small_log
    train, dev = ingest.split(records, 0.9, "random", 0)
    cfg = _config(tmp_path)
    cache = Cache(tmp_path / "cache")
    (a_tr, a_dv), _ = pipeline.feature_blocks(["d1", "d2", "d4"], train, [dev], cfg, cache)
    (b_tr, b_dv), _ = pipeline.feature_blocks(["d1", "d2", "d4"], train, [dev], cfg, cache)
    (c_tr, c_dv), _ = pipeline.feature_blocks(["d1", "d2", "d4"], train, [dev], cfg, Cache(None))
    for g in a_tr:
        assert a_tr[g].equals(b_tr[g]) and a_tr[g].equals(c_tr[g])
        assert a_dv[g].equals(b_dv[g]) and a_dv[g].equals(c_dv[g])
    assert a_tr["d1"].n_rows == len(train) and a_dv["d4"].n_rows == len(dev)


def test_missing_sentiment_source(tmp_path, small_log):
    records, _, _ = small_log
    with pytest.raises(MissingArtifactError, match="sentiment"):
        pipeline.feature_blocks(["d3"], records[:100], [records[100:200]], _config(tmp_path), Cache(None))


def test_missing_embeddings_without_auto_build(tmp_path, small_log):
    records, _, _ = small_log
    cfg = _config(tmp_path, auto_build_embeddings=False)
    with pytest.raises(MissingArtifactError):
        pipeline.feature_blocks(["d2"], records[:100], [records[100:200]], cfg, Cache(None))


def test_run_model_writes_artifacts(tmp_path, log_files):
    log, lex = log_files
    cfg = _config(tmp_path, input=str(log), sentiment_lexicon=str(lex))
    rep = pipeline.run_model(3, cfg)
    out = tmp_path / "work" / "model3"
    assert (out / "report.json").exists() and (out / "report.txt").read_text().startswith("Model")
    keys, preds = pipeline.read_predictions(out / "predictions.tsv")
    assert len(keys) == sum(1 for _ in open(out / "predictions.tsv")) - 1
    assert all(np.all((p > 0) & (p < 1)) for p in preds.values())
    trained = pipeline.load_trained(out / "models")
    assert trained.groups == ("d1", "d3") and set(rep.per_type) <= set(ENGAGEMENTS)


def test_run_is_deterministic(tmp_path, log_files):
    log, _ = log_files
    texts = []
    for name in ("a", "b"):
        cfg = _config(tmp_path, input=str(log), workdir=str(tmp_path / name))
        pipeline.run_model(4, cfg)
        texts.append([(tmp_path / name / "model4" / f).read_bytes()
                      for f in ("predictions.tsv", "report.json", "models/like.json")])
    assert texts[0] == texts[1]


def test_stage_one_and_three(tmp_path, log_files, small_log):
    log, _ = log_files
    records, _, _ = small_log
    synthgen.write_tsv(records[:300], tmp_path / "holdout.tsv")
    cfg = _config(tmp_path, input=str(log), holdout=str(tmp_path / "holdout.tsv"), stage1_sample_size=1500)
    rep = pipeline.run_stage(1, cfg)
    n_dev = len(pipeline.read_predictions(tmp_path / "work" / "stage1" / "predictions.tsv")[0])
    assert 100 <= n_dev <= 200 and rep is not None
    assert pipeline.run_stage(3, cfg) is None
    keys, _ = pipeline.read_predictions(tmp_path / "work" / "stage3" / "predictions.tsv")
    assert keys == [(r.tweet_id, r.reader.user_id) for r in records[:300]]
    with pytest.raises(MissingArtifactError):
        pipeline.run_stage(3, _config(tmp_path, input=str(log)))
    with pytest.raises(ValueError):
        pipeline.run_stage(4, cfg)


def test_stage_data_sizes(small_log, tmp_path):
    records, _, _ = small_log
    cfg = _config(tmp_path, stage2_fraction=0.5, split_ratio=0.8)
    train, dev = pipeline.stage_data(2, records, cfg)
    assert len(train) + len(dev) == 1500


def test_single_class_type_falls_back(tmp_path, small_log):
    records, _, _ = small_log
    from dataclasses import replace
    no_quotes = [replace(r, quote_ts=None) for r in records]
    result = pipeline.run_experiment(["d1"], no_quotes[:2500], no_quotes[2500:], _config(tmp_path))
    assert E.QUOTE in result.trained.fallback and E.QUOTE not in result.report.per_type
    assert np.all(result.predictions[E.QUOTE] == result.predictions[E.QUOTE][0])


def test_predictions_header_checked(tmp_path):
    (tmp_path / "p.tsv").write_text("a\tb\n")
    with pytest.raises(pipeline.PipelineError):
        pipeline.read_predictions(tmp_path / "p.tsv")
