"""Orchestration of the two-stage model: feature groups, boosted trees, evaluation.

Randomness derives from the one master ``seed`` in :class:`PipelineConfig`:

==========================  ==============
train/dev split             seed
stage subsample             seed + 1
random walks                seed + 2
embedding training          seed + 3
content models              seed + 4
boosted trees               seed + 5
early-stopping holdout      seed + 6
==========================  ==============

Feature blocks, embedding tables and content models are cached under
``<workdir>/cache`` keyed by a SHA-256 of everything they depend on (the
records' canonical TSV lines plus the relevant configuration), so presets
sharing a group reuse it and a cached block is bit-identical to a fresh one.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import content, ingest, kg, sentiment, transfeat
from .blocks import FeatureBlock, load_block, save_block
from .ensemble import (FeatureMatrix, GbdtHyperparams, GbdtModel, assemble, normalize_group, predict,
                       preset_groups, train_gbdt)
from .evaluation import MetricReport, report
from .records import ENGAGEMENTS, EngagementRecord, EngagementType, strip_labels
from .reportfmt import write_training_curve

log = logging.getLogger(__name__)

PREDICTION_COLUMNS = ("tweet_id", "reader_user_id", "p_reply", "p_retweet", "p_quote", "p_like")


class PipelineError(Exception):
    """Problem with the inputs of a run (missing artifact, unusable data)."""


class MissingArtifactError(PipelineError):
    def __init__(self, artifact: str, hint: str = "") -> None:
        super().__init__(f"missing artifact: {artifact}" + (f" ({hint})" if hint else ""))
        self.artifact = artifact


@dataclass
class EmbeddingParams:
    dimension: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025


def _from_dict(cls, data: Mapping | None, what: str):
    data = dict(data or {})
    unknown = set(data) - {f.name for f in fields(cls)}
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**data)


@dataclass
class PipelineConfig:
    input: str | None = None
    holdout: str | None = None
    workdir: str = "work"
    seed: int = 0
    threads: int = 1
    stage1_sample_size: int = 200_000
    stage2_fraction: float = 0.4
    split_ratio: float = 0.9
    split_mode: str = "random"
    preset: int = 1
    per_type_pairs: bool = False
    edge_config: dict | None = None
    walks: dict = field(default_factory=dict)  # WalkParams fields other than seed
    embedding: dict = field(default_factory=dict)  # EmbeddingParams fields
    embeddings_path: str | None = None  # precomputed table; skips walk + training
    auto_build_embeddings: bool = True
    sentiment_lexicon: str | None = None
    sentiment_precomputed: str | None = None
    english_languages: list[str] = field(default_factory=lambda: ["en"])
    content: dict = field(default_factory=lambda: {"loss": "logistic"})  # ContentParams fields
    content_folds: int = 5  # out-of-fold scores for training rows; 0 scores them in-sample
    gbdt: dict = field(default_factory=dict)  # GbdtHyperparams fields
    early_stopping_fraction: float = 0.1  # carved from train; 0 disables early stopping
    interpolation: str = "step"

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.stage1_sample_size < 1:
            raise ValueError("stage1_sample_size must be positive")
        for name in ("stage2_fraction", "split_ratio"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if not 0.0 <= self.early_stopping_fraction < 1.0:
            raise ValueError("early_stopping_fraction must lie in [0, 1)")
        if self.split_mode not in ("random", "chronological"):
            raise ValueError(f"unknown split_mode {self.split_mode!r}")
        if self.content_folds == 1 or self.content_folds < 0:
            raise ValueError("content_folds must be 0 or >= 2")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        preset_groups(self.preset)
        self.walk_params()
        self.embedding_params()
        self.content_params()
        self.gbdt_params()
        if self.edge_config is not None:
            kg.edge_config_from_dict(self.edge_config)

    def walk_params(self) -> kg.WalkParams:
        if "seed" in self.walks:
            raise ValueError("walk seed derives from the master seed")
        return _from_dict(kg.WalkParams, {**self.walks, "seed": self.seed + 2}, "walk")

    def embedding_params(self) -> EmbeddingParams:
        return _from_dict(EmbeddingParams, self.embedding, "embedding")

    def content_params(self) -> content.ContentParams:
        return _from_dict(content.ContentParams, {**self.content, "seed": self.seed + 4}, "content")

    def gbdt_params(self) -> GbdtHyperparams:
        return GbdtHyperparams.from_dict({**self.gbdt, "seed": self.seed + 5})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> PipelineConfig:
        return _from_dict(cls, data, "pipeline config")

    @classmethod
    def from_json(cls, path: str | Path) -> PipelineConfig:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise MissingArtifactError(str(path), "config file") from None
        return cls.from_dict(data)


# ---------------------------------------------------------------- hashing / cache

def records_digest(records: Sequence[EngagementRecord]) -> str:
    h = hashlib.sha256()
    for r in records:
        h.update(ingest.format_line(r).encode())
        h.update(b"\n")
    return h.hexdigest()


def _key(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True, default=str).encode()).hexdigest()[:24]


class Cache:
    def __init__(self, root: str | Path | None) -> None:
        self.root = None if root is None else Path(root)
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path | None:
        return None if self.root is None else self.root / name

    def blocks(self, name: str, n_parts: int, compute: Callable[[], list[FeatureBlock]]) -> list[FeatureBlock]:
        if self.root is not None:
            stems = [self.root / f"{name}-{i}" for i in range(n_parts)]
            if all(s.with_suffix(".npy").exists() and s.with_suffix(".json").exists() for s in stems):
                log.info("cache hit %s", name)
                return [load_block(s) for s in stems]
        out = compute()
        if self.root is not None:
            for s, b in zip(stems, out):
                save_block(b, s)
        return out


# ---------------------------------------------------------------- feature groups

@dataclass
class FeatureContext:
    """First-stage artifacts needed to featurize new records later."""

    embeddings: kg.EmbeddingTable | None = None
    content_models: content.ContentModels | None = None
    lexicon: dict[int, float] | None = None
    precomputed: dict[str, sentiment.SentimentFeatures] | None = None


def _d1(train, others, config: PipelineConfig, cache: Cache, digests) -> list[FeatureBlock]:
    key = _key("d1", digests, config.per_type_pairs)

    def compute():
        allrecs = list(train) + [r for part in others for r in part]
        block = transfeat.augment(allrecs, config.per_type_pairs)
        bounds = np.cumsum([0, len(train)] + [len(p) for p in others])
        return [block.take(np.arange(bounds[i], bounds[i + 1])) for i in range(len(bounds) - 1)]
    return cache.blocks(f"d1-{key}", 1 + len(others), compute)


def build_embeddings(train, others, config: PipelineConfig, cache: Cache, digests) -> kg.EmbeddingTable:
    if config.embeddings_path is not None:
        path = Path(config.embeddings_path)
        if not path.exists():
            raise MissingArtifactError(str(path), "embeddings_path in config")
        return kg.EmbeddingTable.load(path)
    key = _key("emb", digests, config.edge_config, asdict(config.walk_params()), asdict(config.embedding_params()))
    cached = cache.path(f"emb-{key}.txt")
    if cached is not None and cached.exists():
        return kg.EmbeddingTable.load(cached)
    if not config.auto_build_embeddings:
        raise MissingArtifactError(
            "knowledge-graph embeddings",
            "run kg-embed and set embeddings_path, or enable auto_build_embeddings")
    edge_cfg = None if config.edge_config is None else kg.edge_config_from_dict(config.edge_config)
    # held-out records contribute structure but never their engagements
    graph = kg.build_graph(list(train) + [strip_labels(r) for part in others for r in part], edge_cfg)
    walks = kg.generate_walks(graph, config.walk_params())
    ep = config.embedding_params()
    table = kg.train_embeddings(walks, ep.dimension, ep.window, ep.negatives, ep.epochs,
                                ep.learning_rate, seed=config.seed + 3)
    if cached is not None:
        table.save(cached)
        return kg.EmbeddingTable.load(cached)  # identical values whether cached or fresh
    return table


def _d2(train, others, config, cache, digests, ctx: FeatureContext) -> list[FeatureBlock]:
    if ctx.embeddings is None:
        ctx.embeddings = build_embeddings(train, others, config, cache, digests)
    table = ctx.embeddings
    key = _key("d2", digests, hashlib.sha256(table.vectors.tobytes()).hexdigest(), [str(k) for k in table.keys[:5]])
    return cache.blocks(f"d2-{key}", 1 + len(others),
                        lambda: [kg.embed_records(table, part) for part in [train, *others]])


def _d3(train, others, config, cache, digests, ctx: FeatureContext) -> list[FeatureBlock]:
    if config.sentiment_precomputed:
        if ctx.precomputed is None:
            path = Path(config.sentiment_precomputed)
            if not path.exists():
                raise MissingArtifactError(str(path), "sentiment_precomputed in config")
            ctx.precomputed = sentiment.load_precomputed(path)
        return [sentiment.precomputed_block(part, ctx.precomputed) for part in [train, *others]]
    if config.sentiment_lexicon:
        if ctx.lexicon is None:
            path = Path(config.sentiment_lexicon)
            if not path.exists():
                raise MissingArtifactError(str(path), "sentiment_lexicon in config")
            ctx.lexicon = sentiment.read_lexicon(path)
        english = set(config.english_languages)
        return [sentiment.lexicon_block(part, ctx.lexicon, english) for part in [train, *others]]
    raise MissingArtifactError("sentiment scores", "set sentiment_lexicon or sentiment_precomputed")


def _content_models(train, config: PipelineConfig, cache: Cache, digest: str) -> content.ContentModels:
    params = config.content_params()
    path = cache.path(f"content-{_key('content', digest, asdict(params))}.json")
    if path is not None and path.exists():
        return content.ContentModels.load(path)
    models = content.fit_content(train, params)
    if path is not None:
        models.save(path)
        return content.ContentModels.load(path)
    return models


def _d4(train, others, config, cache, digests, ctx: FeatureContext, train_rows: bool) -> list[FeatureBlock]:
    params = config.content_params()
    if ctx.content_models is None:
        ctx.content_models = _content_models(train, config, cache, digests[0])
    models = ctx.content_models
    key = _key("d4", digests, asdict(params), config.content_folds, train_rows)

    def compute():
        out = [models.score(part) for part in others]
        if train_rows:
            first = (content.out_of_fold_scores(train, config.content_folds, params)
                     if config.content_folds else models.score(train))
        else:
            first = FeatureBlock("d4", list(content.D4_COLUMNS), np.zeros((0, 4)))
        return [first, *out]
    return cache.blocks(f"d4-{key}", 1 + len(others), compute)


def feature_blocks(groups: Sequence[str], train: Sequence[EngagementRecord],
                   others: Sequence[Sequence[EngagementRecord]], config: PipelineConfig,
                   cache: Cache, ctx: FeatureContext | None = None,
                   train_rows: bool = True) -> tuple[list[dict[str, FeatureBlock]], FeatureContext]:
    """Blocks for ``train`` and each list in ``others``, per requested group.

    ``train`` is the history: counters see it, the graph is built from it and
    the content models are fit on it. With ``train_rows=False`` the (costly)
    out-of-fold scores for the training rows are skipped.
    """
    ctx = ctx or FeatureContext()
    groups = sorted({normalize_group(g) for g in groups})
    digests = [records_digest(train)] + [records_digest(p) for p in others]
    jobs = {
        "d1": lambda: _d1(train, others, config, cache, digests),
        "d2": lambda: _d2(train, others, config, cache, digests, ctx),
        "d3": lambda: _d3(train, others, config, cache, digests, ctx),
        "d4": lambda: _d4(train, others, config, cache, digests, ctx, train_rows),
    }
    if config.threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=min(config.threads, len(groups))) as pool:
            futures = {g: pool.submit(jobs[g]) for g in groups}
            results = {g: f.result() for g, f in futures.items()}
    else:
        results = {g: jobs[g]() for g in groups}
    parts = [{g: results[g][i] for g in groups} for i in range(1 + len(others))]
    return parts, ctx


# ---------------------------------------------------------------- training / scoring

@dataclass
class TrainedModels:
    groups: tuple[str, ...]
    models: dict[EngagementType, GbdtModel]
    fallback: dict[EngagementType, float]  # constant rate for types without a model
    baseline_rates: dict[EngagementType, float]

    def predict(self, features: FeatureMatrix) -> dict[EngagementType, np.ndarray]:
        out = {}
        for e in ENGAGEMENTS:
            if e in self.models:
                out[e] = predict(self.models[e], features)
            else:
                out[e] = np.full(features.n_rows, self.fallback[e])
        return out


def train_models(train: FeatureMatrix, config: PipelineConfig,
                 engagements: Sequence[EngagementType] = ENGAGEMENTS) -> TrainedModels:
    hp = config.gbdt_params()
    rates = {e: float(train.labels[e].mean()) if train.n_rows else 0.0 for e in ENGAGEMENTS}
    fit_idx = np.arange(train.n_rows)
    valid = None
    if config.early_stopping_fraction > 0:
        rng = np.random.default_rng(config.seed + 6)
        held = rng.random(train.n_rows) < config.early_stopping_fraction
        if held.any() and (~held).any():
            fit_idx = np.flatnonzero(~held)
            valid = train.take(np.flatnonzero(held))
    fit = train.take(fit_idx)

    def one(e: EngagementType) -> GbdtModel | None:
        y = fit.labels[e]
        if len(y) == 0 or y.min() == y.max():
            log.warning("no %s model: training labels hold a single class", e.label)
            return None
        v = valid if valid is not None and 0 < valid.labels[e].sum() < valid.n_rows else None
        return train_gbdt(fit, e, hp, v)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            fitted = dict(zip(engagements, pool.map(one, engagements)))
    else:
        fitted = {e: one(e) for e in engagements}
    models = {e: m for e, m in fitted.items() if m is not None}
    eps = 1e-6
    fallback = {e: min(max(rates[e], eps), 1 - eps) for e in ENGAGEMENTS}
    return TrainedModels(tuple(train.groups), models, fallback, rates)


def evaluate_predictions(predictions: Mapping[EngagementType, np.ndarray],
                         labels: Mapping[EngagementType, np.ndarray],
                         baseline_rates: Mapping[EngagementType, float],
                         interpolation: str = "step") -> MetricReport:
    """Metric report over the types whose labels and baselines allow it."""
    usable = {}
    for e, p in predictions.items():
        y = labels[e]
        if not 0 < y.sum() < len(y) or not 0 < baseline_rates[e] < 1:
            log.warning("skipping %s metrics: single-class labels", e.label)
            continue
        usable[e] = p
    return report(usable, labels, baseline_rates, interpolation)


@dataclass
class RunResult:
    report: MetricReport | None
    trained: TrainedModels
    predictions: dict[EngagementType, np.ndarray]
    records: list[EngagementRecord]  # the scored records, aligned with predictions
    context: FeatureContext


def run_experiment(groups: Sequence[str], train: Sequence[EngagementRecord],
                   dev: Sequence[EngagementRecord], config: PipelineConfig,
                   cache: Cache | None = None, evaluate: bool = True) -> RunResult:
    """Featurize, train one model per engagement type on ``train``, score ``dev``."""
    cache = cache or Cache(None)
    (tr_blocks, dv_blocks), ctx = feature_blocks(groups, train, [dev], config, cache)
    Mtr = assemble(train, tr_blocks)
    Mdv = assemble(dev, dv_blocks)
    trained = train_models(Mtr, config)
    preds = trained.predict(Mdv)
    rep = evaluate_predictions(preds, Mdv.labels, trained.baseline_rates, config.interpolation) if evaluate else None
    return RunResult(rep, trained, preds, list(dev), ctx)


# ---------------------------------------------------------------- artifacts

def write_predictions(records: Sequence[EngagementRecord], predictions: Mapping[EngagementType, np.ndarray],
                      path: str | Path) -> None:
    cols = [predictions[e] for e in ENGAGEMENTS]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(PREDICTION_COLUMNS) + "\n")
        for i, r in enumerate(records):
            fh.write(f"{r.tweet_id}\t{r.reader.user_id}\t" + "\t".join(repr(float(c[i])) for c in cols) + "\n")


def read_predictions(path: str | Path) -> tuple[list[tuple[str, str]], dict[EngagementType, np.ndarray]]:
    keys, rows = [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != PREDICTION_COLUMNS:
            raise PipelineError(f"{path}: unexpected header {header}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(PREDICTION_COLUMNS):
                raise PipelineError(f"{path}:{lineno}: expected {len(PREDICTION_COLUMNS)} fields")
            keys.append((parts[0], parts[1]))
            try:
                rows.append([float(x) for x in parts[2:]])
            except ValueError:
                raise PipelineError(f"{path}:{lineno}: probabilities must be numbers") from None
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), 4)
    return keys, {e: arr[:, i] for i, e in enumerate(ENGAGEMENTS)}


def save_trained(trained: TrainedModels, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for e, m in trained.models.items():
        m.save(directory / f"{e.label}.json")
        write_training_curve(m.train_logloss, m.valid_logloss, directory / f"{e.label}_curve.csv")
    meta = {
        "groups": list(trained.groups),
        "fallback": {e.label: v for e, v in trained.fallback.items()},
        "baseline_rates": {e.label: v for e, v in trained.baseline_rates.items()},
        "models": sorted(e.label for e in trained.models),
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def load_trained(directory: str | Path) -> TrainedModels:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise MissingArtifactError(str(meta_path), "train a model first")
    meta = json.loads(meta_path.read_text())
    models = {EngagementType.parse(n): GbdtModel.load(directory / f"{n}.json") for n in meta["models"]}
    return TrainedModels(tuple(meta["groups"]), models,
                         {EngagementType.parse(k): v for k, v in meta["fallback"].items()},
                         {EngagementType.parse(k): v for k, v in meta["baseline_rates"].items()})


def save_report(rep: MetricReport, directory: str | Path, name: str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rep.save(directory / "report.json")
    (directory / "report.txt").write_text(rep.render(name))


# ---------------------------------------------------------------- stages and presets

def load_input(config: PipelineConfig) -> list[EngagementRecord]:
    if config.input is None:
        raise MissingArtifactError("input TSV", "set input in the config or pass --input")
    path = Path(config.input)
    if not path.exists():
        raise MissingArtifactError(str(path), "input TSV")
    return ingest.read_tsv(path)


def stage_data(stage: int, records: Sequence[EngagementRecord],
               config: PipelineConfig) -> tuple[list[EngagementRecord], list[EngagementRecord]]:
    """Train/dev records for stages 1 and 2 (subsample, then split)."""
    rng = np.random.default_rng(config.seed + 1)
    n = len(records)
    if stage == 1:
        k = min(config.stage1_sample_size, n)
    elif stage == 2:
        k = int(round(config.stage2_fraction * n))
    else:
        raise ValueError(f"stage {stage} has no train/dev split")
    rows = np.sort(rng.choice(n, size=k, replace=False)) if k < n else np.arange(n)
    subset = [records[i] for i in rows]
    return ingest.split(subset, config.split_ratio, config.split_mode, config.seed)


def _workdir(config: PipelineConfig) -> Path:
    wd = Path(config.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def run_stage(stage: int, config: PipelineConfig) -> MetricReport | None:
    """Run one development stage and write its artifacts under ``<workdir>/stage<N>``.

    Stages 1 and 2 evaluate on a dev split; stage 3 trains on the whole
    input and writes predictions for the unlabeled holdout file.
    """
    if stage not in (1, 2, 3):
        raise ValueError(f"stage must be 1, 2 or 3, got {stage}")
    wd = _workdir(config)
    out = wd / f"stage{stage}"
    if out.exists():
        shutil.rmtree(out)
    out.mkdir(parents=True)
    cache = Cache(wd / "cache")
    groups = preset_groups(config.preset)
    records = load_input(config)
    if stage == 3:
        if config.holdout is None:
            raise MissingArtifactError("holdout TSV", "stage 3 needs holdout in the config")
        hpath = Path(config.holdout)
        if not hpath.exists():
            raise MissingArtifactError(str(hpath), "holdout TSV")
        holdout = [strip_labels(r) for r in ingest.read_tsv(hpath)]
        result = run_experiment(groups, records, holdout, config, cache, evaluate=False)
        save_trained(result.trained, out / "models")
        write_predictions(holdout, result.predictions, out / "predictions.tsv")
        return None
    train, dev = stage_data(stage, records, config)
    log.info("stage %d: %d train, %d dev records", stage, len(train), len(dev))
    result = run_experiment(groups, train, dev, config, cache)
    save_trained(result.trained, out / "models")
    write_predictions(dev, result.predictions, out / "predictions.tsv")
    save_report(result.report, out, f"Model {config.preset}")
    return result.report


def run_model(preset: int, config: PipelineConfig,
              records: Sequence[EngagementRecord] | None = None) -> MetricReport:
    """Train and evaluate one preset on a train/dev split of the full input."""
    groups = preset_groups(preset)
    wd = _workdir(config)
    cache = Cache(wd / "cache")
    records = list(records) if records is not None else load_input(config)
    train, dev = ingest.split(records, config.split_ratio, config.split_mode, config.seed)
    result = run_experiment(groups, train, dev, config, cache)
    out = wd / f"model{preset}"
    save_trained(result.trained, out / "models")
    write_predictions(dev, result.predictions, out / "predictions.tsv")
    save_report(result.report, out, f"Model {preset}")
    return result.report
