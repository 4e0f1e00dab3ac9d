"""Command-line entry point: ``tweetengage <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import content, ingest, kg, pipeline, sentiment, synthgen, transfeat
from .blocks import save_block
from .ensemble import ablate, assemble, grid_search, normalize_group, preset_groups
from .evaluation import MetricReport, write_pr_points
from .records import ENGAGEMENTS, EngagementType
from .reportfmt import compare

log = logging.getLogger("tweetengage")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _write_json(payload, path: str | Path | None) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _config(args) -> pipeline.PipelineConfig:
    try:
        cfg = pipeline.PipelineConfig.from_json(args.config) if args.config else pipeline.PipelineConfig()
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.workdir is not None:
            overrides["workdir"] = args.workdir
        if args.threads is not None:
            overrides["threads"] = args.threads
        for name in ("input", "holdout", "preset"):
            if getattr(args, name, None) is not None:
                overrides[name] = getattr(args, name)
        return replace(cfg, **overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None


def _groups(text: str | None, default) -> tuple[str, ...]:
    if text is None:
        return tuple(default)
    try:
        return tuple(sorted({normalize_group(g) for g in text.split(",") if g.strip()}))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- subcommands

def cmd_generate(args, cfg):
    gen = synthgen.GenConfig.from_json(args.gen_config) if args.gen_config else synthgen.GenConfig()
    changes = {"seed": cfg.seed}
    if args.n_records is not None:
        changes["n_records"] = args.n_records
        changes["n_tweets"] = min(gen.n_tweets, args.n_records)
    gen = synthgen.GenConfig.from_dict({**gen.to_dict(), **changes})
    records, truth = synthgen.generate(gen)
    synthgen.write_tsv(records, args.out)
    if args.truth:
        np.save(args.truth, truth.probabilities)
    if args.lexicon:
        sentiment.write_lexicon(synthgen.make_lexicon(gen), args.lexicon)
    log.info("wrote %d records to %s", len(records), args.out)


def cmd_stats(args, cfg):
    stats = ingest.dataset_stats(ingest.parse_tsv(args.input, strict=not args.lenient))
    _write_json(stats.to_dict(), args.out)


def cmd_features(args, cfg):
    records = ingest.read_tsv(args.input)
    save_block(transfeat.augment(records, args.per_type_pairs or cfg.per_type_pairs), args.out)


def cmd_kg_build(args, cfg):
    records = ingest.read_tsv(args.input)
    edge_cfg = None if cfg.edge_config is None else kg.edge_config_from_dict(cfg.edge_config)
    graph = kg.build_graph(records, edge_cfg)
    graph.write_edge_list(args.out)
    log.info("graph: %d nodes, %d edges", len(graph), graph.edge_count())


def cmd_kg_embed(args, cfg):
    if not Path(args.edges).exists():
        raise pipeline.MissingArtifactError(args.edges, "edge list from kg-build")
    graph = kg.TypedGraph.read_edge_list(args.edges)
    walks = kg.generate_walks(graph, cfg.walk_params())
    ep = cfg.embedding_params()
    table = kg.train_embeddings(walks, ep.dimension, ep.window, ep.negatives, ep.epochs,
                                ep.learning_rate, seed=cfg.seed + 3)
    table.save(args.out)
    if args.losses:
        Path(args.losses).write_text("".join(f"{i + 1},{float(v)!r}\n" for i, v in enumerate(table.losses)))


def cmd_sentiment(args, cfg):
    records = ingest.read_tsv(args.input)
    lexicon_path = args.lexicon or cfg.sentiment_lexicon
    precomputed = args.precomputed or cfg.sentiment_precomputed
    if precomputed:
        block = sentiment.precomputed_block(records, sentiment.load_precomputed(precomputed))
    elif lexicon_path:
        block = sentiment.lexicon_block(records, sentiment.read_lexicon(lexicon_path), set(cfg.english_languages))
    else:
        raise UsageError("sentiment needs --lexicon or --precomputed")
    save_block(block, args.out)


def cmd_tfidf(args, cfg):
    train = ingest.read_tsv(args.train)
    models = content.fit_content(train, cfg.content_params())
    models.save(args.out)
    if args.score:
        if not args.block:
            raise UsageError("--score needs --block")
        save_block(models.score(ingest.read_tsv(args.score)), args.block)


def cmd_train(args, cfg):
    train = ingest.read_tsv(args.train)
    groups = _groups(args.groups, preset_groups(cfg.preset))
    cache = pipeline.Cache(Path(cfg.workdir) / "cache")
    (blocks,), ctx = pipeline.feature_blocks(groups, train, [], cfg, cache)
    trained = pipeline.train_models(assemble(train, blocks), cfg)
    out = Path(args.out)
    if out.exists():
        shutil.rmtree(out)
    pipeline.save_trained(trained, out)
    # everything predict needs to featurize new records the same way
    shutil.copyfile(args.train, out / "history.tsv")
    _write_json(cfg.to_dict(), out / "config.json")
    if ctx.embeddings is not None:
        ctx.embeddings.save(out / "embeddings.txt")
    if ctx.content_models is not None:
        ctx.content_models.save(out / "content.json")


def _load_bundle(directory: str) -> tuple[pipeline.TrainedModels, pipeline.PipelineConfig, pipeline.FeatureContext, list]:
    d = Path(directory)
    trained = pipeline.load_trained(d)
    for name in ("config.json", "history.tsv"):
        if not (d / name).exists():
            raise pipeline.MissingArtifactError(str(d / name), "model directory from the train subcommand")
    cfg = pipeline.PipelineConfig.from_json(d / "config.json")
    ctx = pipeline.FeatureContext()
    if "d2" in trained.groups:
        if not (d / "embeddings.txt").exists():
            raise pipeline.MissingArtifactError(str(d / "embeddings.txt"))
        ctx.embeddings = kg.EmbeddingTable.load(d / "embeddings.txt")
    if "d4" in trained.groups:
        if not (d / "content.json").exists():
            raise pipeline.MissingArtifactError(str(d / "content.json"))
        ctx.content_models = content.ContentModels.load(d / "content.json")
    return trained, cfg, ctx, ingest.read_tsv(d / "history.tsv")


def cmd_predict(args, cfg):
    trained, bcfg, ctx, history = _load_bundle(args.model)
    bcfg = replace(bcfg, workdir=cfg.workdir, threads=cfg.threads)
    records = ingest.read_tsv(args.input)
    (_, blocks), _ = pipeline.feature_blocks(trained.groups, history, [records], bcfg,
                                             pipeline.Cache(Path(cfg.workdir) / "cache"), ctx,
                                             train_rows=False)
    preds = trained.predict(assemble(records, blocks))
    pipeline.write_predictions(records, preds, args.out)


def cmd_evaluate(args, cfg):
    keys, preds = pipeline.read_predictions(args.predictions)
    records = ingest.read_tsv(args.labels)
    if [(r.tweet_id, r.reader.user_id) for r in records] != keys:
        raise pipeline.PipelineError("predictions and labels do not list the same (tweet, reader) rows in order")
    if args.model:
        rates = pipeline.load_trained(args.model).baseline_rates
    elif args.baseline_from:
        train = ingest.read_tsv(args.baseline_from)
        rates = {e: float(np.mean([r.label(e) for r in train])) for e in ENGAGEMENTS}
    else:
        raise UsageError("evaluate needs --model or --baseline-from for the training positive rates")
    labels = {e: np.array([r.label(e) for r in records]) for e in ENGAGEMENTS}
    rep = pipeline.evaluate_predictions(preds, labels, rates, args.interpolation or cfg.interpolation)
    out = Path(args.out)
    pipeline.save_report(rep, out, args.name)
    for e in rep.per_type:
        write_pr_points(preds[e], labels[e], out / f"pr_{e.label}.csv")
    sys.stdout.write(rep.render(args.name))


def _matrices(args, cfg, groups):
    train = ingest.read_tsv(args.train)
    dev = ingest.read_tsv(args.dev)
    cache = pipeline.Cache(Path(cfg.workdir) / "cache")
    (tb, db), _ = pipeline.feature_blocks(groups, train, [dev], cfg, cache)
    return assemble(train, tb), assemble(dev, db)


def cmd_ablate(args, cfg):
    groups = _groups(args.groups, ("d1", "d2", "d3", "d4"))
    tr, dv = _matrices(args, cfg, groups)
    result = ablate(tr, dv, EngagementType.parse(args.engagement), cfg.gbdt_params(), groups)
    _write_json(result.to_dict(), args.out)


def cmd_gridsearch(args, cfg):
    groups = _groups(args.groups, preset_groups(cfg.preset))
    try:
        grid = json.loads(Path(args.grid).read_text())
    except FileNotFoundError:
        raise pipeline.MissingArtifactError(args.grid, "grid JSON") from None
    tr, dv = _matrices(args, cfg, groups)
    result = grid_search(tr, dv, EngagementType.parse(args.engagement), grid, cfg.gbdt_params())
    _write_json(result.to_dict(), args.out)


def cmd_stage(args, cfg):
    rep = pipeline.run_stage(args.stage, cfg)
    if rep is not None:
        sys.stdout.write(rep.render(f"Model {cfg.preset}"))


def cmd_model(args, cfg):
    records = pipeline.load_input(cfg)
    reports: dict[str, MetricReport] = {}
    for preset in args.presets:
        reports[f"Model {preset}"] = pipeline.run_model(preset, cfg, records)
    name = "-".join(str(p) for p in args.presets)
    table, _ = compare(reports, Path(cfg.workdir) / f"compare-{name}.json")
    (Path(cfg.workdir) / f"compare-{name}.txt").write_text(table)
    sys.stdout.write(table)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--workdir", help="directory for caches and stage outputs")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--log-level", help="logging level (default WARNING)")

    parser = _Parser(prog="tweetengage", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "write a synthetic engagement log")
    p.add_argument("--out", required=True)
    p.add_argument("--gen-config", help="generator config JSON")
    p.add_argument("--n-records", type=int)
    p.add_argument("--truth", help="save true probabilities (.npy)")
    p.add_argument("--lexicon", help="also write a polarity lexicon for the sentiment group")

    p = add("stats", cmd_stats, "dataset statistics as JSON")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--lenient", action="store_true", help="skip malformed lines instead of failing")

    p = add("features", cmd_features, "point-in-time counter features (group D1)")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="block path stem")
    p.add_argument("--per-type-pairs", action="store_true")

    p = add("kg-build", cmd_kg_build, "build the typed graph and write its edge list")
    p.add_argument("input")
    p.add_argument("--out", required=True)

    p = add("kg-embed", cmd_kg_embed, "random walks plus skip-gram embeddings from an edge list")
    p.add_argument("edges")
    p.add_argument("--out", required=True)
    p.add_argument("--losses", help="CSV of per-epoch training loss")

    p = add("sentiment", cmd_sentiment, "sentiment feature group (D3)")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--precomputed")

    p = add("tfidf", cmd_tfidf, "fit TF-IDF content models (D4)")
    p.add_argument("train")
    p.add_argument("--out", required=True)
    p.add_argument("--score", help="records to score with the fitted models")
    p.add_argument("--block", help="output block stem for --score")

    p = add("train", cmd_train, "train one boosted model per engagement type")
    p.add_argument("train")
    p.add_argument("--out", required=True, help="model directory")
    p.add_argument("--preset", type=int)
    p.add_argument("--groups", help="comma-separated groups, overrides the preset")

    p = add("predict", cmd_predict, "write engagement probabilities for records")
    p.add_argument("input")
    p.add_argument("--model", required=True, help="directory written by train")
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "PRAUC and RCE of a predictions file")
    p.add_argument("predictions")
    p.add_argument("--labels", required=True, help="labeled TSV aligned with the predictions")
    p.add_argument("--model", help="model directory (supplies training positive rates)")
    p.add_argument("--baseline-from", help="training TSV for the baseline positive rates")
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="model")
    p.add_argument("--interpolation", choices=("step", "trapezoid"))

    for name, func, text in (("ablate", cmd_ablate, "evaluate all feature-group subsets"),
                             ("gridsearch", cmd_gridsearch, "exhaustive hyperparameter search")):
        p = add(name, func, text)
        p.add_argument("train")
        p.add_argument("dev")
        p.add_argument("--engagement", required=True, choices=[e.label for e in ENGAGEMENTS])
        p.add_argument("--groups")
        p.add_argument("--out")
        if name == "gridsearch":
            p.add_argument("--grid", required=True, help="JSON mapping parameter -> list of values")
            p.add_argument("--preset", type=int)

    p = add("stage", cmd_stage, "run development stage 1, 2 or 3")
    p.add_argument("stage", type=int, choices=(1, 2, 3))
    p.add_argument("--input")
    p.add_argument("--holdout")
    p.add_argument("--preset", type=int)

    p = add("model", cmd_model, "train and compare model presets 1-4")
    p.add_argument("presets", type=int, nargs="+", choices=(1, 2, 3, 4))
    p.add_argument("--input")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for name in ("config", "seed", "workdir", "threads"):
            if not hasattr(args, name):
                setattr(args, name, None)
        logging.basicConfig(level=getattr(args, "log_level", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        args.func(args, cfg)
        return EXIT_OK
    except UsageError as exc:
        print(f"tweetengage: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ingest.IngestError, pipeline.PipelineError, ValueError, KeyError, OSError) as exc:
        where = f"{exc.path}: " if getattr(exc, "path", None) and isinstance(exc, ingest.IngestError) else ""
        print(f"tweetengage: error: {where}{exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("internal error")
        print(f"tweetengage: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
