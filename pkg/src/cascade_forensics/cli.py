"""Command-line pipeline: one subcommand per stage, artifacts under ``--out``.

Each stage writes ``<out>/<stage>/`` plus a ``manifest.json`` holding the
content hashes of its inputs (raw files and upstream manifests), a digest of
the config keys it reads, and the seed.  A stage whose manifest still matches
is skipped unless ``--force`` is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import Counter
from contextlib import nullcontext
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import artifacts as art
from .artifacts import MissingUpstream
from .cascades import (Label, build_tree, cascade_corpus_stats, cascades_from_json, cascades_to_json,
                       propagation_metrics, reconstruct, restrict_to_accounts, subsample_for_training, write_curve)
from .config import ConfigError, PipelineConfig, load_config
from .ingest import parse_tweet_stream, read_records, write_records

logger = logging.getLogger("cascade_forensics")

STAGE_ORDER = ("ingest", "cascades", "label", "train", "infer", "metrics", "topics", "leaning", "cohort", "rdd")


@dataclass
class Stage:
    name: str
    run: Callable[[PipelineConfig, Path, Path], dict]
    upstream: tuple[str, ...]
    inputs: tuple[str, ...]
    keys: tuple[str, ...]


# ---------------------------------------------------------------- helpers

def _need(root: Path, stage: str, required: str, name: str) -> Path:
    path = root / required / name
    if not (root / required / art.MANIFEST).exists() or not path.exists():
        raise MissingUpstream(stage, required, path)
    return path


def _records(root: Path, stage: str):
    return read_records(_need(root, stage, "ingest", "records.jsonl"))


def _cascades(root: Path, stage: str, source: str = "label"):
    recs = _records(root, stage)
    index = {r.tweet_id: r for r in recs}
    rows = art.read_json(_need(root, stage, source, "cascades.json"))
    return recs, cascades_from_json(rows, index)


def _csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- stages

def stage_ingest(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    records, stats = parse_tweet_stream(cfg.require("records"))
    write_records(records, out / "records.jsonl")
    art.write_json(stats.to_json(), out / "stats.json")
    return {"records": stats.n_records, "skipped": stats.n_skipped}


def stage_cascades(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    recs = _records(root, "cascades")
    forest = reconstruct(recs)
    art.write_json(cascades_to_json(forest.cascades), out / "cascades.json")
    art.write_json(forest.quarantined, out / "quarantined.json")
    return {"cascades": len(forest.cascades), "quarantined": len(forest.quarantined)}


def stage_label(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    from .labeling import label_cascades, load_source_lists

    recs, cascades = _cascades(root, "label", "cascades")
    sources = load_source_lists(cfg.require("reliable"), cfg.require("unreliable"))
    labeled, counts = label_cascades(cascades, sources)
    art.write_json(cascades_to_json(labeled), out / "cascades.json")
    rows = []
    for lab in Label:
        group = [c for c in labeled if c.label is lab]
        if group:
            s = cascade_corpus_stats(group)
            rows.append([lab.value, s.n_cascades, repr(s.avg_size), repr(s.avg_duration_hours), repr(s.avg_gap_hours)])
    _csv(out / "corpus_stats.csv", ["label", "n_cascades", "avg_size", "avg_duration_hours", "avg_gap_hours"], rows)
    art.write_json({"counts": counts, "source_list": sources.counts()}, out / "counts.json")
    return counts


def _training_items(cfg: PipelineConfig, cascades, table, accounts=None):
    from .detector.features import prepare

    if accounts is None:
        sub = subsample_for_training([c for c in cascades if c.label is not Label.UNLABELED],
                                     cfg.min_cascade_size, cfg.top_k_accounts)
        accounts, kept = sub.accounts, sub.cascades
    else:
        kept = [c for c in cascades if c.size >= cfg.min_cascade_size]
    items = [prepare(restrict_to_accounts(c, accounts), table, cfg.detector.max_events) for c in kept]
    return items, accounts


def stage_train(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    from .detector.checkpoint import save_model
    from .detector.evaluation import cross_validate, write_fold_reports
    from .topics import load_embeddings

    _, cascades = _cascades(root, "train")
    table = load_embeddings(cfg.require("embeddings"))
    items, accounts = _training_items(cfg, cascades, table)
    if not items:
        raise ValueError("no labeled cascades survive the subsampling rule")
    detector = replace(cfg.detector, seed=cfg.seed + cfg.detector.seed)
    reports, models = cross_validate(items, cfg.folds, detector)
    write_fold_reports(reports, out / "folds.csv")
    for f, m in enumerate(models):
        save_model(m, out / f"model_fold{f}.txt")
    art.write_json({"accounts": sorted(accounts), "cascades": [it.cascade_id for it in items]},
                   out / "subsample.json")
    return {"folds": len(models), "mean_auc": float(np.mean([r.auc for r in reports])), "n_train": len(items)}


def stage_infer(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    from .detector.checkpoint import load_model
    from .detector.evaluation import infer_with_margins, write_predictions
    from .topics import load_embeddings

    _, cascades = _cascades(root, "infer")
    sub = art.read_json(_need(root, "infer", "train", "subsample.json"))
    models = [load_model(p) for p in sorted((root / "train").glob("model_fold*.txt"))]
    if not models:
        raise MissingUpstream("infer", "train", root / "train" / "model_fold0.txt")
    table = load_embeddings(cfg.require("embeddings"))
    unlabeled = [c for c in cascades if c.label is Label.UNLABELED]
    items, _ = _training_items(cfg, unlabeled, table, frozenset(sub["accounts"]))
    counts = {"Unreliable": 0, "Reliable": 0, "Abstain": 0}
    preds = []
    if items:
        unrel, rel, abstain, preds = infer_with_margins(models, items, cfg.keep_fraction)
        counts = {"Unreliable": len(unrel), "Reliable": len(rel), "Abstain": len(abstain)}
    write_predictions(preds, out / "predictions.csv")
    art.write_json(counts, out / "counts.json")
    return counts


def _groups(root: Path, stage: str):
    recs, cascades = _cascades(root, stage)
    decided = {r["cascade_id"]: r["decision"] for r in _read_csv(_need(root, stage, "infer", "predictions.csv"))}
    groups = {
        "labeled_unreliable": [c for c in cascades if c.label is Label.UNRELIABLE],
        "labeled_reliable": [c for c in cascades if c.label is Label.RELIABLE],
    }
    groups["unreliable"] = groups["labeled_unreliable"] + [c for c in cascades if decided.get(c.cascade_id) == "Unreliable"]
    groups["reliable"] = groups["labeled_reliable"] + [c for c in cascades if decided.get(c.cascade_id) == "Reliable"]
    return recs, groups


def stage_metrics(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    _, groups = _groups(root, "metrics")
    sizes = {}
    for name in sorted(groups):
        if not groups[name]:
            continue
        m = propagation_metrics(groups[name], name, [build_tree(c) for c in groups[name]])
        for curve, data in m.curves().items():
            write_curve(data, out / f"{name}__{curve}.csv")
        sizes[name] = len(groups[name])
    art.write_json(sizes, out / "groups.json")
    return sizes


def stage_topics(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    from .topics import cluster_topics, embed_corpus, load_embeddings, summarize_topics, write_diagnostics, write_summaries

    _, groups = _groups(root, "topics")
    table = load_embeddings(cfg.require("embeddings"))
    roots = sorted([(c.cascade_id, c.root.text) for c in groups["unreliable"]])
    corpus = embed_corpus(roots, table)
    model = cluster_topics(corpus.vectors, cfg.k_min, cfg.k_max, cfg.seed, cfg.topic_restarts, cfg.silhouette_sample)
    write_diagnostics(model, out / "diagnostics.csv")
    summaries = summarize_topics(model, corpus, cfg.top_words, cfg.top_tweets, cfg.topic_discard, cfg.topic_merge)
    write_summaries(summaries, out / "topics.csv")
    _csv(out / "assignments.csv", ["cascade_id", "cluster_id"], zip(corpus.ids, (int(c) for c in model.labels)))
    art.write_json(corpus.excluded, out / "excluded.json")
    return {"k": model.k, "n": len(corpus.ids)}


def stage_leaning(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    from .leaning import (build_retweet_graph, compute_seed_labels, evaluate_leanings, infer_leanings,
                          label_propagation_baseline, load_outlet_table, read_side_labels, write_assignment,
                          write_error_table)

    recs = _records(root, "leaning")
    outlets = load_outlet_table(cfg.require("outlets"))
    seeds = compute_seed_labels(recs, outlets, cfg.min_seed_urls, cfg.min_seed_share)
    _csv(out / "seeds.csv", ["account_id", "n_left", "n_right", "score"],
         [(s.account_id, s.n_left, s.n_right, repr(float(s.score))) for s in seeds])
    graph = build_retweet_graph(recs, cfg.min_appearances)
    if not graph.nodes:
        raise ValueError(f"no account reaches {cfg.min_appearances} records; retweet graph is empty")
    _csv(out / "edges.csv", ["u", "v", "weight"], [(u, v, w) for (u, v), w in graph.weights.items()])
    louvain = infer_leanings(graph, seeds, cfg.seed)
    write_assignment(louvain, out / "assignment.csv")
    lp = label_propagation_baseline(graph, seeds, cfg.lp_max_iter)
    write_assignment(lp, out / "lp_assignment.csv")
    extra = {}
    for key in ("profile_labels", "manual_labels"):
        if getattr(cfg, key):
            extra[key.replace("_labels", "")] = read_side_labels(cfg.require(key))
    rows = evaluate_leanings(graph, seeds, louvain.community, extra, cfg.folds, cfg.seed, cfg.lp_max_iter)
    write_error_table(rows, out / "evaluation.csv")
    summary = {"seeds": len(seeds), "nodes": len(graph.nodes), "edges": len(graph.weights),
               "modularity": louvain.modularity, "louvain": louvain.counts(), "label_propagation": lp.counts(),
               "coverage": louvain.coverage()}
    art.write_json(summary, out / "summary.json")
    return summary


def stage_cohort(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    from .cohort import (cohort_timelines, engagement_breakdown, identify_cohort, interaction_partition,
                         load_keywords, random_partitions, write_breakdown, write_partition, write_timelines)
    from .leaning import read_assignment

    recs = _records(root, "cohort")
    assignment = read_assignment(_need(root, "cohort", "leaning", "assignment.csv"))
    keywords = load_keywords(cfg.require("keywords"))
    res = identify_cohort(recs, keywords, assignment.labels)
    _csv(out / "cohort.csv", ["account_id"], [[a] for a in sorted(res.cohort)])
    universe = sorted({r.author_id for r in recs} | {r.parent_author_id for r in recs if r.parent_author_id})
    counts = interaction_partition(recs, res.cohort, universe)
    rand = random_partitions(recs, len(res.cohort), universe, cfg.random_draws, cfg.seed) if res.cohort else None
    write_partition(counts, rand, out / "partition.csv")
    write_breakdown(engagement_breakdown(recs, res.cohort, assignment.labels), out / "breakdown.csv",
                    out / "never_engaged.csv")
    tl = cohort_timelines(recs, res.cohort, keywords, cfg.intervention_date)
    write_timelines(tl, out)
    summary = {"stage1": len(res.stage1), "stage1_split": res.stage1_split, "cohort": len(res.cohort),
               "universe": len(universe), "new_account_share": tl.new_account_share}
    art.write_json(summary, out / "stages.json")
    return summary


def stage_rdd(cfg: PipelineConfig, root: Path, out: Path) -> dict:
    from .rdd import (build_hashtag_series, compare_degrees, fit_all, rank_hashtags, week_end_day, write_degree_table,
                      write_fits, write_ranked, write_scatter)

    recs = _records(root, "rdd")
    cohort = {r["account_id"] for r in _read_csv(_need(root, "rdd", "cohort", "cohort.csv"))}
    series, day0 = build_hashtag_series(recs, cohort, cfg.top_k_hashtags)
    x0 = cfg.rdd_x0_day if cfg.rdd_x0_day is not None else week_end_day(cfg.intervention_date) - day0
    run = fit_all(series, x0, cfg.rdd_degree, cfg.rdd_separate_slopes, day0)
    write_fits(run.fits, out / "fits.csv")
    declining, increasing = rank_hashtags(run.fits, cfg.rdd_p_max, cfg.rdd_top_n)
    write_ranked(declining, out / "declining.csv")
    write_ranked(increasing, out / "increasing.csv")
    rows = []
    for s in series:
        if s.hashtag in run.fits:
            try:
                rows += [(s.hashtag, f) for f in compare_degrees(s.x, s.y, x0)]
            except ValueError:
                continue
    write_degree_table(rows, out / "degrees.csv")
    write_scatter(series, run.fits, out / "scatter.csv")
    info = {"x0": int(x0), "day0": day0, "n_series": len(series), "n_fits": len(run.fits),
            "skipped": dict(sorted(run.skipped.items())), "declining": len(declining), "increasing": len(increasing)}
    art.write_json(info, out / "info.json")
    return {k: info[k] for k in ("x0", "n_series", "n_fits", "declining", "increasing")}


COMMON = ("seed",)
STAGES = {
    "ingest": Stage("ingest", stage_ingest, (), ("records",), ()),
    "cascades": Stage("cascades", stage_cascades, ("ingest",), (), ()),
    "label": Stage("label", stage_label, ("cascades",), ("reliable", "unreliable"), ()),
    "train": Stage("train", stage_train, ("label",), ("embeddings",),
                   ("min_cascade_size", "top_k_accounts", "folds", "detector")),
    "infer": Stage("infer", stage_infer, ("train",), ("embeddings",),
                   ("min_cascade_size", "keep_fraction", "detector")),
    "metrics": Stage("metrics", stage_metrics, ("infer",), (), ()),
    "topics": Stage("topics", stage_topics, ("infer",), ("embeddings",),
                    ("k_min", "k_max", "topic_restarts", "silhouette_sample", "top_words", "top_tweets",
                     "topic_discard", "topic_merge")),
    "leaning": Stage("leaning", stage_leaning, ("ingest",), ("outlets", "profile_labels", "manual_labels"),
                     ("min_appearances", "min_seed_urls", "min_seed_share", "lp_max_iter", "folds")),
    "cohort": Stage("cohort", stage_cohort, ("leaning",), ("keywords",), ("intervention_date", "random_draws")),
    "rdd": Stage("rdd", stage_rdd, ("cohort",), (),
                 ("intervention_date", "top_k_hashtags", "rdd_degree", "rdd_separate_slopes", "rdd_p_max",
                  "rdd_x0_day", "rdd_top_n")),
}
# data each stage reads beyond its direct upstream
INDIRECT = {"label": ("ingest",), "train": ("ingest",), "infer": ("ingest", "label"), "metrics": ("ingest", "label"),
            "topics": ("ingest", "label"), "cohort": ("ingest",), "rdd": ("ingest",)}


def run_stage(name: str, cfg: PipelineConfig, force: bool = False) -> dict:
    stage = STAGES[name]
    root = Path(cfg.out)
    inputs = {}
    for up in stage.upstream + INDIRECT.get(name, ()):
        mpath = root / up / art.MANIFEST
        if not mpath.exists():
            raise MissingUpstream(name, up, mpath)
        inputs[f"stage:{up}"] = art.sha256_file(mpath)
    for key in stage.inputs:
        if getattr(cfg, key) is not None:
            inputs[key] = art.sha256_file(cfg.require(key))
    expected = art.stage_manifest(name, inputs, cfg.digest(COMMON + stage.keys), cfg.seed)
    out = root / name
    if not force and art.is_fresh(out, expected):
        logger.info("%s: up to date, skipped", name)
        return {"stage": name, "cached": True}
    art.clear_stage(out)
    logger.info("%s: running", name)
    summary = stage.run(cfg, root, out)
    art.finish_stage(out, expected)
    return {"stage": name, "cached": False, **summary}


# ---------------------------------------------------------------- synth

def run_synth(kind: str, out_dir: Path, seed: int, params: dict) -> dict:
    from .synth.fixtures import FixtureSpec, generate_fixture, write_fixture

    spec = FixtureSpec(kind, params, seed)
    paths = write_fixture(generate_fixture(spec), out_dir, spec)
    return {"stage": "synth", "kind": kind, "files": sorted(p.name for p in paths)}


def _param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


# ---------------------------------------------------------------- argument parsing

OVERRIDES = [
    ("--records", "records", str), ("--reliable", "reliable", str), ("--unreliable", "unreliable", str),
    ("--outlets", "outlets", str), ("--keywords", "keywords", str), ("--embeddings", "embeddings", str),
    ("--profile-labels", "profile_labels", str), ("--manual-labels", "manual_labels", str),
    ("--intervention-date", "intervention_date", str), ("--keep-fraction", "keep_fraction", float),
    ("--min-cascade-size", "min_cascade_size", int), ("--top-k-accounts", "top_k_accounts", int),
    ("--folds", "folds", int), ("--min-appearances", "min_appearances", int),
    ("--top-k-hashtags", "top_k_hashtags", int), ("--rdd-degree", "rdd_degree", int),
    ("--x0-day", "rdd_x0_day", int), ("--p-max", "rdd_p_max", float), ("--k-min", "k_min", int),
    ("--k-max", "k_max", int), ("--topic-restarts", "topic_restarts", int),
]
DETECTOR_OVERRIDES = [("--epochs", "epochs", int), ("--hidden", "hidden", int), ("--user-dim", "user_dim", int),
                      ("--learning-rate", "learning_rate", float), ("--batch-size", "batch_size", int)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="artifact directory (synth: fixture directory)")
    common.add_argument("--threads", type=int, help="cap BLAS/OpenMP worker threads")
    common.add_argument("--seed", type=int)
    common.add_argument("--force", action="store_true", help="re-run even if the manifest matches")
    common.add_argument("-v", "--verbose", action="count", default=0)
    for flag, dest, typ in OVERRIDES + DETECTOR_OVERRIDES:
        common.add_argument(flag, dest=f"o_{dest}", type=typ)
    common.add_argument("--separate-slopes", dest="o_rdd_separate_slopes", action="store_true", default=None)

    p = argparse.ArgumentParser(prog="cascade-forensics", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in STAGE_ORDER:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    sub.add_parser("all", parents=[common], help="run every stage in order")
    sp = sub.add_parser("synth", parents=[common], help="write a synthetic fixture")
    sp.add_argument("--kind", default="world",
                    choices=["world", "cascade-forest", "planted-partition", "step-series", "blob-vectors",
                             "planted-signal"])
    sp.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=VALUE")
    return p


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    for _, dest, _ in OVERRIDES:
        v = getattr(args, f"o_{dest}")
        if v is not None:
            setattr(cfg, dest, str(Path(v).resolve()) if dest in ("records", "reliable", "unreliable", "outlets",
                                                                   "keywords", "embeddings", "profile_labels",
                                                                   "manual_labels") else v)
    if args.o_rdd_separate_slopes:
        cfg.rdd_separate_slopes = True
    for _, dest, _ in DETECTOR_OVERRIDES:
        v = getattr(args, f"o_{dest}")
        if v is not None:
            setattr(cfg.detector, dest, v)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = str(Path(args.out).resolve())
    cfg.validate()
    return cfg


def _fail(payload: dict, code: int) -> int:
    sys.stderr.write(json.dumps({"status": "error", **payload}, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2) if args.verbose else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        limiter = nullcontext()
        if args.threads:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=args.threads)
        with limiter:
            if args.command == "synth":
                out = Path(args.out or "fixture")
                result = run_synth(args.kind, out, args.seed or 0, dict(args.param))
                print(json.dumps(result, sort_keys=True))
                return 0
            cfg = resolve_config(args)
            names = STAGE_ORDER if args.command == "all" else (args.command,)
            for name in names:
                print(json.dumps(run_stage(name, cfg, args.force), sort_keys=True, default=str))
    except MissingUpstream as exc:
        return _fail({"error": str(exc), "stage": exc.stage, "required_stage": exc.required}, 2)
    except (ConfigError, ValueError, OSError) as exc:
        return _fail({"error": str(exc), "type": type(exc).__name__, "command": args.command}, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
