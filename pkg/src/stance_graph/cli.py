"""Command-line interface: per-stage subcommands plus the full pipeline.

All subcommands accept --config (a JSON pipeline config file); explicit
flags override config-file values. Artifacts are stamped with the active
config hash, and stages that read artifacts refuse a mismatched stamp
unless --force is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluate, features, ingest, model as logreg
from .embed import load_embeddings, save_embeddings
from .errors import ConfigError, StageError, StanceGraphError, UndefinedMetricError
from .graph import build_graph, degree_filter, load_edge_list, write_edge_list
from .pipeline import (
    PipelineConfig,
    STAGE_EXIT_CODES,
    check_artifact_hash,
    compute_embeddings,
    config_hash,
    load_config,
    parse_masks,
    run_pipeline,
    validate_config,
)
from .synth import SyntheticConfig, generate_synthetic


def _base_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    threads = getattr(args, "threads", None)
    if threads is None and os.environ.get("STANCE_GRAPH_THREADS"):
        threads = int(os.environ["STANCE_GRAPH_THREADS"])
    if threads is not None:
        overrides["threads"] = threads
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _apply(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _require_valid(cfg: PipelineConfig) -> None:
    errors = validate_config(cfg)
    if errors:
        raise ConfigError("; ".join(errors))


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _base_config(args)
    if cfg.synthetic is None:
        cfg = dataclasses.replace(cfg, synthetic=SyntheticConfig(), input_path=None)
    _require_valid(cfg)
    dataset = generate_synthetic(cfg.synthetic, cfg.seed)
    ingest.write_jsonl(dataset, args.out, config_hash=config_hash(cfg))
    n_pro, n_skeptic, frac = ingest.class_balance(dataset)
    print(f"records: {len(dataset)}")
    print(f"users: {dataset.n_users}")
    print(f"labeled: {len(dataset.labeled_subset)} (pro {n_pro}, skeptic {n_skeptic}, frac_pro {frac:.4f})")
    print(f"wrote: {args.out}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    dataset = ingest.load_jsonl(args.input, skip_bad_lines=args.skip_bad_lines)
    if args.min_thread_replies:
        dataset = ingest.filter_min_thread_replies(dataset, args.min_thread_replies)
    n_pro, n_skeptic, frac = ingest.class_balance(dataset)
    n_replies = sum(1 for r in dataset.records if r.is_reply)
    print(f"records: {len(dataset)}")
    print(f"users: {dataset.n_users}")
    print(f"replies: {n_replies}")
    print(f"labeled: {len(dataset.labeled_subset)} (pro {n_pro}, skeptic {n_skeptic}, frac_pro {frac:.4f})")
    if dataset.n_skipped_lines:
        print(f"skipped_bad_lines: {dataset.n_skipped_lines}")
    return 0


def cmd_build_graph(args: argparse.Namespace) -> int:
    cfg = _apply(_base_config(args), min_degree=args.min_degree, core=args.core or None)
    h = config_hash(cfg)
    check_artifact_hash(args.input, h, force=args.force)
    dataset = ingest.load_jsonl(args.input, skip_bad_lines=cfg.skip_bad_lines)
    g = build_graph(dataset)
    mode = "iterative" if cfg.core else "single_pass"
    filtered = degree_filter(g, cfg.min_degree, mode=mode)
    write_edge_list(filtered, args.out, config_hash=h)
    print(f"nodes: {filtered.n_nodes} (of {g.n_nodes})")
    print(f"edges: {filtered.n_edges} (of {g.n_edges})")
    print(f"dangling_replies: {g.n_dangling_replies}")
    print(f"wrote: {args.out}")
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    scales = tuple(int(s) for s in args.scales.split(",")) if args.scales else None
    cfg = _apply(
        _base_config(args),
        model=args.model,
        dim=args.dim,
        n_walks=args.walks,
        walk_length=args.length,
        window=args.window,
        scales=scales,
        sg_epochs=args.epochs,
        negatives=args.negatives,
        batch_size=args.batch_size,
        sg_lr=args.sg_lr,
        weighted_walks=args.weighted or None,
    )
    _require_valid_embedding(cfg)
    h = config_hash(cfg)
    check_artifact_hash(args.graph, h, force=args.force)
    g = load_edge_list(args.graph)
    emb = compute_embeddings(g, cfg)
    save_embeddings(emb, args.out, config_hash=h)
    print(f"model: {emb.model_tag}")
    print(f"shape: {emb.vectors.shape[0]} x {emb.vectors.shape[1]}")
    print(f"wrote: {args.out}")
    return 0


def _require_valid_embedding(cfg: PipelineConfig) -> None:
    # Embedding-stage runs do not need an input/synthetic source configured.
    probe = cfg if (cfg.input_path, cfg.synthetic) != (None, None) else dataclasses.replace(
        cfg, input_path="<graph>"
    )
    _require_valid(probe)


def cmd_features(args: argparse.Namespace) -> int:
    mask = parse_masks([args.mask])[0] if args.mask else None
    cfg = _apply(
        _base_config(args),
        vocab_size=args.vocab_size,
        split_frac=args.split_frac,
        masks=(mask,) if mask else None,
    )
    h = config_hash(cfg)
    check_artifact_hash(args.dataset, h, force=args.force)
    dataset = ingest.load_jsonl(args.dataset, skip_bad_lines=cfg.skip_bad_lines)
    embeddings = None
    mask = cfg.masks[-1]
    if features.EMBEDDING in mask:
        if not args.embeddings:
            raise ConfigError("--embeddings is required when the mask includes 'embedding'")
        check_artifact_hash(args.embeddings, h, force=args.force)
        embeddings = load_embeddings(args.embeddings)
    split = evaluate.temporal_split(list(dataset.labeled_subset), cfg.split_frac)
    vocab, hindex = evaluate.prepare_features(split, cfg.vocab_size)
    blocks = []
    if args.split in ("train", "all"):
        blocks.append(features.assemble_matrix(split.train, vocab, embeddings, hindex, mask, in_test=False))
    if args.split in ("test", "all"):
        blocks.append(features.assemble_matrix(split.test, vocab, embeddings, hindex, mask, in_test=True))
    X = np.concatenate([b[0] for b in blocks])
    y = np.concatenate([b[1] for b in blocks])
    ids = np.concatenate([b[2] for b in blocks])
    widths = features.block_widths(mask, len(vocab), embeddings.dim if embeddings else 0)
    features.write_feature_matrix(args.out, X, y, ids, widths, config_hash=h)
    print(f"rows: {X.shape[0]} ({args.split} split), width: {X.shape[1]}")
    print(f"wrote: {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _apply(
        _base_config(args),
        lam=getattr(args, "lambda"),
        logreg_epochs=args.epochs,
        logreg_lr=args.lr,
    )
    h = config_hash(cfg)
    check_artifact_hash(args.features, h, force=args.force)
    X, y, _, _ = features.read_feature_matrix(args.features)
    clf = logreg.train(X, y, lam=cfg.lam, epochs=cfg.logreg_epochs, lr=cfg.logreg_lr)
    logreg.save_model(clf, args.out, config_hash=h)
    print(f"examples: {X.shape[0]}, width: {X.shape[1]}")
    print(f"final_loss: {clf.final_loss:.6f}")
    print(f"wrote: {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _apply(_base_config(args), model=args.model, input_path=args.dataset, synthetic=None)
    _require_valid(cfg)
    h = config_hash(cfg)
    check_artifact_hash(args.dataset, h, force=args.force)
    dataset = ingest.load_jsonl(args.dataset, skip_bad_lines=cfg.skip_bad_lines)
    if args.graph:
        check_artifact_hash(args.graph, h, force=args.force)
        g = load_edge_list(args.graph)
    else:
        mode = "iterative" if cfg.core else "single_pass"
        g = degree_filter(build_graph(dataset), cfg.min_degree, mode=mode)
    embeddings = compute_embeddings(g, cfg)
    metadata = {"config_hash": h, "seed": cfg.seed, "model": cfg.model}
    report = evaluate.run_ablation(dataset, embeddings, cfg.eval_params(), metadata)
    evaluate.write_report(report, args.report)
    csv_dir = Path(args.csv_dir) if args.csv_dir else Path(args.report).parent
    csv_dir.mkdir(parents=True, exist_ok=True)
    evaluate.write_windows_csv(report.windows, csv_dir / "windows.csv", config_hash=h)
    split = evaluate.temporal_split(list(dataset.labeled_subset), cfg.split_frac)
    try:
        export = evaluate.embedding_density_export(
            embeddings, split.test, grid_size=cfg.kde_grid_size, bandwidth=cfg.kde_bandwidth
        )
        evaluate.write_kde_csv(export, csv_dir / "kde.csv", config_hash=h)
    except UndefinedMetricError as exc:
        print(f"kde export skipped: {exc}", file=sys.stderr)
    for row in report.masks:
        gain = "-" if row.auc_gain_pct is None else f"{row.auc_gain_pct:+.2f}%"
        print(f"{row.name}: auc {row.auc:.4f} ({gain}), accuracy {row.accuracy:.4f}")
    print(f"wrote: {args.report}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _base_config(args)
    report = run_pipeline(cfg, args.out_dir, force=args.force)
    for row in report.masks:
        gain = "-" if row.auc_gain_pct is None else f"{row.auc_gain_pct:+.2f}%"
        print(f"{row.name}: auc {row.auc:.4f} ({gain}), accuracy {row.accuracy:.4f}")
    print(f"artifacts: {args.out_dir}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON pipeline config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $STANCE_GRAPH_THREADS or 1)")
    p.add_argument("--force", action="store_true",
                   help="ignore config-hash mismatches on input artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stance-graph",
        description="Stance classification pipeline over tweet text, label history, "
        "and reply-network embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth, _stage="ingest")

    p = sub.add_parser("ingest", help="parse and summarize a dataset")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--skip-bad-lines", action="store_true")
    p.add_argument("--min-thread-replies", type=int, default=0)
    p.set_defaults(func=cmd_ingest, _stage="ingest")

    p = sub.add_parser("build-graph", help="build and filter the reply network")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--min-degree", type=int, default=None)
    p.add_argument("--core", action="store_true",
                   help="iterate the degree filter to a fixpoint (k-core)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph, _stage="graph")

    p = sub.add_parser("embed", help="train user embeddings on a graph")
    _add_common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--model", choices=["deepwalk", "walklets", "labelprop"], default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--walks", type=int, default=None)
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--scales", default=None, help="comma-separated walk offsets")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--negatives", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--sg-lr", type=float, default=None)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed, _stage="embed")

    p = sub.add_parser("features", help="assemble the feature matrix")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--mask", default=None, help="e.g. text,embedding,history")
    p.add_argument("--split", choices=["train", "test", "all"], default="all")
    p.add_argument("--split-frac", type=float, default=None)
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features, _stage="features")

    p = sub.add_parser("train", help="train the logistic-regression classifier")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--lambda", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train, _stage="train")

    p = sub.add_parser("eval", help="run the ablation and window evaluation")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--graph", default=None)
    p.add_argument("--model", choices=["deepwalk", "walklets", "labelprop"], default=None)
    p.add_argument("--report", required=True)
    p.add_argument("--csv-dir", default=None)
    p.set_defaults(func=cmd_eval, _stage="eval")

    p = sub.add_parser("run", help="run the full pipeline")
    _add_common(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_run, _stage="config")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES.get(exc.stage, 1)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES["config"]
    except StanceGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES.get(getattr(args, "_stage", ""), 1)


if __name__ == "__main__":
    sys.exit(main())
