"""End-to-end pipeline: ingest/synth -> graph -> embed -> features ->
train -> eval, driven by one declarative config with seeded runs.

Every artifact written by the pipeline starts with a ``# config_hash``
comment line; loaders that accept pre-built artifacts compare that hash
against the active config and refuse mismatches unless forced.
"""

from __future__ import annotations

import contextlib
import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluate, features, graph as graph_mod, ingest, model as logreg
from .embed import (
    EmbeddingMatrix,
    MODEL_COMMUNITY,
    community_features,
    deepwalk,
    label_propagation,
    save_embeddings,
    walklets,
)
from .errors import ConfigError, StageError, UndefinedMetricError
from .evaluate import EvalParams, EvalReport
from .features import DEFAULT_MASKS, mask_name, normalize_mask
from .skipgram import SkipGramParams
from .synth import SyntheticConfig

MODEL_CHOICES = ("deepwalk", "walklets", "labelprop")

STAGE_EXIT_CODES = {
    "config": 2,
    "ingest": 3,
    "graph": 4,
    "embed": 5,
    "features": 6,
    "train": 7,
    "eval": 8,
}


@dataclass(frozen=True)
class PipelineConfig:
    """All tunables; defaults mirror the reference setup: degree cut 3,
    1000-term vocabulary, 128-dimensional embeddings, 70/30 temporal
    split, 7-day windows."""

    input_path: str | None = None
    synthetic: SyntheticConfig | None = None
    seed: int = 42
    skip_bad_lines: bool = False
    min_thread_replies: int = 0
    min_degree: int = 3
    core: bool = False
    model: str = "walklets"
    dim: int = 128
    n_walks: int = 10
    walk_length: int = 80
    window: int = 5
    scales: tuple[int, ...] = (1, 2, 3, 4)
    sg_epochs: int = 5
    negatives: int = 5
    freq_power: float = 0.75
    sg_lr: float = 0.025
    batch_size: int = 512
    weighted_walks: bool = False
    labelprop_iters: int = 100
    vocab_size: int = 1000
    split_frac: float = 0.7
    masks: tuple[tuple[str, ...], ...] = DEFAULT_MASKS
    lam: float = 1e-4
    logreg_lr: float = 0.1
    logreg_epochs: int = 1000
    threshold: float = 0.5
    window_days: float = 7.0
    stride_days: float = 1.0
    kde_grid_size: int = 100
    kde_bandwidth: float | None = None
    threads: int = 1

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["masks"] = [mask_name(m) for m in self.masks]
        d["scales"] = list(self.scales)
        return d

    def skipgram_params(self) -> SkipGramParams:
        return SkipGramParams(
            dim=self.dim,
            epochs=self.sg_epochs,
            lr_start=self.sg_lr,
            negatives=self.negatives,
            freq_power=self.freq_power,
            batch_size=self.batch_size,
        )

    def eval_params(self) -> EvalParams:
        return EvalParams(
            split_frac=self.split_frac,
            vocab_size=self.vocab_size,
            masks=self.masks,
            lam=self.lam,
            logreg_lr=self.logreg_lr,
            logreg_epochs=self.logreg_epochs,
            threshold=self.threshold,
            window_days=self.window_days,
            stride_days=self.stride_days,
        )


def config_hash(cfg: PipelineConfig) -> str:
    canonical = json.dumps(cfg.as_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def validate_config(cfg: PipelineConfig) -> list[str]:
    """All range/divisibility checks, aggregated before any expensive work."""
    errors: list[str] = []
    if (cfg.input_path is None) == (cfg.synthetic is None):
        errors.append("exactly one of input_path or synthetic must be set")
    if cfg.seed < 0:
        errors.append(f"seed must be >= 0, got {cfg.seed}")
    if cfg.min_thread_replies < 0:
        errors.append(f"min_thread_replies must be >= 0, got {cfg.min_thread_replies}")
    if cfg.min_degree < 0:
        errors.append(f"min_degree must be >= 0, got {cfg.min_degree}")
    if cfg.model not in MODEL_CHOICES:
        errors.append(f"model must be one of {MODEL_CHOICES}, got {cfg.model!r}")
    if cfg.dim < 2:
        errors.append(f"dim must be >= 2, got {cfg.dim}")
    if cfg.n_walks < 1:
        errors.append(f"n_walks must be >= 1, got {cfg.n_walks}")
    if cfg.walk_length < 1:
        errors.append(f"walk_length must be >= 1, got {cfg.walk_length}")
    if cfg.window < 1:
        errors.append(f"window must be >= 1, got {cfg.window}")
    if not cfg.scales or any(s < 1 for s in cfg.scales):
        errors.append(f"scales must be positive integers, got {list(cfg.scales)}")
    elif cfg.model == "walklets" and cfg.dim % len(set(cfg.scales)) != 0:
        errors.append(
            f"dim {cfg.dim} must be divisible by the number of scales "
            f"{len(set(cfg.scales))}"
        )
    if cfg.sg_epochs < 1:
        errors.append(f"sg_epochs must be >= 1, got {cfg.sg_epochs}")
    if cfg.negatives < 1:
        errors.append(f"negatives must be >= 1, got {cfg.negatives}")
    if cfg.freq_power < 0:
        errors.append(f"freq_power must be >= 0, got {cfg.freq_power}")
    if cfg.sg_lr <= 0:
        errors.append(f"sg_lr must be > 0, got {cfg.sg_lr}")
    if cfg.batch_size < 1:
        errors.append(f"batch_size must be >= 1, got {cfg.batch_size}")
    if cfg.labelprop_iters < 1:
        errors.append(f"labelprop_iters must be >= 1, got {cfg.labelprop_iters}")
    if cfg.vocab_size < 1:
        errors.append(f"vocab_size must be >= 1, got {cfg.vocab_size}")
    if not 0.0 < cfg.split_frac < 1.0:
        errors.append(f"split_frac must be in (0,1), got {cfg.split_frac}")
    if not cfg.masks:
        errors.append("masks must not be empty")
    else:
        for m in cfg.masks:
            try:
                normalize_mask(m)
            except ValueError as exc:
                errors.append(str(exc))
    if cfg.lam < 0:
        errors.append(f"lambda must be >= 0, got {cfg.lam}")
    if cfg.logreg_lr <= 0:
        errors.append(f"lr must be > 0, got {cfg.logreg_lr}")
    if cfg.logreg_epochs < 1:
        errors.append(f"epochs must be >= 1, got {cfg.logreg_epochs}")
    if not 0.0 <= cfg.threshold <= 1.0:
        errors.append(f"threshold must be in [0,1], got {cfg.threshold}")
    if cfg.window_days <= 0:
        errors.append(f"window_days must be > 0, got {cfg.window_days}")
    if cfg.stride_days <= 0:
        errors.append(f"stride_days must be > 0, got {cfg.stride_days}")
    if cfg.kde_grid_size < 2:
        errors.append(f"kde_grid_size must be >= 2, got {cfg.kde_grid_size}")
    if cfg.kde_bandwidth is not None and cfg.kde_bandwidth <= 0:
        errors.append(f"kde_bandwidth must be > 0, got {cfg.kde_bandwidth}")
    if cfg.threads < 1:
        errors.append(f"threads must be >= 1, got {cfg.threads}")
    if cfg.synthetic is not None:
        errors.extend(cfg.synthetic.validate())
    return errors


def parse_masks(raw: list) -> tuple[tuple[str, ...], ...]:
    """Accept mask specs like "text+history" or ["text", "history"]."""
    masks = []
    for item in raw:
        if isinstance(item, str):
            parts = [p for p in item.replace(",", "+").split("+") if p]
        else:
            parts = list(item)
        masks.append(normalize_mask(parts))
    return tuple(masks)


def load_config(path: str | Path) -> PipelineConfig:
    """Read a JSON config file; unknown keys are rejected."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> PipelineConfig:
    raw = dict(raw)
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "synthetic" in raw and raw["synthetic"] is not None:
        synth_raw = raw["synthetic"]
        synth_known = {f.name for f in dataclasses.fields(SyntheticConfig)}
        synth_unknown = set(synth_raw) - synth_known
        if synth_unknown:
            raise ConfigError(f"unknown synthetic config keys: {sorted(synth_unknown)}")
        raw["synthetic"] = SyntheticConfig(**synth_raw)
    if "masks" in raw:
        raw["masks"] = parse_masks(raw["masks"])
    if "scales" in raw:
        raw["scales"] = tuple(int(s) for s in raw["scales"])
    try:
        return PipelineConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def read_embedded_hash(path: str | Path) -> str | None:
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    parts = first.split()
    if len(parts) == 3 and parts[0] == "#" and parts[1] == "config_hash":
        return parts[2]
    return None


def check_artifact_hash(path: str | Path, expected: str, force: bool = False) -> None:
    """Refuse artifacts stamped with a different config hash unless forced."""
    found = read_embedded_hash(path)
    if found is not None and found != expected and not force:
        raise ConfigError(
            f"artifact {path} was built with config {found}, current config is "
            f"{expected}; rerun the stage or pass --force"
        )


def compute_embeddings(g: graph_mod.ReplyGraph, cfg: PipelineConfig) -> EmbeddingMatrix:
    if cfg.model == "deepwalk":
        return deepwalk(
            g,
            n_walks=cfg.n_walks,
            walk_length=cfg.walk_length,
            window=cfg.window,
            params=cfg.skipgram_params(),
            seed=cfg.seed,
            weighted=cfg.weighted_walks,
            n_threads=cfg.threads,
        )
    if cfg.model == "walklets":
        return walklets(
            g,
            scales=cfg.scales,
            n_walks=cfg.n_walks,
            walk_length=cfg.walk_length,
            params=cfg.skipgram_params(),
            seed=cfg.seed,
            weighted=cfg.weighted_walks,
            n_threads=cfg.threads,
        )
    if cfg.model == "labelprop":
        assignment = label_propagation(g, max_iters=cfg.labelprop_iters, seed=cfg.seed)
        return community_features(assignment, dim=cfg.dim)
    raise ConfigError(f"unknown embedding model {cfg.model!r}")


def load_or_generate_dataset(cfg: PipelineConfig) -> ingest.Dataset:
    if cfg.synthetic is not None:
        from .synth import generate_synthetic

        dataset = generate_synthetic(cfg.synthetic, cfg.seed)
    else:
        dataset = ingest.load_jsonl(cfg.input_path, skip_bad_lines=cfg.skip_bad_lines)
    if cfg.min_thread_replies > 0:
        dataset = ingest.filter_min_thread_replies(dataset, cfg.min_thread_replies)
    return dataset


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path, force: bool = False) -> EvalReport:
    """Execute all stages, writing artifacts under out_dir.

    Deterministic for a fixed config: reruns produce byte-identical files.
    A ``.partial`` marker exists while the run is incomplete; any stage
    failure raises StageError naming the stage and leaves the marker.
    """
    errors = validate_config(cfg)
    if errors:
        raise StageError("config", ConfigError("; ".join(errors)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / ".partial"
    marker.write_text("pipeline in progress\n")
    h = config_hash(cfg)

    @contextlib.contextmanager
    def stage(name: str):
        try:
            yield
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc

    with stage("ingest"):
        dataset = load_or_generate_dataset(cfg)
        if cfg.synthetic is not None:
            ingest.write_jsonl(dataset, out / "dataset.jsonl", config_hash=h)

    with stage("graph"):
        full_graph = graph_mod.build_graph(dataset)
        mode = "iterative" if cfg.core else "single_pass"
        g = graph_mod.degree_filter(full_graph, cfg.min_degree, mode=mode)
        graph_mod.write_edge_list(g, out / "graph.txt", config_hash=h)

    with stage("embed"):
        embeddings = compute_embeddings(g, cfg)
        save_embeddings(embeddings, out / "embeddings.txt", config_hash=h)

    with stage("features"):
        split = evaluate.temporal_split(list(dataset.labeled_subset), cfg.split_frac)
        vocab, hindex = evaluate.prepare_features(split, cfg.vocab_size)
        mask_evals = evaluate.evaluate_masks(
            split, vocab, hindex, embeddings, cfg.eval_params()
        )
        export_mask = mask_evals[-1].mask
        X_tr, y_tr, ids_tr, _ = features.assemble_matrix(
            split.train, vocab, embeddings, hindex, export_mask, in_test=False
        )
        X_te, y_te, ids_te, _ = features.assemble_matrix(
            split.test, vocab, embeddings, hindex, export_mask, in_test=True
        )
        widths = features.block_widths(export_mask, len(vocab), embeddings.dim)
        features.write_feature_matrix(
            out / "features.txt",
            np.concatenate([X_tr, X_te]),
            np.concatenate([y_tr, y_te]),
            np.concatenate([ids_tr, ids_te]),
            widths,
            config_hash=h,
        )

    with stage("train"):
        logreg.save_model(mask_evals[-1].model, out / "model.txt", config_hash=h)

    with stage("eval"):
        last = mask_evals[-1]
        windows = evaluate.sliding_window(
            last.test_times,
            last.test_scores,
            last.test_labels,
            window_days=cfg.window_days,
            stride_days=cfg.stride_days,
        )
        n_pro, n_skeptic, frac_pro = ingest.class_balance(dataset)
        metadata = {
            "config_hash": h,
            "seed": cfg.seed,
            "model": cfg.model,
            "n_records": len(dataset),
            "n_users": dataset.n_users,
            "n_labeled": len(dataset.labeled_subset),
            "class_balance": {
                "n_pro": n_pro,
                "n_skeptic": n_skeptic,
                "frac_pro": frac_pro,
            },
            "graph": {
                "n_nodes_unfiltered": full_graph.n_nodes,
                "n_edges_unfiltered": full_graph.n_edges,
                "n_nodes": g.n_nodes,
                "n_edges": g.n_edges,
                "dangling_replies": full_graph.n_dangling_replies,
            },
            "n_train": len(split.train),
            "n_test": len(split.test),
            "boundary_time": split.boundary_time,
            "window_mask": mask_name(last.mask),
        }
        try:
            export = evaluate.embedding_density_export(
                embeddings,
                split.test,
                grid_size=cfg.kde_grid_size,
                bandwidth=cfg.kde_bandwidth,
            )
            evaluate.write_kde_csv(export, out / "kde.csv", config_hash=h)
            metadata["kde"] = {
                "bandwidth": export.bandwidth,
                "n_pro_users": export.n_pro_users,
                "n_skeptic_users": export.n_skeptic_users,
            }
        except UndefinedMetricError as exc:
            metadata["kde"] = {"skipped": str(exc)}
        report = evaluate.report_from_masks(mask_evals, windows, metadata)
        evaluate.write_report(report, out / "report.json")
        evaluate.write_windows_csv(windows, out / "windows.csv", config_hash=h)

    marker.unlink()
    return report
