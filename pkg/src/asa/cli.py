"""Command-line entry points.

    asa generate   write a synthetic planted-signal corpus
    asa extract    materialize feature bundles for a manifest
    asa train      fit the scorer on extracted features
    asa eval       score one split with a trained checkpoint
    asa ablate     run the named configuration toggles end to end

Exit codes: 0 success, 1 validation failure (bad config, bad manifest,
incompatible inputs), 2 runtime failure (backends, numerics, I/O). Every
command honors ``--seed`` and produces identical artifacts on reruns.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
from dataclasses import asdict
from pathlib import Path

import torch

from .config import PipelineConfig, RunSection, build_backends, load_config
from .corpus import load_manifest
from .errors import AsaError, ConfigError, InputError, ValidationFailure
from .features import FeatureStore, check_compatibility, extract_corpus
from .model import AsaModel, load_checkpoint, save_checkpoint
from .synthetic import generate_synthetic_corpus
from .traineval import (
    AblationSpec,
    evaluate,
    format_ablation_table,
    run_ablation,
    standard_grid,
    train,
)

SPLIT_NAMES = ("train", "dev", "known_test", "unknown_test")


def _out_dir(cfg: PipelineConfig) -> Path:
    return Path(cfg.corpus.out_dir)


def _manifest_path(cfg: PipelineConfig, args) -> Path:
    manifest = getattr(args, "manifest", None) or cfg.corpus.manifest
    if not manifest:
        raise ConfigError("no manifest: pass --manifest or set corpus.manifest")
    path = Path(manifest)
    if not path.is_file():
        raise ConfigError(f"manifest {path} not found")
    return path


def _features_dir(cfg: PipelineConfig, args) -> Path:
    override = getattr(args, "features", None)
    return Path(override) if override else _out_dir(cfg) / "features"


def _apply_splitter_flags(cfg: PipelineConfig, args) -> PipelineConfig:
    choice = getattr(args, "splitter", None)
    endpoint = getattr(args, "splitter_endpoint", None)
    if choice is None and endpoint is None:
        return cfg
    if choice == "llm":
        if not endpoint:
            raise ConfigError("--splitter llm requires --splitter-endpoint URL")
        splitter = endpoint
    elif choice == "fallback" or choice is None:
        splitter = "fallback"
    else:
        splitter = choice
    backends = dataclasses.replace(cfg.backends, splitter=splitter)
    return dataclasses.replace(cfg, backends=backends)


def _load_records(cfg: PipelineConfig, args):
    _, records = load_manifest(_manifest_path(cfg, args))
    return {r.id: r for r in records}


def cmd_generate(cfg: PipelineConfig, args) -> int:
    out = Path(args.out) if args.out else _out_dir(cfg) / "corpus"
    n_sets = args.sets if args.sets is not None else cfg.corpus.n_sets
    n_per_set = args.per_set if args.per_set is not None else cfg.corpus.n_per_set
    if n_sets < 1 or n_per_set < 1:
        raise ConfigError("--sets and --per-set must be >= 1")
    manifest = generate_synthetic_corpus(out, n_sets, n_per_set, cfg.run.seed)
    print(f"wrote {manifest} ({n_sets} sets x {n_per_set} responses)")
    return 0


def cmd_extract(cfg: PipelineConfig, args) -> int:
    cfg = _apply_splitter_flags(cfg, args)
    manifest = _manifest_path(cfg, args)
    backends = build_backends(cfg.backends)
    report = extract_corpus(
        manifest, _features_dir(cfg, args), backends, cfg.extraction_config()
    )
    print(
        f"extracted {report.extracted}, skipped {report.skipped} "
        f"of {report.n_responses} responses"
    )
    if report.errors:
        for rid, msg in sorted(report.errors.items()):
            print(f"  {rid}: {msg}", file=sys.stderr)
        return 2
    return 0


def cmd_train(cfg: PipelineConfig, args) -> int:
    store = FeatureStore(_features_dir(cfg, args))
    records = _load_records(cfg, args)
    bundles = store.load_bundles(list(records))
    train_cfg = cfg.train_config()
    if args.target:
        train_cfg = dataclasses.replace(train_cfg, target=args.target)
    model = AsaModel(cfg.model_config())
    out_dir = _out_dir(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = train(
        model,
        store.splits,
        bundles,
        records,
        train_cfg,
        log_path=out_dir / "train_log.jsonl",
    )
    ckpt = Path(args.checkpoint) if args.checkpoint else out_dir / "checkpoint.pt"
    save_checkpoint(
        ckpt,
        model,
        artifacts={
            **store.artifacts_dict(),
            "target": train_cfg.target,
            "train_config": asdict(train_cfg),
        },
    )
    print(
        f"wrote {ckpt} (best dev accuracy {result.best_dev_accuracy:.3f} "
        f"at epoch {result.best_epoch})"
    )
    return 0


def cmd_eval(cfg: PipelineConfig, args) -> int:
    ckpt = Path(args.checkpoint) if args.checkpoint else _out_dir(cfg) / "checkpoint.pt"
    if not ckpt.is_file():
        raise ConfigError(f"checkpoint {ckpt} not found")
    model, artifacts = load_checkpoint(ckpt)
    store = FeatureStore(_features_dir(cfg, args))
    check_compatibility(artifacts, store)
    records = _load_records(cfg, args)
    split = args.split or "known_test"
    ids = getattr(store.splits, split)
    if not ids:
        raise InputError(f"split {split!r} is empty")
    bundles = store.load_bundles(ids)
    target = args.target or artifacts.get("target", "holistic")
    report = evaluate(model, ids, bundles, records, target, split)
    out_dir = _out_dir(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / f"report_{split}.json"
    report_path.write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )
    print(
        f"{split}: n={report.n} accuracy={report.accuracy:.3f} "
        f"binary_accuracy={report.binary_accuracy:.3f} (report: {report_path})"
    )
    return 0


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "cell"


def cmd_ablate(cfg: PipelineConfig, args) -> int:
    cfg = _apply_splitter_flags(cfg, args)
    manifest = _manifest_path(cfg, args)
    backends = build_backends(cfg.backends)
    base_extraction = cfg.extraction_config()
    base_model = cfg.model_config()
    base_train = cfg.train_config()
    records = _load_records(cfg, args)
    root = Path(args.out) if args.out else _out_dir(cfg) / "ablation"
    root.mkdir(parents=True, exist_ok=True)

    grid = standard_grid(base_train.target)
    if args.cells:
        wanted = {c.strip() for c in args.cells.split(",")}
        missing = wanted - {s.name for s in grid}
        if missing:
            raise ConfigError(f"unknown ablation cells: {sorted(missing)}")
        grid = [s for s in grid if s.name in wanted]

    stores: dict[Path, FeatureStore] = {}

    def features_for(spec: AblationSpec) -> FeatureStore:
        if spec.extraction_overrides:
            ext = dataclasses.replace(base_extraction, **spec.extraction_overrides)
            feature_dir = root / "cells" / _slug(spec.name) / "features"
        else:
            ext = base_extraction
            feature_dir = root / "features"
        if feature_dir not in stores:
            report = extract_corpus(manifest, feature_dir, backends, ext)
            if report.errors:
                raise AsaError(f"extraction failed for {len(report.errors)} responses")
            stores[feature_dir] = FeatureStore(feature_dir)
        return stores[feature_dir]

    def run_cell(spec: AblationSpec):
        store = features_for(spec)
        bundles = store.load_bundles(list(records))
        model_cfg = dataclasses.replace(base_model, **spec.model_overrides)
        train_cfg = dataclasses.replace(base_train, target=spec.target)
        model = AsaModel(model_cfg)
        train(model, store.splits, bundles, records, train_cfg)
        reports = {}
        for split in ("dev", "known_test", "unknown_test"):
            ids = getattr(store.splits, split)
            if ids:
                reports[split] = evaluate(
                    model, ids, bundles, records, spec.target, split
                )
        return reports

    table = run_ablation(grid, run_cell)
    (root / "ablation.json").write_text(
        json.dumps(table, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    text = format_ablation_table(table)
    (root / "ablation.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0 if any("reports" in row for row in table.values()) else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asa",
        description="Multi-aspect speaking assessment pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="pipeline config YAML")
        p.add_argument("--seed", type=int, help="override run.seed")

    p = sub.add_parser("generate", help="write a synthetic corpus")
    common(p)
    p.add_argument("--out", help="corpus directory (default <out_dir>/corpus)")
    p.add_argument("--sets", type=int, help="number of question sets")
    p.add_argument("--per-set", dest="per_set", type=int, help="responses per set")

    def splitter_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--splitter",
            choices=("llm", "fallback"),
            help="response splitter backend",
        )
        p.add_argument(
            "--splitter-endpoint",
            dest="splitter_endpoint",
            help="generation endpoint URL for --splitter llm",
        )

    p = sub.add_parser("extract", help="extract feature bundles")
    common(p)
    p.add_argument("--manifest", help="corpus manifest path")
    p.add_argument("--features", help="feature store directory")
    splitter_flags(p)

    p = sub.add_parser("train", help="train the scorer")
    common(p)
    p.add_argument("--manifest", help="corpus manifest path")
    p.add_argument("--features", help="feature store directory")
    p.add_argument("--checkpoint", help="checkpoint output path")
    p.add_argument("--target", choices=("holistic", "relevance", "language_use"))

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    common(p)
    p.add_argument("--manifest", help="corpus manifest path")
    p.add_argument("--features", help="feature store directory")
    p.add_argument("--checkpoint", help="checkpoint path")
    p.add_argument("--split", choices=SPLIT_NAMES, default="known_test")
    p.add_argument("--target", choices=("holistic", "relevance", "language_use"))

    p = sub.add_parser("ablate", help="run the named configuration toggles")
    common(p)
    p.add_argument("--manifest", help="corpus manifest path")
    p.add_argument("--out", help="ablation output directory")
    p.add_argument("--cells", help="comma-separated cell names (default: all)")
    splitter_flags(p)

    return parser


_COMMANDS = {
    "generate": cmd_generate,
    "extract": cmd_extract,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    torch.set_num_threads(1)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, run=RunSection(seed=args.seed))
        return _COMMANDS[args.command](cfg, args)
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AsaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
