"""Training loop, evaluation metrics, and the ablation harness.

Training uses decoupled-weight-decay Adam, shuffles deterministically under
the config seed, logs one line-delimited record per epoch, and keeps the
checkpoint with the best dev accuracy (earliest epoch wins ties). Metrics
are exact-match accuracy, binary accuracy at the score >= 4 threshold, and
word error rate. The ablation harness runs named configuration toggles
through a caller-supplied cell runner and collects per-cell reports,
recording failures without stopping the grid.
"""

from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import torch

from .corpus import SCORE_KINDS, CorpusSplit, ResponseRecord
from .errors import ConfigError, InputError, TrainingError
from .model import AsaModel, FeatureBundle, collate


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 32
    batch_size: int = 32
    learning_rate: float = 1e-5
    weight_decay: float = 0.01
    seed: int = 0
    target: str = "holistic"

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.target not in SCORE_KINDS:
            raise ConfigError(f"target {self.target!r} not one of {SCORE_KINDS}")


@dataclass(frozen=True)
class EvalReport:
    split: str
    target: str
    n: int
    accuracy: float
    binary_accuracy: float
    confusion: tuple[tuple[int, ...], ...]  # 5x5, rows gold 1..5, cols pred 1..5

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "target": self.target,
            "n": self.n,
            "accuracy": self.accuracy,
            "binary_accuracy": self.binary_accuracy,
            "confusion": [list(row) for row in self.confusion],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        return cls(
            split=obj["split"],
            target=obj["target"],
            n=int(obj["n"]),
            accuracy=float(obj["accuracy"]),
            binary_accuracy=float(obj["binary_accuracy"]),
            confusion=tuple(tuple(int(v) for v in row) for row in obj["confusion"]),
        )


@dataclass
class TrainResult:
    history: list[dict]
    best_epoch: int
    best_dev_accuracy: float
    state_dict: dict


# -- metrics --------------------------------------------------------------------


def accuracy(preds: Sequence[int], golds: Sequence[int]) -> float:
    """Exact-match fraction."""
    if len(preds) != len(golds):
        raise InputError(f"length mismatch: {len(preds)} preds vs {len(golds)} golds")
    if not golds:
        raise InputError("empty prediction list")
    return sum(p == g for p, g in zip(preds, golds)) / len(golds)


def binary_accuracy(preds: Sequence[int], golds: Sequence[int]) -> float:
    """Accuracy after coarsening scores into below-4 vs 4-and-above."""
    if len(preds) != len(golds):
        raise InputError(f"length mismatch: {len(preds)} preds vs {len(golds)} golds")
    if not golds:
        raise InputError("empty prediction list")
    for v in list(preds) + list(golds):
        if v not in (1, 2, 3, 4, 5):
            raise InputError(f"score {v!r} outside 1..5")
    return sum((p >= 4) == (g >= 4) for p, g in zip(preds, golds)) / len(golds)


def word_error_rate(reference: Sequence[str], hypothesis: Sequence[str]) -> float:
    """(substitutions + deletions + insertions) / |reference|.

    Minimal edit distance; can exceed 1 when the hypothesis inserts more
    tokens than the reference holds.
    """
    if not reference:
        raise InputError("empty reference")
    n, m = len(reference), len(hypothesis)
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            sub = prev[j - 1] + (reference[i - 1] != hypothesis[j - 1])
            cur[j] = min(sub, prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return prev[m] / n


# -- training -------------------------------------------------------------------


def _labeled_ids(
    ids: Sequence[str],
    records: Mapping[str, ResponseRecord],
    bundles: Mapping[str, FeatureBundle],
    target: str,
) -> list[str]:
    return [
        rid
        for rid in ids
        if rid in bundles
        and rid in records
        and records[rid].scores.get(target) is not None
    ]


def _predict_scores(
    model: AsaModel, bundles: Sequence[FeatureBundle], batch_size: int = 32
) -> list[int]:
    was_training = model.training
    model.eval()
    preds: list[int] = []
    with torch.no_grad():
        for i in range(0, len(bundles), batch_size):
            out = model(collate(list(bundles[i : i + batch_size]), model.config))
            if model.config.head == "classification":
                preds.extend(int(v) + 1 for v in out.argmax(dim=1))
            else:
                preds.extend(
                    int(min(max(round(float(v)), 1), 5)) for v in out.squeeze(1)
                )
    model.train(was_training)
    return preds


def train(
    model: AsaModel,
    splits: CorpusSplit,
    bundles: Mapping[str, FeatureBundle],
    records: Mapping[str, ResponseRecord],
    config: TrainConfig,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Fit the model; returns history and the best-dev-accuracy state.

    The model is left loaded with the winning state. With zero epochs the
    result is exactly the initialization. A non-finite loss aborts with the
    epoch and batch identified.
    """
    torch.manual_seed(config.seed)
    torch.set_num_threads(1)
    train_ids = _labeled_ids(splits.train, records, bundles, config.target)
    dev_ids = _labeled_ids(splits.dev, records, bundles, config.target)
    if not train_ids and config.epochs > 0:
        raise TrainingError(f"no labeled training bundles for target {config.target!r}")

    def gold(rid: str) -> int:
        return records[rid].scores.get(config.target)  # type: ignore[return-value]

    if model.config.head == "classification":
        criterion = torch.nn.CrossEntropyLoss()
    else:
        criterion = torch.nn.MSELoss()
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    rng = random.Random(config.seed)

    best_state = copy.deepcopy(model.state_dict())
    best_dev, best_epoch = -1.0, -1
    history: list[dict] = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(config.epochs):
            model.train()
            order = list(train_ids)
            rng.shuffle(order)
            total_loss, n_batches = 0.0, 0
            for i in range(0, len(order), config.batch_size):
                chunk = order[i : i + config.batch_size]
                batch = collate([bundles[rid] for rid in chunk], model.config)
                out = model(batch)
                if model.config.head == "classification":
                    target = torch.tensor([gold(r) - 1 for r in chunk])
                    loss = criterion(out, target)
                else:
                    target = torch.tensor([float(gold(r)) for r in chunk])
                    loss = criterion(out.squeeze(1), target)
                if not torch.isfinite(loss):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch} batch {i // config.batch_size}"
                    )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total_loss += float(loss.detach())
                n_batches += 1

            train_preds = _predict_scores(
                model, [bundles[r] for r in train_ids], config.batch_size
            )
            train_acc = accuracy(train_preds, [gold(r) for r in train_ids])
            if dev_ids:
                dev_preds = _predict_scores(
                    model, [bundles[r] for r in dev_ids], config.batch_size
                )
                dev_acc = accuracy(dev_preds, [gold(r) for r in dev_ids])
            else:
                dev_acc = train_acc  # no dev split: select on train
            row = {
                "epoch": epoch,
                "loss": total_loss / max(n_batches, 1),
                "train_accuracy": train_acc,
                "dev_accuracy": dev_acc,
            }
            history.append(row)
            if log_fh:
                log_fh.write(json.dumps(row, sort_keys=True) + "\n")
            if dev_acc > best_dev:
                best_dev, best_epoch = dev_acc, epoch
                best_state = copy.deepcopy(model.state_dict())
    finally:
        if log_fh:
            log_fh.close()

    model.load_state_dict(best_state)
    return TrainResult(
        history=history,
        best_epoch=best_epoch,
        best_dev_accuracy=best_dev if best_dev >= 0 else float("nan"),
        state_dict=best_state,
    )


def evaluate(
    model: AsaModel,
    ids: Sequence[str],
    bundles: Mapping[str, FeatureBundle],
    records: Mapping[str, ResponseRecord],
    target: str,
    split_name: str,
) -> EvalReport:
    """Score one split: accuracy, binary accuracy, gold x pred confusion."""
    usable = _labeled_ids(ids, records, bundles, target)
    if not usable:
        raise InputError(f"split {split_name!r} has no labeled responses for {target!r}")
    golds = [records[r].scores.get(target) for r in usable]
    preds = _predict_scores(model, [bundles[r] for r in usable])
    confusion = [[0] * 5 for _ in range(5)]
    for g, p in zip(golds, preds):
        confusion[g - 1][p - 1] += 1
    return EvalReport(
        split=split_name,
        target=target,
        n=len(usable),
        accuracy=accuracy(preds, golds),
        binary_accuracy=binary_accuracy(preds, golds),
        confusion=tuple(tuple(row) for row in confusion),
    )


# -- ablation harness -----------------------------------------------------------


@dataclass(frozen=True)
class AblationSpec:
    """One named cell: the exact configuration delta it applies."""

    name: str
    model_overrides: dict = field(default_factory=dict)
    extraction_overrides: dict = field(default_factory=dict)
    target: str = "holistic"

    def diff(self) -> dict:
        """The full config delta, for introspection and reporting."""
        out: dict = {}
        if self.model_overrides:
            out["model"] = dict(self.model_overrides)
        if self.extraction_overrides:
            out["extraction"] = dict(self.extraction_overrides)
        return out


def standard_grid(target: str = "holistic") -> list[AblationSpec]:
    """The named toggles studied by the experiment tables."""
    rel = "relevance"
    return [
        AblationSpec("baseline", target=target),
        AblationSpec(
            "w/o normalized",
            extraction_overrides={"normalize_grammar": False},
            target=target,
        ),
        AblationSpec(
            "only exemplar-response",
            model_overrides={"enabled_streams": ("er",)},
            target=rel,
        ),
        AblationSpec(
            "only image-response",
            model_overrides={"enabled_streams": ("ir",)},
            target=rel,
        ),
        AblationSpec(
            "er+ir",
            model_overrides={"enabled_streams": ("er", "ir")},
            target=rel,
        ),
        AblationSpec(
            "w/o Grammar",
            model_overrides={"zero_streams": ("grammar",)},
            target=target,
        ),
        AblationSpec(
            "w/o Multifaceted",
            model_overrides={"cross_aspect": ()},
            target=target,
        ),
        AblationSpec(
            "w/o splitting",
            extraction_overrides={"use_splitting": False},
            target=target,
        ),
    ]


def run_ablation(
    grid: Sequence[AblationSpec],
    run_cell: Callable[[AblationSpec], dict[str, EvalReport]],
) -> dict:
    """Run every cell; failures are recorded per cell and the grid continues.

    Returns {cell name: {"diff", "target", "reports"|"error"}} with reports
    keyed by split name.
    """
    table: dict = {}
    for spec in grid:
        row: dict = {"diff": spec.diff(), "target": spec.target}
        try:
            reports = run_cell(spec)
            row["reports"] = {k: r.to_dict() for k, r in reports.items()}
        except Exception as exc:  # cell isolation: one failure must not stop the grid
            row["error"] = f"{type(exc).__name__}: {exc}"
        table[spec.name] = row
    return table


def format_ablation_table(table: dict) -> str:
    """Human-readable comparison: one row per cell, acc/bin-acc per split."""
    split_names: list[str] = []
    for row in table.values():
        for split in row.get("reports", {}):
            if split not in split_names:
                split_names.append(split)
    header = ["cell", "target"] + [f"{s} acc/bin" for s in split_names]
    lines = ["  ".join(f"{h:<24}" for h in header).rstrip()]
    for name, row in table.items():
        cells = [f"{name:<24}", f"{row['target']:<24}"]
        if "error" in row:
            cells.append(f"FAILED: {row['error']}")
        else:
            for split in split_names:
                rep = row["reports"].get(split)
                cells.append(
                    f"{rep['accuracy']:.3f}/{rep['binary_accuracy']:.3f}".ljust(24)
                    if rep
                    else "-".ljust(24)
                )
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"
