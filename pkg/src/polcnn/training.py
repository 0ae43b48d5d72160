"""Training loop, evaluation metrics, and the multi-experiment suite.

Minibatch Adam with per-epoch shuffles seeded by (seed, epoch), early
stopping on validation macro-F1, and cross-corpus transfer evaluation that
provably performs no parameter updates.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .cnn import (
    AdamState,
    CnnModel,
    ModelConfig,
    adam_step,
    backward,
    cross_entropy,
    forward,
    init_model,
    load_model,
    model_to_bytes,
    predict,
    save_model,
)
from .corpus import Corpus, LabeledSentence, SplitResult
from .embeddings import EmbeddingProvider, SentenceTensor, load_provider
from .errors import SuiteError, TrainingError
from .report import ComparisonReport, ComparisonRow

__all__ = [
    "TrainConfig",
    "EpochStats",
    "ClassMetrics",
    "EvalReport",
    "ExperimentSpec",
    "train",
    "evaluate",
    "transfer_evaluate",
    "run_suite",
    "report_from_predictions",
    "save_history",
    "load_history",
    "save_model",
    "load_model",
]


@dataclass
class TrainConfig:
    seed: int
    # None is only meaningful for run_suite, where each experiment loads its own.
    provider: Optional[EmbeddingProvider] = None
    batch_size: int = 50
    max_epochs: int = 50
    patience: int = 5
    model: Optional[ModelConfig] = None

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs, and patience must be >= 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_macro_f1: float


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    macro_f1: float
    per_class: dict[int, ClassMetrics]  # keyed by domain code 1..classes
    confusion: np.ndarray  # (classes, classes), rows = true, cols = predicted
    n: int


def _embed(provider: EmbeddingProvider, sentence: LabeledSentence) -> SentenceTensor:
    try:
        return provider.embed(sentence)
    except Exception as e:
        raise TrainingError(f"cannot embed sentence id {sentence.id}: {e}") from e


def report_from_predictions(
    y_true: Sequence[int], y_pred: Sequence[int], classes: int
) -> EvalReport:
    """Metrics over zero-based class indices.

    Macro-F1 is the unweighted mean of per-class F1 over all `classes`
    classes; a class absent from both truth and prediction scores 0.
    """
    if len(y_true) != len(y_pred) or not y_true:
        raise ValueError("need equal, non-empty truth/prediction sequences")
    confusion = np.zeros((classes, classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[t, p] += 1

    per_class: dict[int, ClassMetrics] = {}
    f1s = []
    for c in range(classes):
        tp = confusion[c, c]
        predicted = confusion[:, c].sum()
        actual = confusion[c, :].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c + 1] = ClassMetrics(
            precision=float(precision), recall=float(recall), f1=float(f1), support=int(actual)
        )
        f1s.append(f1)

    n = len(y_true)
    return EvalReport(
        accuracy=float(np.trace(confusion) / n),
        macro_f1=float(np.mean(f1s)),
        per_class=per_class,
        confusion=confusion,
        n=n,
    )


def evaluate(model: CnnModel, corpus: Corpus, provider: EmbeddingProvider) -> EvalReport:
    """Predict every labeled sentence and score against its domain code."""
    labeled = corpus.labeled()
    if not labeled:
        raise TrainingError(f"corpus {corpus.name!r} has no labeled sentences")
    y_true, y_pred = [], []
    for s in labeled:
        if s.label > model.config.classes:
            raise TrainingError(
                f"sentence {s.id}: label {s.label} exceeds model classes {model.config.classes}"
            )
        label_idx, _ = predict(model, _embed(provider, s))
        y_true.append(s.label - 1)
        y_pred.append(label_idx)
    return report_from_predictions(y_true, y_pred, model.config.classes)


def transfer_evaluate(
    model: CnnModel, target: Corpus, provider: EmbeddingProvider
) -> EvalReport:
    """Evaluate on a second corpus with zero parameter updates, by contract.

    The no-training guarantee is asserted by comparing parameter bytes
    before and after.
    """
    before = model_to_bytes(model)
    report = evaluate(model, target, provider)
    if model_to_bytes(model) != before:
        raise RuntimeError("transfer evaluation mutated model parameters")
    return report


def train(split: SplitResult, config: TrainConfig) -> tuple[CnnModel, list[EpochStats]]:
    """Minibatch Adam training with early stopping on validation macro-F1.

    Returns the parameters from the best-validation epoch and the per-epoch
    history. Deterministic: shuffles are seeded by (seed, epoch) and dropout
    by (seed, epoch, example index).
    """
    train_sents = split.train.labeled()
    if not train_sents:
        raise TrainingError("training split has no labeled sentences")
    provider = config.provider
    if provider is None:
        raise TrainingError("training needs an embedding provider")

    tensors = [_embed(provider, s) for s in train_sents]
    labels = [s.label - 1 for s in train_sents]

    model_cfg = config.model or ModelConfig(d=provider.dim)
    if model_cfg.d != provider.dim:
        raise TrainingError(
            f"model d={model_cfg.d} does not match provider dim {provider.dim}"
        )
    model = init_model(model_cfg, config.seed)
    state = AdamState.for_model(model)

    history: list[EpochStats] = []
    best_f1 = -1.0
    best_params: Optional[CnnModel] = None
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(len(tensors))
        losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            grad_sum: dict[str, np.ndarray] = {
                name: np.zeros_like(p) for name, p in model.param_items()
            }
            for idx in batch:
                idx = int(idx)
                probs, cache = forward(
                    model, tensors[idx], mode="train", seed=[config.seed, epoch, idx]
                )
                losses.append(cross_entropy(probs, labels[idx]))
                for name, g in backward(model, cache, labels[idx]).items():
                    grad_sum[name] += g
            scale = 1.0 / len(batch)
            adam_step(model, {name: g * scale for name, g in grad_sum.items()}, state)

        val_f1 = evaluate(model, split.validation, provider).macro_f1
        history.append(EpochStats(epoch=epoch, train_loss=statistics.fmean(losses), val_macro_f1=val_f1))
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_params = model.copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    assert best_params is not None
    best_params.check_finite()
    return best_params, history


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    provider_kind: str  # static | contextual
    provider_path: str

    def __post_init__(self):
        if self.provider_kind not in ("static", "contextual"):
            raise ValueError(f"provider_kind {self.provider_kind!r} not static/contextual")


def run_suite(
    specs: Sequence[ExperimentSpec],
    split: SplitResult,
    target_corpus: Corpus,
    config: TrainConfig,
) -> ComparisonReport:
    """Train and doubly evaluate one model per experiment spec.

    Each experiment trains on the split, scores the held-out test corpus,
    then transfers unchanged to the target corpus. Any failure aborts the
    suite naming the experiment.
    """
    if not specs:
        raise SuiteError("suite needs at least one experiment spec")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise SuiteError(f"duplicate experiment names in {names}")

    rows = []
    provider_meta = {}
    for spec in specs:
        try:
            provider = load_provider(f"{spec.provider_kind}:{spec.provider_path}")
            exp_config = TrainConfig(
                seed=config.seed,
                provider=provider,
                batch_size=config.batch_size,
                max_epochs=config.max_epochs,
                patience=config.patience,
                model=config.model,
            )
            model, _ = train(split, exp_config)
            source = evaluate(model, split.test, provider)
            target = transfer_evaluate(model, target_corpus, provider)
        except Exception as e:
            raise SuiteError(f"experiment {spec.name!r} failed: {e}") from e
        provider_meta[spec.name] = provider.describe()
        rows.append(
            ComparisonRow(
                experiment=spec.name,
                source_accuracy=source.accuracy,
                source_f1=source.macro_f1,
                target_accuracy=target.accuracy,
                target_f1=target.macro_f1,
            )
        )

    metadata = {
        "tool_version": __version__,
        "seed": config.seed,
        "split_policy": "stratified 70/15/15 by domain, largest-remainder rounding",
        "split_sizes": {
            "train": len(split.train),
            "validation": len(split.validation),
            "test": len(split.test),
        },
        "source_corpus": split.train.name.rsplit("/", 1)[0],
        "target_corpus": target_corpus.name,
        "f1_definition": "macro-F1, unweighted over domains; 0-1 scale in structured output",
        "providers": provider_meta,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    return ComparisonReport(rows=tuple(rows), metadata=metadata)


def save_history(history: Sequence[EpochStats], path: str | Path) -> None:
    """CSV with columns epoch,train_loss,val_macro_f1 (full float precision)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_macro_f1"])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_loss), repr(row.val_macro_f1)])


def load_history(path: str | Path) -> list[EpochStats]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            EpochStats(
                epoch=int(r["epoch"]),
                train_loss=float(r["train_loss"]),
                val_macro_f1=float(r["val_macro_f1"]),
            )
            for r in reader
        ]
