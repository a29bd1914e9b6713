"""Metrics and experiment protocol: confusion matrices, per-class and
macro F1, keyword-robustness comparison, and volume sweeps.

Zero-denominator classes score 0 and are flagged degenerate rather than
producing NaNs, so reports always aggregate; classes that are neither
gold nor predicted are excluded from the macro mean.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .dataset import KEYWORDS_REMOVED, WITH_KEYWORDS, DatasetSplit, subsample_train
from .embeddings import EmbeddingStore
from .errors import LengthMismatchError, NTooLargeError, UnknownLabelError
from .fusion import MlpModel, TrainConfig, assemble_features, predict, train


@dataclass
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # rows = gold, cols = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


@dataclass
class EvalReport:
    classes: tuple[str, ...]
    per_class: dict[str, ClassMetrics]
    macro_f1: float
    micro_f1: float
    n: int
    variant: str | None = None

    def to_json(self) -> dict:
        return {
            "classes": list(self.classes),
            "per_class": {
                c: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "degenerate": m.degenerate,
                }
                for c, m in self.per_class.items()
            },
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "n": self.n,
            "variant": self.variant,
        }

    def table(self) -> str:
        width = max((len(c) for c in self.classes), default=5)
        lines = [f"{'class'.ljust(width)}  precision  recall  f1"]
        for c in self.classes:
            m = self.per_class[c]
            mark = " (degenerate)" if m.degenerate else ""
            lines.append(
                f"{c.ljust(width)}  {m.precision:9.3f}  {m.recall:6.3f}  {m.f1:0.3f}{mark}"
            )
        lines.append(f"macro-F1 {self.macro_f1:.4f}  micro-F1 {self.micro_f1:.4f}  n={self.n}")
        return "\n".join(lines)


def confusion(gold: list[str], pred: list[str], classes: list[str]) -> ConfusionMatrix:
    if len(gold) != len(pred):
        raise LengthMismatchError(f"gold has {len(gold)} labels, pred has {len(pred)}")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for g, p in zip(gold, pred):
        if g not in index:
            raise UnknownLabelError(f"gold label {g!r} not in class list")
        if p not in index:
            raise UnknownLabelError(f"predicted label {p!r} not in class list")
        counts[index[g], index[p]] += 1
    return ConfusionMatrix(tuple(classes), counts)


def metrics(cm: ConfusionMatrix, variant: str | None = None) -> EvalReport:
    """Per-class precision/recall/F1 plus macro and micro averages."""
    per_class: dict[str, ClassMetrics] = {}
    f1s = []
    for i, name in enumerate(cm.classes):
        row = int(cm.counts[i, :].sum())  # gold occurrences
        col = int(cm.counts[:, i].sum())  # predictions
        tp = int(cm.counts[i, i])
        precision = tp / col if col else 0.0
        recall = tp / row if row else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        degenerate = row == 0 and col == 0
        per_class[name] = ClassMetrics(precision, recall, f1, degenerate)
        if not degenerate:
            f1s.append(f1)
    macro = float(np.mean(f1s)) if f1s else 0.0
    total = cm.total
    micro = float(np.trace(cm.counts) / total) if total else 0.0
    return EvalReport(cm.classes, per_class, macro, micro, total, variant)


def evaluate_model(
    model: MlpModel,
    split: DatasetSplit,
    store: EmbeddingStore,
    classes: list[str],
    zero_modality: str | None = None,
) -> EvalReport:
    """Predict a test split and score it; pure function of its inputs."""
    X, y = assemble_features(split.examples, store, classes, zero_modality)
    picks = [c for c, _ in predict(model, X)]
    gold = [classes[i] for i in y]
    pred = [classes[i] for i in picks]
    return metrics(confusion(gold, pred, classes), variant=split.variant)


@dataclass
class RobustnessReport:
    with_keywords: EvalReport
    keywords_removed: EvalReport
    f1_gap: float  # with_keywords macro-F1 minus keywords_removed macro-F1

    def to_json(self) -> dict:
        return {
            "with_keywords": self.with_keywords.to_json(),
            "keywords_removed": self.keywords_removed.to_json(),
            "f1_gap": self.f1_gap,
        }


def robustness_compare(
    model: MlpModel,
    splits: dict[str, DatasetSplit],
    stores: dict[str, EmbeddingStore],
    classes: list[str],
) -> RobustnessReport:
    """Evaluate one model on both keyword variants of the same test ads.

    Each variant brings its own embedding store because removing keywords
    changes the text and therefore its vectors.
    """
    plain = splits[WITH_KEYWORDS]
    removed = splits[KEYWORDS_REMOVED]
    if plain.ad_ids() != removed.ad_ids():
        raise ValueError("variant test splits must share ad_ids")
    report_with = evaluate_model(model, plain, stores[WITH_KEYWORDS], classes)
    report_removed = evaluate_model(model, removed, stores[KEYWORDS_REMOVED], classes)
    return RobustnessReport(
        report_with, report_removed, report_with.macro_f1 - report_removed.macro_f1
    )


def volume_sweep(
    train_split: DatasetSplit,
    test_split: DatasetSplit,
    store: EmbeddingStore,
    classes: list[str],
    volumes: list[int],
    config: TrainConfig,
) -> list[tuple[int, EvalReport]]:
    """Train one model per volume on stratified subsamples and evaluate each.

    Per-volume seeds derive from the config seed and the volume index, so
    sweeps are reproducible and parallelizable.
    """
    for i, n in enumerate(volumes):
        if n > len(train_split):
            raise NTooLargeError(f"volume {n} exceeds train size {len(train_split)}")
        if i and volumes[i] < volumes[i - 1]:
            raise ValueError("volumes must be ascending")
    results = []
    for i, n in enumerate(volumes):
        sub = subsample_train(train_split, n, seed=train_split.seed * 1000 + i)
        X, y = assemble_features(sub.examples, store, classes)
        model, _ = train(X, y, len(classes), config)
        results.append((n, evaluate_model(model, test_split, store, classes)))
    return results


def save_report(report, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_sweep_series(results: list[tuple[int, EvalReport]], path) -> None:
    """Plot-ready (n, macro_f1, micro_f1) series as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "macro_f1", "micro_f1"])
        for n, report in results:
            writer.writerow([n, repr(report.macro_f1), repr(report.micro_f1)])
