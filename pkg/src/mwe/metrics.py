"""Confusion-matrix metrics: the six per-experiment criteria.

Every metric reduces to one-vs-rest cell counts per class: TP (true
class predicted), FP (other classes predicted as it), FN (true class
predicted elsewhere), TN (the rest). Sensitivity equals recall by
definition; both are reported because downstream tables list both.
Macro averages are unweighted class means. A 0/0 cell reports 0.0 and
is recorded in degenerate_cells rather than propagating NaN.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # [k, k]; rows = true class, cols = predicted

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(true_labels, predicted_labels, k: int) -> ConfusionMatrix:
    true_labels = np.asarray(true_labels, dtype=np.intp)
    predicted_labels = np.asarray(predicted_labels, dtype=np.intp)
    if true_labels.shape != predicted_labels.shape:
        raise ValueError(
            f"label sequences differ in length: {true_labels.shape} "
            f"vs {predicted_labels.shape}"
        )
    for name, arr in (("true", true_labels), ("predicted", predicted_labels)):
        bad = (arr < 0) | (arr >= k)
        if bad.any():
            raise ValueError(
                f"{name} labels contain values outside 0..{k - 1}: "
                f"{sorted(set(arr[bad].tolist()))}"
            )
    counts = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        counts[t, p] += 1
    return ConfusionMatrix(counts=counts)


@dataclass
class MetricsReport:
    accuracy: float
    per_class: list          # dicts: precision, recall, f1, sensitivity, specificity
    macro_precision: float
    macro_recall: float
    macro_f1: float
    degenerate_cells: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": self.per_class,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "degenerate_cells": [list(c) for c in self.degenerate_cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _ratio(num: float, den: float, cell, flags: list) -> float:
    if den == 0:
        flags.append(cell)
        return 0.0
    return num / den


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    counts = cm.counts
    total = cm.total
    if total < 1:
        raise ValueError("confusion matrix is empty")
    k = cm.k
    flags: list = []
    per_class = []
    for i in range(k):
        tp = float(counts[i, i])
        fn = float(counts[i, :].sum() - counts[i, i])
        fp = float(counts[:, i].sum() - counts[i, i])
        tn = float(total - tp - fn - fp)
        precision = _ratio(tp, tp + fp, (i, "precision"), flags)
        recall = _ratio(tp, tp + fn, (i, "recall"), flags)
        f1 = _ratio(2 * precision * recall, precision + recall, (i, "f1"), flags)
        specificity = _ratio(tn, fp + tn, (i, "specificity"), flags)
        per_class.append({
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "sensitivity": recall,
            "specificity": specificity,
        })
    return MetricsReport(
        accuracy=float(np.trace(counts)) / total,
        per_class=per_class,
        macro_precision=sum(c["precision"] for c in per_class) / k,
        macro_recall=sum(c["recall"] for c in per_class) / k,
        macro_f1=sum(c["f1"] for c in per_class) / k,
        degenerate_cells=tuple(flags),
    )


def micro_precision(cm: ConfusionMatrix) -> float:
    counts = cm.counts
    tp = float(np.trace(counts))
    fp = float(counts.sum() - np.trace(counts))
    return tp / (tp + fp) if tp + fp else 0.0


def micro_recall(cm: ConfusionMatrix) -> float:
    counts = cm.counts
    tp = float(np.trace(counts))
    fn = float(counts.sum() - np.trace(counts))
    return tp / (tp + fn) if tp + fn else 0.0


def render_text_table(report: MetricsReport, class_names=None) -> str:
    """Aligned plain-text table mirroring the JSON content."""
    k = len(report.per_class)
    names = list(class_names) if class_names else [str(i) for i in range(k)]
    cols = ["class", "precision", "recall", "f1", "sensitivity", "specificity"]
    rows = [cols]
    for name, c in zip(names, report.per_class):
        rows.append([name] + [f"{c[col]:.4f}" for col in cols[1:]])
    rows.append(["macro", f"{report.macro_precision:.4f}",
                 f"{report.macro_recall:.4f}", f"{report.macro_f1:.4f}",
                 f"{report.macro_recall:.4f}", ""])
    widths = [max(len(r[j]) for r in rows) for j in range(len(cols))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
             for r in rows]
    lines.append(f"accuracy: {report.accuracy:.4f}")
    return "\n".join(lines) + "\n"


def plot_csv(report: MetricsReport, class_names=None) -> str:
    """metric,class,value rows for bar plots; deterministic ordering."""
    k = len(report.per_class)
    names = list(class_names) if class_names else [str(i) for i in range(k)]
    lines = ["metric,class,value"]
    for metric in ("precision", "recall", "f1", "sensitivity", "specificity"):
        for name, c in zip(names, report.per_class):
            lines.append(f"{metric},{name},{c[metric]!r}")
    lines.append(f"accuracy,all,{report.accuracy!r}")
    return "\n".join(lines) + "\n"
