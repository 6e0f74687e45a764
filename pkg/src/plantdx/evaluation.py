"""Hold-out and cross-validated evaluation of per-plant forests."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyMatrix,
    LabelOutOfRange,
    LengthMismatch,
    MissingFeature,
    SingleClassInput,
    TooFewSamplesPerClass,
)
from .forest import fit_forest

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: list[str]
    counts: np.ndarray  # rows = true class, columns = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(y_true, y_pred, k: int, labels=None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch("y_true and y_pred differ in length")
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise LabelOutOfRange(f"labels must lie in [0, {k})")
    counts = np.bincount(y_true * k + y_pred, minlength=k * k).reshape(k, k)
    names = list(labels) if labels is not None else [str(i) for i in range(k)]
    return ConfusionMatrix(names, counts.astype(np.int64))


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass
class EvaluationReport:
    labels: list[str]
    accuracy: float
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    macro_f1: float
    weighted_f1: float
    micro_f1: float
    confusion: ConfusionMatrix
    roc: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    auc: dict[str, float] = field(default_factory=dict)
    macro_auc: float | None = None

    def scalars(self) -> dict:
        return {
            "labels": self.labels,
            "n_samples": self.confusion.total,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "micro_f1": self.micro_f1,
            "per_class": {
                lab: {"precision": p, "recall": r, "f1": f, "support": s, "auc": self.auc.get(lab)}
                for lab, p, r, f, s in zip(self.labels, self.precision, self.recall, self.f1, self.support)
            },
            "macro_auc": self.macro_auc,
        }


def metrics(cm: ConfusionMatrix) -> EvaluationReport:
    c = cm.counts
    total = int(c.sum())
    if total == 0:
        raise EmptyMatrix("cannot compute metrics of an empty confusion matrix")
    diag = np.diag(c)
    col = c.sum(axis=0)
    row = c.sum(axis=1)
    precision, recall, f1 = [], [], []
    for i in range(len(c)):
        if col[i] == 0 or row[i] == 0:
            log.warning("class %s has an empty row or column; 0/0 metrics set to 0", cm.labels[i])
        p = _ratio(int(diag[i]), int(col[i]))
        r = _ratio(int(diag[i]), int(row[i]))
        precision.append(p)
        recall.append(r)
        f1.append(_ratio(2 * p * r, p + r))
    support = [int(s) for s in row]
    trace = int(diag.sum())
    # 2TP / (2TP + FP + FN) with FP = FN = total - trace
    micro = (2 * trace) / (2 * trace + 2 * (total - trace))
    return EvaluationReport(
        labels=list(cm.labels),
        accuracy=trace / total,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro_f1=float(np.mean(f1)),
        weighted_f1=float(sum(f * s for f, s in zip(f1, support)) / total),
        micro_f1=micro,
        confusion=cm,
    )


def roc_curve(y_true_binary, scores) -> list[tuple[float, float]]:
    """ROC points sweeping thresholds over distinct scores, highest first."""
    y = np.asarray(y_true_binary).astype(bool)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise LengthMismatch("labels and scores differ in length")
    pos = int(y.sum())
    neg = int((~y).sum())
    if pos == 0 or neg == 0:
        raise SingleClassInput("ROC needs at least one positive and one negative")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), len(s) - 1]
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    points = [(0.0, 0.0)] + [(int(f) / neg, int(t) / pos) for f, t in zip(fp, tp)]
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points


def auc(curve) -> float:
    """Trapezoidal area under an ROC curve."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(curve, curve[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def attach_roc(report: EvaluationReport, y_true, scores: np.ndarray) -> EvaluationReport:
    """One-vs-rest ROC per class; classes absent (or universal) in ``y_true`` are skipped."""
    y_true = np.asarray(y_true)
    aucs = []
    for c, lab in enumerate(report.labels):
        positive = y_true == c
        if positive.all() or not positive.any():
            log.warning("class %s: one-vs-rest ROC undefined on this data", lab)
            continue
        curve = roc_curve(positive, scores[:, c])
        report.roc[lab] = curve
        report.auc[lab] = auc(curve)
        aucs.append(report.auc[lab])
    report.macro_auc = float(np.mean(aucs)) if aucs else None
    return report


def report_from_predictions(y_true, votes: np.ndarray, labels) -> EvaluationReport:
    votes = np.asarray(votes)
    y_pred = votes.argmax(axis=1)
    cm = confusion(y_true, y_pred, len(labels), labels)
    rep = metrics(cm)
    fractions = votes / votes.sum(axis=1, keepdims=True)
    return attach_roc(rep, y_true, fractions)


def evaluate_model(model, test_table) -> EvaluationReport:
    """Predict every row of ``test_table`` (a FeatureTable with all features)."""
    missing = [n for n in model.selected_features if n not in test_table.feature_names]
    if missing:
        raise MissingFeature(f"missing feature(s): {', '.join(missing)}")
    if list(test_table.labels) != list(model.labels):
        log.warning("test labels %s differ from model labels %s", test_table.labels, model.labels)
    X = test_table.columns(model.selected_features)
    return report_from_predictions(test_table.y, model.votes(X), model.labels)


def kfold_assign(labels, k: int, seed: int) -> np.ndarray:
    """Stratified fold id per sample: per-class seeded shuffle dealt round-robin.

    Each class continues the deal where the previous one stopped, so total
    fold sizes stay balanced as well.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    fold = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < k:
            raise TooFewSamplesPerClass(f"class {c} has {len(idx)} samples, fewer than k={k}")
        perm = idx[rng.permutation(len(idx))]
        fold[perm] = (offset + np.arange(len(perm))) % k
        offset += len(perm)
    return fold


@dataclass
class CrossValidation:
    fold_accuracies: list[float]
    mean_accuracy: float
    folds: np.ndarray
    pooled: EvaluationReport  # out-of-fold predictions over the whole table
    selections: list[list[str]] = field(default_factory=list)

    def scalars(self) -> dict:
        return {
            "k": len(self.fold_accuracies),
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "pooled": self.pooled.scalars(),
            "selections": self.selections,
        }


def kfold_cv(table, params, k: int = 5, seed: int = 42, select=None, n_jobs: int = 1) -> CrossValidation:
    """Stratified k-fold; ``select(train_table) -> feature names`` is refit per fold."""
    folds = kfold_assign(table.y, k, seed)
    votes = np.zeros((len(table.y), len(table.labels)), dtype=np.int64)
    accs, selections = [], []
    for i in range(k):
        train_rows = np.flatnonzero(folds != i)
        test_rows = np.flatnonzero(folds == i)
        train = table.subset(train_rows)
        names = select(train) if select is not None else list(table.feature_names)
        selections.append(list(names))
        sub = type(train)(train.plant, train.labels, list(names), train.columns(names), train.y)
        model = fit_forest(sub, params, n_jobs=n_jobs)
        v = model.votes(table.subset(test_rows).columns(names))
        votes[test_rows] = v
        accs.append(float((v.argmax(axis=1) == table.y[test_rows]).mean()))
    pooled = report_from_predictions(table.y, votes, table.labels)
    return CrossValidation(accs, float(np.mean(accs)), folds, pooled, selections)


# --------------------------------------------------------------- file output


def write_metrics_json(report: EvaluationReport, path, extra: dict | None = None) -> None:
    doc = report.scalars()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred"] + list(cm.labels))
        for lab, row in zip(cm.labels, cm.counts):
            w.writerow([lab] + [int(v) for v in row])


def read_confusion_csv(path) -> ConfusionMatrix:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return ConfusionMatrix(rows[0][1:], np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64))


def write_roc_csv(curve, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for f, t in curve:
            w.writerow(["%.17g" % f, "%.17g" % t])


def read_roc_csv(path) -> list[tuple[float, float]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return [(float(a), float(b)) for a, b in rows]
