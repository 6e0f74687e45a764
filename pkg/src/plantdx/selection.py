"""Correlation-based feature selection.

Two rules applied in order: redundant pairs lose their later member
(canonical feature order), then features weakly correlated with the integer
class target are dropped. A floor keeps at least two features.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, TooFewSamples

TARGET = "target"
PAIRWISE = "pairwise_redundant"
LOW_TARGET = "low_target_correlation"
FLOOR = "floor_retained"
MIN_KEPT = 2


def pearson(x, y) -> float:
    """Pearson r; 0 when either input has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise TooFewSamples("pearson needs at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        return 0.0
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class CorrelationMatrix:
    names: list[str]  # features, then "target" last
    values: np.ndarray

    @property
    def features(self) -> list[str]:
        return self.names[:-1]

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.names.index(a), self.names.index(b)])

    def target_r(self, name: str) -> float:
        return self.get(name, TARGET)

    def submatrix(self, keep) -> "CorrelationMatrix":
        names = [n for n in self.features if n in set(keep)] + [TARGET]
        pos = [self.names.index(n) for n in names]
        return CorrelationMatrix(names, self.values[np.ix_(pos, pos)])


def correlation_from_arrays(X, y, names) -> CorrelationMatrix:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2:
        raise TooFewSamples("correlation matrix needs at least 2 rows")
    cols = np.column_stack([X, y])
    d = cols.shape[1]
    vals = np.eye(d)
    for a in range(d):
        for b in range(a + 1, d):
            vals[a, b] = vals[b, a] = pearson(cols[:, a], cols[:, b])
    return CorrelationMatrix(list(names) + [TARGET], vals)


def correlation_matrix(table, plant: str | None = None) -> CorrelationMatrix:
    """Feature/target correlations for one plant.

    ``table`` is a :class:`FeatureTable` or a :class:`FeatureCache` plus plant name.
    """
    if plant is not None and hasattr(table, "for_plant"):
        table = table.for_plant(plant)
    return correlation_from_arrays(table.X, table.y, table.feature_names)


@dataclass
class SelectionResult:
    """``dropped`` also lists floor-restored features (reason ``floor_retained``),
    which are therefore present in ``kept`` as well."""

    kept: list[str]
    dropped: list[tuple[str, str]] = field(default_factory=list)


def select_features(corr: CorrelationMatrix, pair_threshold: float = 0.95,
                    target_min: float = 0.1) -> SelectionResult:
    names = corr.features
    removed: dict[str, str] = {}
    for a_pos, a in enumerate(names):
        if a in removed:
            continue
        for b in names[a_pos + 1:]:
            if b not in removed and abs(corr.get(a, b)) >= pair_threshold:
                removed[b] = PAIRWISE
    for n in names:
        if n not in removed and abs(corr.target_r(n)) < target_min:
            removed[n] = LOW_TARGET

    kept = [n for n in names if n not in removed]
    floor_pick: list[str] = []
    need = min(MIN_KEPT, len(names)) - len(kept)
    if need > 0:
        candidates = [n for n in names if n in removed]
        # stable sort keeps canonical order among equal |r|
        candidates.sort(key=lambda n: -abs(corr.target_r(n)))
        floor_pick = candidates[:need]
        kept = [n for n in names if n not in removed or n in floor_pick]

    dropped = [(n, removed[n]) for n in names if n in removed and n not in floor_pick]
    dropped += [(n, FLOOR) for n in names if n in floor_pick]
    return SelectionResult(kept, dropped)


def write_correlation_csv(corr: CorrelationMatrix, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + corr.names)
        for name, row in zip(corr.names, corr.values):
            w.writerow([name] + ["%.17g" % v for v in row])


def read_correlation_csv(path) -> CorrelationMatrix:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0][1:]
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64)
    return CorrelationMatrix(names, values)
