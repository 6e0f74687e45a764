"""End-to-end glue: batch extraction, per-plant training and evaluation."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import (
    DatasetIndex,
    FeatureCache,
    FeatureTable,
    SplitAssignment,
    load_image,
    qualified_label,
    stratified_split,
)
from .errors import DecodeError, EmptyForeground
from .evaluation import CrossValidation, EvaluationReport, evaluate_model, kfold_cv
from .features import FEATURE_NAMES, FeatureVector, extract_feature_vector
from .forest import ForestModel, ForestParams, fit_forest
from .selection import CorrelationMatrix, SelectionResult, correlation_matrix, select_features

log = logging.getLogger(__name__)


def extract_image_file(path) -> FeatureVector:
    return extract_feature_vector(load_image(path))


def _extract_one(entry):
    path, plant, label = entry
    try:
        values = extract_image_file(path).as_array()
    except (DecodeError, EmptyForeground) as exc:
        return path, qualified_label(plant, label), None, f"{type(exc).__name__}: {exc}"
    return path, qualified_label(plant, label), values, None


def extract_dataset(index: DatasetIndex, workers: int = 1) -> FeatureCache:
    """Features for every indexed image, in index order; failing images are logged and skipped."""
    entries = list(index.entries)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_extract_one, entries, chunksize=16))
    else:
        results = [_extract_one(e) for e in entries]
    paths, labels, rows = [], [], []
    for path, label, values, err in results:
        if err is not None:
            log.warning("skipping %s (%s)", path, err)
            continue
        paths.append(path)
        labels.append(label)
        rows.append(values)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(FEATURE_NAMES))
    return FeatureCache(paths, labels, values)


@dataclass(frozen=True)
class SelectionConfig:
    enabled: bool = True
    pair_threshold: float = 0.95
    target_min: float = 0.1

    def choose(self, train: FeatureTable) -> tuple[list[str], SelectionResult | None, CorrelationMatrix]:
        corr = correlation_matrix(train)
        if not self.enabled:
            return list(train.feature_names), None, corr
        result = select_features(corr, self.pair_threshold, self.target_min)
        return result.kept, result, corr


def restrict(table: FeatureTable, names) -> FeatureTable:
    names = list(names)
    return FeatureTable(table.plant, list(table.labels), names, table.columns(names), table.y,
                        list(table.image_paths))


@dataclass
class TrainResult:
    model: ForestModel
    split: SplitAssignment
    selection: SelectionResult | None
    correlation: CorrelationMatrix
    report: EvaluationReport | None


def train_plant(table: FeatureTable, params: ForestParams, selection: SelectionConfig = SelectionConfig(),
                test_fraction: float = 0.2, n_jobs: int = 1) -> TrainResult:
    """Split, select on the training part, fit, and evaluate on the held-out part."""
    split = stratified_split(table.y, test_fraction, params.seed)
    train = table.subset(split.train_indices)
    names, result, corr = selection.choose(train)
    model = fit_forest(restrict(train, names), params, n_jobs=n_jobs)
    report = None
    if split.test_indices:
        report = evaluate_model(model, table.subset(split.test_indices))
    return TrainResult(model, split, result, corr, report)


def holdout_table(table: FeatureTable, test_fraction: float, seed: int) -> FeatureTable:
    return table.subset(stratified_split(table.y, test_fraction, seed).test_indices)


def crossval_plant(table: FeatureTable, params: ForestParams, selection: SelectionConfig = SelectionConfig(),
                   k: int = 5, n_jobs: int = 1) -> CrossValidation:
    select = (lambda train: selection.choose(train)[0]) if selection.enabled else None
    return kfold_cv(table, params, k=k, seed=params.seed, select=select, n_jobs=n_jobs)
