"""PlantVillage-style dataset discovery, splits and the feature cache CSV."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DecodeError,
    HeaderMismatch,
    InvalidFraction,
    MalformedRow,
    NoClassesFound,
    RootNotFound,
    UnknownPlant,
)
from .features import FEATURE_NAMES

log = logging.getLogger(__name__)

SEPARATOR = "___"
IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png"}
CACHE_HEADER: tuple[str, ...] = ("image_path", "label") + FEATURE_NAMES


def split_class_dir(name: str) -> tuple[str, str] | None:
    plant, sep, label = name.partition(SEPARATOR)
    if not sep or not plant or not label:
        return None
    return plant, label


def qualified_label(plant: str, label: str) -> str:
    return f"{plant}{SEPARATOR}{label}"


@dataclass(frozen=True)
class DatasetIndex:
    root_path: Path
    entries: tuple[tuple[str, str, str], ...]  # (image_path, plant, class_label)
    plants: dict[str, list[str]]
    label_ids: dict[tuple[str, str], int]


def scan_dataset(root) -> DatasetIndex:
    root = Path(root)
    if not root.is_dir():
        raise RootNotFound(f"dataset root not found: {root}")
    classes: dict[str, set[str]] = {}
    entries = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        parsed = split_class_dir(sub.name)
        if parsed is None:
            log.warning("skipping directory %s: not named <Plant>___<Class>", sub.name)
            continue
        plant, label = parsed
        classes.setdefault(plant, set()).add(label)
        for f in sub.iterdir():
            if f.is_file() and f.suffix.lower() in IMAGE_EXTENSIONS:
                entries.append((str(f), plant, label))
    if not classes:
        raise NoClassesFound(f"no <Plant>___<Class> directories under {root}")
    entries.sort(key=lambda e: e[0])
    plants = {p: sorted(labels) for p, labels in sorted(classes.items())}
    label_ids = {(p, lab): i for p, labels in plants.items() for i, lab in enumerate(labels)}
    return DatasetIndex(root, tuple(entries), plants, label_ids)


def load_image(path) -> np.ndarray:
    """Decode to an ``(H, W, 3)`` uint8 array; alpha is discarded."""
    try:
        with Image.open(path) as im:
            im.load()
            rgb = im.convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    arr = np.asarray(rgb, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DecodeError(f"cannot decode {path}: empty image")
    return arr


def decode_image_bytes(data: bytes) -> np.ndarray:
    import io

    return load_image(io.BytesIO(data))


@dataclass(frozen=True)
class SplitAssignment:
    train_indices: list[int]
    test_indices: list[int]
    seed: int
    test_fraction: float


def holdout_count(n: int, test_fraction: float) -> int:
    """floor(fraction * n), keeping at least one training sample for classes below 5."""
    k = math.floor(Fraction(repr(float(test_fraction))) * n)
    if n < 5:
        k = min(k, n - 1)
    return max(k, 0)


def stratified_split(labels, test_fraction: float, seed: int) -> SplitAssignment:
    if not 0 < test_fraction < 1:
        raise InvalidFraction(f"test fraction must lie in (0, 1), got {test_fraction}")
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("labels must be nonempty")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        perm = idx[rng.permutation(len(idx))]
        k = holdout_count(len(idx), test_fraction)
        test.extend(int(i) for i in perm[:k])
        train.extend(int(i) for i in perm[k:])
    return SplitAssignment(sorted(train), sorted(test), seed, test_fraction)


@dataclass
class FeatureCache:
    """Rows of extracted features. ``labels`` hold ``<Plant>___<Class>`` names."""

    image_paths: list[str] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    values: np.ndarray = field(default_factory=lambda: np.empty((0, len(FEATURE_NAMES))))
    header: tuple[str, ...] = CACHE_HEADER

    def __len__(self):
        return len(self.image_paths)

    def __eq__(self, other):
        if not isinstance(other, FeatureCache):
            return NotImplemented
        return (
            self.image_paths == other.image_paths
            and self.labels == other.labels
            and self.values.shape == other.values.shape
            and np.array_equal(self.values.view(np.uint64), other.values.view(np.uint64))
        )

    def plants(self) -> list[str]:
        return sorted({split_class_dir(lab)[0] for lab in self.labels})

    def for_plant(self, plant: str) -> "FeatureTable":
        rows = [i for i, lab in enumerate(self.labels) if split_class_dir(lab)[0] == plant]
        if not rows:
            raise UnknownPlant(f"plant {plant!r} not present (have: {', '.join(self.plants())})")
        classes = sorted({split_class_dir(self.labels[i])[1] for i in rows})
        ids = {c: k for k, c in enumerate(classes)}
        y = np.array([ids[split_class_dir(self.labels[i])[1]] for i in rows], dtype=np.int64)
        return FeatureTable(
            plant=plant,
            labels=classes,
            feature_names=list(FEATURE_NAMES),
            X=self.values[rows].copy(),
            y=y,
            image_paths=[self.image_paths[i] for i in rows],
        )


@dataclass
class FeatureTable:
    """Labeled per-plant feature matrix; ``y`` indexes into ``labels``."""

    plant: str
    labels: list[str]
    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    image_paths: list[str] = field(default_factory=list)

    def subset(self, rows) -> "FeatureTable":
        rows = list(rows)
        return FeatureTable(
            self.plant,
            list(self.labels),
            list(self.feature_names),
            self.X[rows],
            self.y[rows],
            [self.image_paths[i] for i in rows] if self.image_paths else [],
        )

    def columns(self, names) -> np.ndarray:
        pos = [self.feature_names.index(n) for n in names]
        return self.X[:, pos]


def format_real(v: float) -> str:
    return "%.17g" % v


def write_feature_cache(table: FeatureCache, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CACHE_HEADER)
        for p, lab, row in zip(table.image_paths, table.labels, table.values):
            w.writerow([p, lab, *(format_real(float(v)) for v in row)])


def read_feature_cache(path) -> FeatureCache:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"feature cache not found: {path}")
    paths, labels, values = [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CACHE_HEADER:
            raise HeaderMismatch(f"{path}: header does not match {','.join(CACHE_HEADER)}")
        for row in reader:
            line = reader.line_num
            if len(row) != len(CACHE_HEADER):
                raise MalformedRow(line, f"expected {len(CACHE_HEADER)} fields, got {len(row)}")
            if split_class_dir(row[1]) is None:
                raise MalformedRow(line, f"label {row[1]!r} is not <Plant>___<Class>")
            try:
                vals = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise MalformedRow(line, f"non-numeric feature: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise MalformedRow(line, "non-finite feature value")
            paths.append(row[0])
            labels.append(row[1])
            values.append(vals)
    arr = np.array(values, dtype=np.float64).reshape(len(values), len(FEATURE_NAMES))
    return FeatureCache(paths, labels, arr)
