"""Per-image shape, colour and texture features."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import EmptyForeground
from .imaging import hue_image, segment_foreground, to_grayscale

FEATURE_NAMES: tuple[str, ...] = (
    "area",
    "perimeter",
    "mean_r",
    "mean_g",
    "mean_b",
    "std_r",
    "std_g",
    "std_b",
    "green_ratio",
    "non_green_ratio",
    "glcm_contrast",
    "glcm_dissimilarity",
    "glcm_homogeneity",
    "glcm_energy",
    "glcm_correlation",
)

GREEN_HUE = (30.0, 70.0)


@dataclass(frozen=True)
class FeatureVector:
    area: float
    perimeter: float
    mean_r: float
    mean_g: float
    mean_b: float
    std_r: float
    std_g: float
    std_b: float
    green_ratio: float
    non_green_ratio: float
    glcm_contrast: float
    glcm_dissimilarity: float
    glcm_homogeneity: float
    glcm_energy: float
    glcm_correlation: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    def as_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_values(cls, values) -> "FeatureVector":
        return cls(*(float(v) for v in values))


assert tuple(f.name for f in fields(FeatureVector)) == FEATURE_NAMES


# Moore neighbourhood in clockwise order starting from west, as (drow, dcol).
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


def trace_boundary(mask: np.ndarray) -> list[tuple[int, int]]:
    """Moore-neighbour trace of the outer boundary of the first component in raster order.

    Returns the closed walk as a list of pixels with the start repeated at the
    end. Termination: the walk stops as soon as a (pixel, move) transition
    repeats, and the cycle starting at that transition's first occurrence is
    returned.
    """
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    coords = np.argwhere(m)
    if len(coords) == 0:
        raise EmptyForeground("mask has no foreground pixels")
    start = (int(coords[0][0]), int(coords[0][1]))

    def fg(r, c):
        return 0 <= r < h and 0 <= c < w and m[r, c]

    p = start
    back = 0  # direction index from p to its (background) backtrack pixel
    path = [p]
    seen: dict[tuple[tuple[int, int], int], int] = {}
    limit = 8 * int(m.sum()) + 16
    while len(path) <= limit:
        for i in range(1, 9):
            k = (back + i) % 8
            dr, dc = _MOORE[k]
            q = (p[0] + dr, p[1] + dc)
            if fg(*q):
                break
        else:
            return [start]  # isolated pixel
        key = (p, k)
        if key in seen:
            first = seen[key]
            return path[first:]
        seen[key] = len(path) - 1
        pr, pc = _MOORE[(k - 1) % 8]
        b = (p[0] + pr, p[1] + pc)
        back = _MOORE_INDEX[(b[0] - q[0], b[1] - q[1])]
        p = q
        path.append(p)
    raise RuntimeError("boundary trace did not close")


def extract_shape(mask: np.ndarray) -> tuple[float, float]:
    """Area as pixel count, perimeter as the length of the traced outer boundary."""
    m = np.asarray(mask, dtype=bool)
    area = int(m.sum())
    if area == 0:
        raise EmptyForeground("mask has no foreground pixels")
    walk = trace_boundary(m)
    diagonal_steps = 0
    straight_steps = 0
    for (r0, c0), (r1, c1) in zip(walk, walk[1:]):
        if r0 != r1 and c0 != c1:
            diagonal_steps += 1
        else:
            straight_steps += 1
    perimeter = straight_steps + diagonal_steps * math.sqrt(2.0)
    return float(area), float(perimeter)


def extract_color(img: np.ndarray, mask: np.ndarray):
    """Return ``(means, stds, green_ratio, non_green_ratio)``.

    Means and population stds are taken over foreground pixels only. The
    green ratio counts hue in [30, 70] over *all* pixels of the image.
    """
    img = np.asarray(img)
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise EmptyForeground("mask has no foreground pixels")
    fg = img[m].astype(np.float64)
    means = tuple(float(v) for v in fg.mean(axis=0))
    stds = tuple(float(v) for v in fg.std(axis=0))
    hue = hue_image(img)
    lo, hi = GREEN_HUE
    green = int(np.count_nonzero((hue >= lo) & (hue <= hi)))
    green_ratio = green / hue.size
    return means, stds, green_ratio, 1.0 - green_ratio


def quantize(gray: np.ndarray, levels: int) -> np.ndarray:
    """Map 0..255 onto 0..levels-1 by integer scaling (identity at 256)."""
    g = np.asarray(gray, dtype=np.int64)
    if levels == 256:
        return g
    return g * levels // 256


def glcm_counts(gray: np.ndarray, mask: np.ndarray, levels: int = 256, offset=(1, 0)) -> np.ndarray:
    """Symmetric co-occurrence counts of foreground pairs ``(p, p + offset)``."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    g = np.asarray(gray, dtype=np.int64)
    m = np.asarray(mask, dtype=bool)
    if g.size and (g.min() < 0 or g.max() >= levels):
        raise ValueError(f"gray values must lie in [0, {levels})")
    dx, dy = offset
    h, w = g.shape
    r0, r1 = max(0, -dy), min(h, h - dy)
    c0, c1 = max(0, -dx), min(w, w - dx)
    counts = np.zeros((levels, levels), dtype=np.int64)
    if r1 <= r0 or c1 <= c0:
        return counts
    a = g[r0:r1, c0:c1]
    b = g[r0 + dy:r1 + dy, c0 + dx:c1 + dx]
    valid = m[r0:r1, c0:c1] & m[r0 + dy:r1 + dy, c0 + dx:c1 + dx]
    i = a[valid]
    j = b[valid]
    flat = np.bincount(i * levels + j, minlength=levels * levels).reshape(levels, levels)
    counts += flat + flat.T
    return counts


def compute_glcm(gray: np.ndarray, mask: np.ndarray, levels: int = 256, offset=(1, 0)) -> np.ndarray:
    """Normalised symmetric GLCM; a zero matrix when no foreground pair exists."""
    counts = glcm_counts(gray, mask, levels, offset)
    total = counts.sum()
    if total == 0:
        return np.zeros(counts.shape, dtype=np.float64)
    return counts / total


def haralick(P: np.ndarray) -> tuple[float, float, float, float, float]:
    """Contrast, dissimilarity, homogeneity, energy (sqrt of ASM), correlation."""
    P = np.asarray(P, dtype=np.float64)
    if not P.any():
        return 0.0, 0.0, 0.0, 0.0, 0.0
    n = P.shape[0]
    i, j = np.indices((n, n), dtype=np.float64)
    diff = i - j
    contrast = float((P * diff * diff).sum())
    dissimilarity = float((P * np.abs(diff)).sum())
    homogeneity = float((P / (1.0 + diff * diff)).sum())
    energy = float(math.sqrt((P * P).sum()))
    levels = np.arange(n, dtype=np.float64)
    px = P.sum(axis=1)
    py = P.sum(axis=0)
    mu_i = float((levels * px).sum())
    mu_j = float((levels * py).sum())
    sd_i = math.sqrt(float((px * (levels - mu_i) ** 2).sum()))
    sd_j = math.sqrt(float((py * (levels - mu_j) ** 2).sum()))
    if sd_i * sd_j == 0:
        correlation = 1.0
    else:
        correlation = float((P * (i - mu_i) * (j - mu_j)).sum()) / (sd_i * sd_j)
    return contrast, dissimilarity, homogeneity, energy, correlation


def features_from_segmentation(segmented: np.ndarray, mask: np.ndarray) -> FeatureVector:
    area, perimeter = extract_shape(mask)
    means, stds, green, non_green = extract_color(segmented, mask)
    texture = haralick(compute_glcm(to_grayscale(segmented), mask))
    return FeatureVector(area, perimeter, *means, *stds, green, non_green, *texture)


def extract_feature_vector(img: np.ndarray) -> FeatureVector:
    segmented, mask = segment_foreground(img)
    return features_from_segmentation(segmented, mask)
