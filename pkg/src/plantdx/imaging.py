"""Foreground segmentation chain and colour-space helpers.

Images are plain numpy arrays:

* RGB raster: ``(H, W, 3)`` uint8
* gray image: ``(H, W)`` uint8
* bit mask:   ``(H, W)`` bool, True on the leaf
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .errors import EmptyForeground, InvalidSigma

KERNEL_SIZE = 5
CLOSE_SIZE = 5


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Luma 0.299/0.587/0.114, rounded half up in exact integer arithmetic."""
    rgb = np.asarray(img, dtype=np.int64)
    acc = 299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2]
    return np.clip((acc + 500) // 1000, 0, 255).astype(np.uint8)


def gaussian_kernel_1d(sigma: float = 1.0, size: int = KERNEL_SIZE) -> np.ndarray:
    if not sigma > 0:
        raise InvalidSigma(f"sigma must be > 0, got {sigma}")
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _convolve_rows(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    half = len(k) // 2
    padded = np.pad(a, ((0, 0), (half, half)), mode="edge")
    out = np.zeros_like(a, dtype=np.float64)
    w = a.shape[1]
    for i, weight in enumerate(k):
        out += weight * padded[:, i:i + w]
    return out


def gaussian_blur(img: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Separable 5x5 Gaussian with replicated borders; output rounded to uint8."""
    k = gaussian_kernel_1d(sigma)
    a = np.asarray(img, dtype=np.float64)
    tmp = _convolve_rows(a, k)
    out = _convolve_rows(tmp.T, k).T
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def otsu_threshold(img: np.ndarray) -> int:
    """Smallest t maximising between-class variance, classes ``<= t`` / ``> t``.

    Comparisons run on exact integers: up to the constant 1/N^2 the
    between-class variance is ``(s1*n0 - s0*n1)**2 / (n0*n1)``.
    """
    hist = np.bincount(np.asarray(img, dtype=np.uint8).ravel(), minlength=256)
    hist = [int(h) for h in hist]
    total_n = sum(hist)
    total_s = sum(i * h for i, h in enumerate(hist))
    best_t, best_num, best_den = 0, 0, 1
    n0 = s0 = 0
    for t in range(256):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        s1 = total_s - s0
        num = (s1 * n0 - s0 * n1) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def _border_count(mask: np.ndarray) -> int:
    h, w = mask.shape
    if h <= 2 or w <= 2:
        return int(mask.sum())
    return int(mask[0].sum() + mask[-1].sum() + mask[1:-1, 0].sum() + mask[1:-1, -1].sum())


def binarize(img: np.ndarray, t: int) -> np.ndarray:
    """Pick the side of ``t`` that touches the image border least (tie: brighter side)."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold out of range: {t}")
    above = np.asarray(img) > t
    below = ~above
    if _border_count(below) < _border_count(above):
        return below
    return above


def _dilate_square(mask: np.ndarray, size: int) -> np.ndarray:
    half = size // 2
    out = mask.copy()
    for axis in (0, 1):
        padded = np.pad(out, [(half, half) if a == axis else (0, 0) for a in (0, 1)])
        n = out.shape[axis]
        acc = np.zeros_like(out)
        for i in range(size):
            acc |= np.take(padded, range(i, i + n), axis=axis)
        out = acc
    return out


def _erode_square(mask: np.ndarray, size: int) -> np.ndarray:
    half = size // 2
    out = mask.copy()
    for axis in (0, 1):
        padded = np.pad(out, [(half, half) if a == axis else (0, 0) for a in (0, 1)])
        n = out.shape[axis]
        acc = np.ones_like(out)
        for i in range(size):
            acc &= np.take(padded, range(i, i + n), axis=axis)
        out = acc
    return out


def morph_close(mask: np.ndarray, size: int = CLOSE_SIZE) -> np.ndarray:
    """Binary closing with a ``size x size`` square.

    The input is embedded in an unbounded background plane: dilation is
    allowed to spill into a margin around the frame, erosion runs on that
    enlarged canvas, and the result is cropped back.
    """
    m = np.asarray(mask, dtype=bool)
    margin = size // 2
    canvas = np.pad(m, margin)
    closed = _erode_square(_dilate_square(canvas, size), size)
    return closed[margin:-margin, margin:-margin] if margin else closed


_EIGHT = np.ones((3, 3), dtype=bool)


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Keep the largest 8-connected component; ties go to the first in raster order."""
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def foreground_mask(img: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    gray = gaussian_blur(to_grayscale(img), sigma)
    mask = morph_close(binarize(gray, otsu_threshold(gray)))
    return largest_component(mask)


def segment_foreground(img: np.ndarray, sigma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(segmented_rgb, mask)``; background pixels become black."""
    img = np.asarray(img, dtype=np.uint8)
    mask = foreground_mask(img, sigma)
    if not mask.any():
        raise EmptyForeground("segmentation produced an empty foreground")
    segmented = np.where(mask[..., None], img, 0).astype(np.uint8)
    return segmented, mask


def rgb_to_hsv(pixel) -> tuple[float, float, float]:
    """Hexcone HSV with hue in half-degrees: h in [0, 180), s and v in [0, 255]."""
    r, g, b = (float(c) for c in pixel)
    mx, mn = max(r, g, b), min(r, g, b)
    d = mx - mn
    if d == 0:
        return 0.0, 0.0, mx
    if mx == r:
        deg = 60.0 * math.fmod((g - b) / d, 6.0)
    elif mx == g:
        deg = 60.0 * ((b - r) / d + 2.0)
    else:
        deg = 60.0 * ((r - g) / d + 4.0)
    if deg < 0:
        deg += 360.0
    if deg >= 360.0:
        deg = 0.0
    return deg / 2.0, 255.0 * d / mx, mx


def hue_image(img: np.ndarray) -> np.ndarray:
    """Vectorised hue channel of :func:`rgb_to_hsv` (half-degrees)."""
    rgb = np.asarray(img, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    d = mx - mn
    safe = np.where(d == 0, 1.0, d)
    deg = np.where(
        mx == r,
        60.0 * np.fmod((g - b) / safe, 6.0),
        np.where(mx == g, 60.0 * ((b - r) / safe + 2.0), 60.0 * ((r - g) / safe + 4.0)),
    )
    deg = np.where(deg < 0, deg + 360.0, deg)
    deg = np.where(deg >= 360.0, 0.0, deg)
    return np.where(d == 0, 0.0, deg / 2.0)
