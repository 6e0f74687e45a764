"""Slow, obviously-correct reference implementations used only by tests.

Nothing here imports the package code paths it is checked against.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def brute_otsu(pixels) -> int:
    vals = [int(v) for v in np.asarray(pixels).ravel()]
    n = len(vals)
    best_t, best = 0, Fraction(-1)
    for t in range(256):
        c0 = [v for v in vals if v <= t]
        c1 = [v for v in vals if v > t]
        if not c0 or not c1:
            var = Fraction(0)
        else:
            w0, w1 = Fraction(len(c0), n), Fraction(len(c1), n)
            mu0, mu1 = Fraction(sum(c0), len(c0)), Fraction(sum(c1), len(c1))
            var = w0 * w1 * (mu1 - mu0) ** 2
        if var > best:
            best_t, best = t, var
    return best_t


def dense_gaussian(img, sigma=1.0, size=5):
    """Full 2-D kernel, replicate padding, float output (unrounded)."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    half = size // 2
    ker = np.array([[math.exp(-(i * i + j * j) / (2 * sigma * sigma)) for j in range(-half, half + 1)]
                    for i in range(-half, half + 1)])
    ker /= ker.sum()
    out = np.zeros_like(img)
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for i in range(-half, half + 1):
                for j in range(-half, half + 1):
                    rr = min(max(r + i, 0), h - 1)
                    cc = min(max(c + j, 0), w - 1)
                    acc += ker[i + half, j + half] * img[rr, cc]
            out[r, c] = acc
    return out, ker


def set_close(mask, size=5):
    """Closing by set arithmetic on the unbounded plane, restricted to the frame."""
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    half = size // 2
    offs = [(i, j) for i in range(-half, half + 1) for j in range(-half, half + 1)]
    pts = {(int(r), int(c)) for r, c in np.argwhere(m)}
    dil = {(r + i, c + j) for r, c in pts for i, j in offs}
    out = np.zeros_like(m)
    for r in range(h):
        for c in range(w):
            out[r, c] = all((r + i, c + j) in dil for i, j in offs)
    return out


def components8(mask):
    """8-connected components by BFS, as a list of pixel sets in raster order of discovery."""
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    seen = np.zeros_like(m)
    comps = []
    for r in range(h):
        for c in range(w):
            if m[r, c] and not seen[r, c]:
                comp, stack = set(), [(r, c)]
                seen[r, c] = True
                while stack:
                    y, x = stack.pop()
                    comp.add((y, x))
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            yy, xx = y + dy, x + dx
                            if 0 <= yy < h and 0 <= xx < w and m[yy, xx] and not seen[yy, xx]:
                                seen[yy, xx] = True
                                stack.append((yy, xx))
                comps.append(comp)
    return comps


def pair_counts(gray, mask, levels, dx=1, dy=0):
    g = np.asarray(gray)
    m = np.asarray(mask, dtype=bool)
    h, w = g.shape
    P = [[0] * levels for _ in range(levels)]
    for r in range(h):
        for c in range(w):
            r2, c2 = r + dy, c + dx
            if 0 <= r2 < h and 0 <= c2 < w and m[r, c] and m[r2, c2]:
                i, j = int(g[r, c]), int(g[r2, c2])
                P[i][j] += 1
                P[j][i] += 1
    return P


def haralick_closed_form(P):
    P = [[float(v) for v in row] for row in np.asarray(P)]
    n = len(P)
    if all(v == 0 for row in P for v in row):
        return (0.0, 0.0, 0.0, 0.0, 0.0)
    contrast = math.fsum(P[i][j] * (i - j) ** 2 for i in range(n) for j in range(n))
    dissim = math.fsum(P[i][j] * abs(i - j) for i in range(n) for j in range(n))
    homog = math.fsum(P[i][j] / (1 + (i - j) ** 2) for i in range(n) for j in range(n))
    energy = math.sqrt(math.fsum(P[i][j] ** 2 for i in range(n) for j in range(n)))
    px = [math.fsum(P[i]) for i in range(n)]
    py = [math.fsum(P[i][j] for i in range(n)) for j in range(n)]
    mi = math.fsum(i * px[i] for i in range(n))
    mj = math.fsum(j * py[j] for j in range(n))
    si = math.sqrt(math.fsum(px[i] * (i - mi) ** 2 for i in range(n)))
    sj = math.sqrt(math.fsum(py[j] * (j - mj) ** 2 for j in range(n)))
    if si * sj == 0:
        corr = 1.0
    else:
        corr = math.fsum(P[i][j] * (i - mi) * (j - mj) for i in range(n) for j in range(n)) / (si * sj)
    return (contrast, dissim, homog, energy, corr)


def naive_pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        return 0.0
    return sxy / math.sqrt(sxx * syy)


def _gini_frac(labels, k):
    n = len(labels)
    return 1 - sum(Fraction(labels.count(c), n) ** 2 for c in range(k))


def brute_best_split(X, y, features, k):
    """Every (feature, midpoint) pair scored with exact fractions; first minimum wins."""
    X = [[float(v) for v in row] for row in X]
    y = [int(v) for v in y]
    n = len(y)
    if n < 2 or len(set(y)) == 1:
        return None
    best = None
    for f in sorted(features):
        vals = sorted(set(row[f] for row in X))
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2
            if t >= b:
                t = a
            left = [y[i] for i in range(n) if X[i][f] <= t]
            right = [y[i] for i in range(n) if X[i][f] > t]
            score = Fraction(len(left), n) * _gini_frac(left, k) + Fraction(len(right), n) * _gini_frac(right, k)
            if best is None or score < best[2]:
                best = (f, t, score)
    return best


def cart_fit(X, y, k):
    """Plain recursive CART using all features; returns a nested tuple tree."""
    split = brute_best_split(X, y, range(len(X[0])), k)
    if split is None:
        counts = [list(y).count(c) for c in range(k)]
        return ("leaf", counts.index(max(counts)))
    f, t, _ = split
    li = [i for i in range(len(y)) if X[i][f] <= t]
    ri = [i for i in range(len(y)) if X[i][f] > t]
    return ("node", f, t,
            cart_fit([X[i] for i in li], [y[i] for i in li], k),
            cart_fit([X[i] for i in ri], [y[i] for i in ri], k))


def cart_predict(tree, x):
    while tree[0] == "node":
        _, f, t, left, right = tree
        tree = left if x[f] <= t else right
    return tree[1]


def mann_whitney_auc(labels, scores):
    pos = [s for l, s in zip(labels, scores) if l]
    neg = [s for l, s in zip(labels, scores) if not l]
    total = Fraction(0)
    for p in pos:
        for q in neg:
            total += 1 if p > q else (Fraction(1, 2) if p == q else 0)
    return total / (len(pos) * len(neg))
