"""Random forest of CART trees (Gini impurity) with a versioned JSON model format.

Tie-breaking is exact: split scores are compared as rationals so that the
lowest feature index, then the lowest threshold, wins among equal splits.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import CorruptModel, DegenerateTrainingSet, EmptyNode, MissingFeature, UnsupportedVersion

FORMAT_VERSION = 1
MASK64 = (1 << 64) - 1


def gini(counts) -> float:
    counts = [int(c) for c in counts]
    n = sum(counts)
    if n <= 0:
        raise EmptyNode("gini of an empty node")
    return 1.0 - sum((c / n) ** 2 for c in counts)


class Split(NamedTuple):
    feature: int
    threshold: float
    weighted_gini: float
    impurity_decrease: float


def _feature_scores(x: np.ndarray, y: np.ndarray, k: int):
    """Candidate cuts for one feature.

    Returns ``(positions, thresholds, SL, SR, nL, nR)`` for every cut between
    distinct sorted values, where SL/SR are sums of squared child class counts.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = len(xs)
    distinct = np.flatnonzero(xs[1:] != xs[:-1])
    if distinct.size == 0:
        return None
    onehot = np.zeros((n, k), dtype=np.int64)
    onehot[np.arange(n), ys] = 1
    left = np.cumsum(onehot, axis=0)[distinct]
    total = onehot.sum(axis=0)
    right = total - left
    n_left = distinct + 1
    n_right = n - n_left
    sl = (left * left).sum(axis=1)
    sr = (right * right).sum(axis=1)
    lo = xs[distinct]
    hi = xs[distinct + 1]
    thr = (lo + hi) / 2.0
    thr = np.where(thr >= hi, lo, thr)  # keep "<= threshold" separating lo from hi
    return thr, sl, sr, n_left, n_right


def best_split(X, y, candidate_features: Sequence[int], n_classes: int | None = None) -> Split | None:
    """Exhaustive search for the split minimising weighted child Gini."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if n < 2 or np.all(y == y[0]):
        return None
    k = int(n_classes if n_classes is not None else y.max() + 1)

    per_feature = []
    best = -math.inf
    for f in sorted(int(c) for c in candidate_features):
        res = _feature_scores(X[:, f], y, k)
        if res is None:
            continue
        thr, sl, sr, nl, nr = res
        score = sl / nl + sr / nr
        per_feature.append((f, thr, sl, sr, nl, nr, score))
        best = max(best, float(score.max()))
    if not per_feature:
        return None

    # float screening, exact rational decision
    cutoff = best - 1e-9 * max(1.0, abs(best))
    winner = None
    for f, thr, sl, sr, nl, nr, score in per_feature:
        for i in np.flatnonzero(score >= cutoff):
            exact = Fraction(int(sl[i]) * int(nr[i]) + int(sr[i]) * int(nl[i]), int(nl[i]) * int(nr[i]))
            if winner is None or exact > winner[0]:
                winner = (exact, f, float(thr[i]))
    exact, f, t = winner

    counts = np.bincount(y, minlength=k)
    parent_sq = int((counts * counts).sum())
    weighted = 1 - exact / n
    parent = 1 - Fraction(parent_sq, n * n)
    return Split(f, t, float(weighted), float(parent - weighted))


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: str | int = "sqrt"
    min_samples_split: int = 2
    max_depth: int | None = None
    bootstrap: bool = True
    seed: int = 42

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if isinstance(self.max_features, str) and self.max_features not in ("sqrt", "all"):
            raise ValueError(f"unknown max_features {self.max_features!r}")

    def features_per_split(self, d: int) -> int:
        if self.max_features == "sqrt":
            m = math.isqrt(d)
        elif self.max_features == "all":
            m = d
        else:
            m = int(self.max_features)
        return max(1, min(d, m))

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_features": self.max_features,
            "min_samples_split": self.min_samples_split,
            "max_depth": self.max_depth,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }


@dataclass
class Tree:
    """Array-encoded tree; node 0 is the root and children always follow their parent."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    class_counts: list[list[int]]

    def __post_init__(self):
        k = max((len(c) for c in self.class_counts), default=0)
        counts = np.zeros((len(self.class_counts), k), dtype=np.int64)
        for i, c in enumerate(self.class_counts):
            if c:
                counts[i] = c
        # leaf vote: argmax, ties to the lowest class index
        self._leaf_class = counts.argmax(axis=1) if k else np.zeros(0, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            f = self.feature[cur]
            go_left = X[active, f] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._leaf_class[self.apply(X)]


def fit_tree(X, y, params: ForestParams, rng: np.random.Generator, n_classes: int | None = None) -> Tree:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) != len(y) or len(y) < 1:
        raise ValueError("fit_tree needs matching, nonempty X and y")
    k = int(n_classes if n_classes is not None else y.max() + 1)
    d = X.shape[1]
    m = params.features_per_split(d)

    feature, threshold, left, right, counts = [], [], [], [], []
    # (rows, depth, parent index, is_left)
    stack = [(np.arange(len(y)), 0, -1, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        idx = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = idx
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append([])

        ys = y[rows]
        split = None
        can_split = (
            len(rows) >= params.min_samples_split
            and (params.max_depth is None or depth < params.max_depth)
            and not np.all(ys == ys[0])
        )
        if can_split:
            candidates = np.sort(rng.choice(d, size=m, replace=False))
            split = best_split(X[rows], ys, candidates, k)
        if split is None:
            counts[idx] = [int(c) for c in np.bincount(ys, minlength=k)]
            continue
        feature[idx] = split.feature
        threshold[idx] = split.threshold
        go_left = X[rows, split.feature] <= split.threshold
        # right pushed first so the left subtree is laid out first
        stack.append((rows[~go_left], depth + 1, idx, False))
        stack.append((rows[go_left], depth + 1, idx, True))

    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        counts,
    )


def tree_seed(seed: int, tree_index: int) -> int:
    """SplitMix64 finaliser applied to ``seed + (tree_index + 1) * golden_gamma`` (mod 2^64)."""
    z = (int(seed) + (tree_index + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(tree_seed(seed, tree_index)))


@dataclass
class ForestModel:
    plant: str
    labels: list[str]
    selected_features: list[str]
    params: ForestParams
    trees: list[Tree] = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    def votes(self, X) -> np.ndarray:
        """Per-class vote counts, shape ``(n_samples, n_classes)``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros((len(X), self.n_classes), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            np.add.at(out, (rows, tree.predict(X)), 1)
        return out

    def predict_indices(self, X) -> np.ndarray:
        return self.votes(X).argmax(axis=1)

    def feature_row(self, x) -> np.ndarray:
        """Align a FeatureVector / mapping to ``selected_features``."""
        if hasattr(x, "as_dict"):
            x = x.as_dict()
        if not isinstance(x, Mapping):
            raise TypeError("expected a FeatureVector or a name -> value mapping")
        missing = [n for n in self.selected_features if n not in x]
        if missing:
            raise MissingFeature(f"missing feature(s): {', '.join(missing)}")
        return np.array([float(x[n]) for n in self.selected_features], dtype=np.float64)


@dataclass(frozen=True)
class Prediction:
    label: str
    confidence: float
    votes: dict[str, int]


def predict(model: ForestModel, x) -> Prediction:
    v = model.votes(model.feature_row(x))[0]
    win = int(v.argmax())
    return Prediction(
        model.labels[win],
        int(v[win]) / len(model.trees),
        {lab: int(c) for lab, c in zip(model.labels, v)},
    )


def fit_forest(table, params: ForestParams, n_jobs: int = 1) -> ForestModel:
    """Fit on a FeatureTable whose columns are already the selected features."""
    X = np.asarray(table.X, dtype=np.float64)
    y = np.asarray(table.y, dtype=np.int64)
    k = len(table.labels)
    if X.ndim != 2 or X.shape[1] == 0:
        raise DegenerateTrainingSet("no features to train on")
    if len(y) < 2 or len(np.unique(y)) < 2:
        raise DegenerateTrainingSet("training set needs at least 2 samples and 2 classes")
    n = len(y)

    def grow(t: int) -> Tree:
        rng = tree_rng(params.seed, t)
        rows = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        return fit_tree(X[rows], y[rows], params, rng, k)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(grow, range(params.n_trees)))
    else:
        trees = [grow(t) for t in range(params.n_trees)]
    return ForestModel(table.plant, list(table.labels), list(table.feature_names), params, trees)


# ---------------------------------------------------------------- persistence


def _real(v: float) -> str:
    s = "%.17g" % v
    if not math.isfinite(v):
        raise ValueError(f"non-finite real {v!r} cannot be serialised")
    return s


def _node_json(tree: Tree, i: int) -> str:
    counts = ",".join(str(c) for c in tree.class_counts[i])
    return (
        f'{{"feature":{int(tree.feature[i])},"threshold":{_real(float(tree.threshold[i]))},'
        f'"left":{int(tree.left[i])},"right":{int(tree.right[i])},"class_counts":[{counts}]}}'
    )


def model_to_bytes(model: ForestModel) -> bytes:
    head = {
        "format_version": model.format_version,
        "plant": model.plant,
        "labels": model.labels,
        "selected_features": model.selected_features,
        "params": model.params.to_dict(),
    }
    parts = ["{"]
    for key, val in head.items():
        parts.append(f"  {json.dumps(key)}: {json.dumps(val)},")
    parts.append('  "trees": [')
    for t, tree in enumerate(model.trees):
        nodes = ",\n    ".join(_node_json(tree, i) for i in range(tree.n_nodes))
        tail = "," if t < len(model.trees) - 1 else ""
        parts.append(f"   [\n    {nodes}\n   ]{tail}")
    parts.append("  ]")
    parts.append("}")
    return ("\n".join(parts) + "\n").encode("utf-8")


def save_model(model: ForestModel, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def _require(cond: bool, invariant: str) -> None:
    if not cond:
        raise CorruptModel(f"model invariant violated: {invariant}")


def model_from_dict(doc: dict) -> ForestModel:
    _require(isinstance(doc, dict), "top level is an object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        labels = [str(v) for v in doc["labels"]]
        selected = [str(v) for v in doc["selected_features"]]
        p = doc["params"]
        params = ForestParams(
            n_trees=int(p["n_trees"]),
            max_features=p["max_features"],
            min_samples_split=int(p["min_samples_split"]),
            max_depth=None if p["max_depth"] is None else int(p["max_depth"]),
            bootstrap=bool(p["bootstrap"]),
            seed=int(p["seed"]),
        )
        raw_trees = doc["trees"]
        plant = str(doc["plant"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"model invariant violated: required field missing or malformed ({exc})") from None

    k, d = len(labels), len(selected)
    _require(k >= 1, "labels nonempty")
    _require(d >= 1, "selected_features nonempty")
    _require(isinstance(raw_trees, list) and len(raw_trees) == params.n_trees, "|trees| = n_trees")
    trees = []
    for t, nodes in enumerate(raw_trees):
        _require(isinstance(nodes, list) and len(nodes) >= 1, f"tree {t} has at least one node")
        n = len(nodes)
        feat, thr, lft, rgt, cnt = [], [], [], [], []
        for i, node in enumerate(nodes):
            try:
                f = int(node["feature"])
                th = float(node["threshold"])
                lc, rc = int(node["left"]), int(node["right"])
                cc = [int(c) for c in node["class_counts"]]
            except (KeyError, TypeError, ValueError):
                raise CorruptModel(f"model invariant violated: tree {t} node {i} is malformed") from None
            where = f"tree {t} node {i}"
            if f == -1:
                _require(len(cc) == k, f"{where}: leaf class_counts has one entry per label")
                _require(all(c >= 0 for c in cc) and sum(cc) > 0, f"{where}: leaf counts nonnegative, nonzero")
            else:
                _require(0 <= f < d, f"{where}: feature index < |selected_features|")
                _require(not cc, f"{where}: internal node has empty class_counts")
                _require(i < lc < n and i < rc < n, f"{where}: child index > own index")
                _require(math.isfinite(th), f"{where}: finite threshold")
            feat.append(f)
            thr.append(th)
            lft.append(lc)
            rgt.append(rc)
            cnt.append(cc)
        trees.append(Tree(np.array(feat, dtype=np.int64), np.array(thr), np.array(lft, dtype=np.int64),
                          np.array(rgt, dtype=np.int64), cnt))
    return ForestModel(plant, labels, selected, params, trees, FORMAT_VERSION)


def load_model(path) -> ForestModel:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"model invariant violated: file is valid JSON ({exc})") from None
    return model_from_dict(doc)
