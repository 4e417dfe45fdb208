"""Bagged regression-tree baseline on log-transformed inputs.

Each tree is grown on a bootstrap resample of the training set.  Splits are
axis-aligned thresholds at midpoints between consecutive distinct feature
values, chosen by exhaustive search for the largest reduction in squared
error; leaves store the mean log-biomass.  Prediction is ``exp`` of the mean
leaf value over trees.

Before resampling, training rows are put in a canonical order (sorted by
feature values, then biomass), so a fitted model depends only on the
multiset of records, the seed and the config.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, InputError, MissingField, NonpositiveInput

__all__ = ["FEATURES", "ForestConfig", "Tree", "ForestModel", "fit_forest",
           "fit_forest_arrays", "predict_forest", "feature_matrix"]

# feature name -> record attribute (the model uses the natural log of each)
FEATURES = {"h": "height_m", "d": "diameter_cm", "cd": "crown_diameter_m"}


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 5
    seed: int = 0
    features: tuple = ("h",)
    bootstrap: bool = True

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if self.n_trees < 1 or self.min_leaf < 1 or self.max_depth < 1:
            raise InputError("n_trees, min_leaf and max_depth must all be >= 1")
        if not self.features or any(f not in FEATURES for f in self.features):
            raise InputError(f"features must be a nonempty subset of {sorted(FEATURES)}")
        if len(set(self.features)) != len(self.features):
            raise InputError("duplicate features")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat binary tree.  ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray = field(default=None)

    @classmethod
    def leaf(cls, value, n_samples=1):
        return cls(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                   np.array([float(value)]), np.array([n_samples]))

    @property
    def n_nodes(self):
        return self.feature.size

    def depth(self):
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):  # children always follow their parent
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def apply(self, x):
        """Leaf index for each row of ``x`` (log features)."""
        node = np.zeros(x.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            n = node[idx]
            go_left = x[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict_log(self, x):
        return self.value[self.apply(x)]


def _best_split(x, z, min_leaf):
    """Return (feature, threshold, sse) of the best split, or None."""
    n = z.size
    if n < 2 * min_leaf or z.min() == z.max():
        return None
    zc = z - z.mean()
    parent_sse = float(zc @ zc)
    if parent_sse <= 0.0:
        return None
    best = None
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="stable")
        xs, zs = x[order, j], zc[order]
        csum = np.cumsum(zs)
        csq = np.cumsum(zs * zs)
        i = np.arange(min_leaf - 1, n - min_leaf)  # last index of the left part
        i = i[xs[i] < xs[i + 1]]
        if i.size == 0:
            continue
        nl = i + 1.0
        nr = n - nl
        sse = (csq[i] - csum[i] ** 2 / nl) + ((csq[-1] - csq[i]) - (csum[-1] - csum[i]) ** 2 / nr)
        k = int(np.argmin(sse))
        if best is None or sse[k] < best[2]:
            pos = i[k]
            best = (j, 0.5 * (xs[pos] + xs[pos + 1]), float(sse[k]))
    if best is None or parent_sse - best[2] <= 1e-12 * parent_sse:
        return None
    return best


def _grow(x, z, max_depth, min_leaf):
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(np.mean(z[idx])))
        count.append(int(idx.size))
        return len(feature) - 1

    stack = [(new_node(np.arange(z.size)), np.arange(z.size), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth:
            continue
        split = _best_split(x[idx], z[idx], min_leaf)
        if split is None:
            continue
        j, thr, _ = split
        mask = x[idx, j] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = j, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(value), np.array(count))


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    config: ForestConfig

    kind = "forest"

    def predict_log(self, x):
        return np.mean([t.predict_log(x) for t in self.trees], axis=0)

    def predict_biomass(self, records):
        return predict_forest(self, records)


def feature_matrix(features, records=None, **arrays):
    """Log-feature matrix from records or from raw arrays keyed by feature name."""
    cols = []
    for f in features:
        if records is not None:
            attr = FEATURES[f]
            vals = []
            for i, r in enumerate(records):
                v = getattr(r, attr)
                if v is None:
                    raise MissingField("forest", attr, row=i)
                vals.append(v)
        else:
            if arrays.get(f) is None:
                raise MissingField("forest", FEATURES[f])
            vals = arrays[f]
        v = np.asarray(vals, dtype=float).ravel()
        if np.any(~(v > 0)):
            raise NonpositiveInput(f"forest feature {f!r} must be > 0")
        cols.append(np.log(v))
    return np.column_stack(cols) if cols else np.empty((0, 0))


def fit_forest_arrays(x_log, z_log, config: ForestConfig = ForestConfig()) -> ForestModel:
    """Fit on a log-feature matrix and log-biomass vector."""
    x = np.asarray(x_log, dtype=float)
    z = np.asarray(z_log, dtype=float).ravel()
    if z.size == 0:
        raise EmptyDataset()
    if x.ndim == 1:
        x = x[:, None]
    order = np.lexsort((z,) + tuple(x[:, j] for j in reversed(range(x.shape[1]))))
    x, z = x[order], z[order]
    trees = []
    for t in range(config.n_trees):
        if config.bootstrap:
            rng = np.random.default_rng(np.random.SeedSequence([config.seed, t]))
            idx = rng.integers(0, z.size, size=z.size)
            idx.sort()
        else:
            idx = np.arange(z.size)
        trees.append(_grow(x[idx], z[idx], config.max_depth, config.min_leaf))
    return ForestModel(tuple(trees), config)


def fit_forest(dataset, config: ForestConfig = ForestConfig()) -> ForestModel:
    records = list(dataset)
    if not records:
        raise EmptyDataset()
    x = feature_matrix(config.features, records)
    z = np.log(np.array([r.biomass_kg for r in records], dtype=float))
    return fit_forest_arrays(x, z, config)


def predict_forest(model: ForestModel, records=None, **arrays):
    """Biomass in kg: ``exp`` of the mean per-tree leaf value."""
    x = feature_matrix(model.config.features, None if records is None else list(records), **arrays)
    return np.exp(model.predict_log(x))
