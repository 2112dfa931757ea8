"""Small bagged decision-tree ensemble for binary match probabilities.

Trees are plain nested dicts so a trained model serializes to JSON and
reloads bit-identically.  Determinism comes from seeding one generator
per tree with the pair (seed, tree index).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def _best_split(X: np.ndarray, y: np.ndarray, features) -> tuple | None:
    """Lowest weighted Gini split among the given features, if any."""
    n = y.shape[0]
    best: tuple | None = None
    for f in features:
        vals = X[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y[order]
        cuts = np.nonzero(sv[1:] > sv[:-1])[0]
        if cuts.size == 0:
            continue
        pos = np.cumsum(sy)
        total_pos = pos[-1]
        n_left = cuts + 1.0
        n_right = n - n_left
        p_left = pos[cuts] / n_left
        p_right = (total_pos - pos[cuts]) / n_right
        gini = (
            n_left / n * 2.0 * p_left * (1.0 - p_left)
            + n_right / n * 2.0 * p_right * (1.0 - p_right)
        )
        i = int(np.argmin(gini))
        score = float(gini[i])
        if best is None or score < best[0]:
            threshold = float((sv[cuts[i]] + sv[cuts[i] + 1]) / 2.0)
            if threshold >= sv[cuts[i] + 1]:
                # Adjacent floats: the midpoint rounds onto the upper
                # value, which would leave the right side empty.
                threshold = float(sv[cuts[i]])
            best = (score, int(f), threshold)
    return best


def _grow(X, y, depth, max_depth, n_sub, rng) -> dict:
    mean = float(y.mean())
    if depth >= max_depth or y.shape[0] < 2 or mean in (0.0, 1.0):
        return {"leaf": mean, "n": int(y.shape[0])}
    order = rng.permutation(X.shape[1])
    best = _best_split(X, y, order[:n_sub])
    if best is None:
        # All sampled features constant here; let the others try.
        best = _best_split(X, y, order[n_sub:])
    if best is None:
        return {"leaf": mean, "n": int(y.shape[0])}
    _, feat, threshold = best
    mask = X[:, feat] <= threshold
    return {
        "feature": feat,
        "threshold": threshold,
        "left": _grow(X[mask], y[mask], depth + 1, max_depth, n_sub, rng),
        "right": _grow(X[~mask], y[~mask], depth + 1, max_depth, n_sub, rng),
    }


def _tree_predict(node: dict, x) -> float:
    while "leaf" not in node:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return node["leaf"]


@dataclass
class Forest:
    """Bagged trees plus the training metadata needed to reuse them."""

    trees: list
    n_features: int
    seed: int
    oob_accuracy: float | None = None
    params: dict = field(default_factory=dict)

    def predict_proba(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[0]}")
        return float(np.mean([_tree_predict(t, x) for t in self.trees]))

    def to_dict(self) -> dict:
        return {
            "trees": self.trees,
            "n_features": self.n_features,
            "seed": self.seed,
            "oob_accuracy": self.oob_accuracy,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Forest":
        return cls(
            trees=payload["trees"],
            n_features=payload["n_features"],
            seed=payload["seed"],
            oob_accuracy=payload["oob_accuracy"],
            params=dict(payload.get("params", {})),
        )


def train_forest(
    X,
    y,
    n_trees: int = 100,
    max_depth: int = 5,
    n_feature_sub: int = 2,
    seed: int = 0,
) -> Forest:
    """Fit bagged depth-limited trees with per-split feature subsampling."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("feature matrix and labels disagree on row count")
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("labels must be 0 or 1")
    if np.unique(y).size < 2:
        raise DataError("training set contains a single class")
    n, n_features = X.shape
    n_sub = min(max(1, n_feature_sub), n_features)

    trees = []
    oob_votes = np.zeros(n)
    oob_counts = np.zeros(n)
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        picks = rng.integers(0, n, size=n)
        tree = _grow(X[picks], y[picks], 0, max_depth, n_sub, rng)
        trees.append(tree)
        oob = np.setdiff1d(np.arange(n), picks, assume_unique=False)
        for i in oob:
            oob_votes[i] += _tree_predict(tree, X[i])
            oob_counts[i] += 1

    seen = oob_counts > 0
    oob_accuracy = None
    if seen.any():
        predicted = (oob_votes[seen] / oob_counts[seen]) >= 0.5
        oob_accuracy = float(np.mean(predicted == (y[seen] >= 0.5)))
    return Forest(
        trees=trees,
        n_features=n_features,
        seed=int(seed),
        oob_accuracy=oob_accuracy,
        params={
            "n_trees": int(n_trees),
            "max_depth": int(max_depth),
            "n_feature_sub": int(n_sub),
        },
    )


def save_forest(model: Forest, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True, indent=None)
        fh.write("\n")


def load_forest(path: str) -> Forest:
    with open(path, encoding="utf-8") as fh:
        return Forest.from_dict(json.load(fh))
