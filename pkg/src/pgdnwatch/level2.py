"""Second-stage classifiers over the 20-dim input (19 numerics + bit).

The decision tree and random forest are written out in full: Gini splits,
random feature subsets, bootstrap sampling, majority voting with ties
resolved to the negative class, and a JSON node-array serialization.  The
linear SVM is a hinge-loss subgradient learner kept for the comparison
harness.  All three are deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, SingleClassData

LEVEL2_DIM = 20


@dataclass(frozen=True)
class ForestParams:
    tree_count: int = 100
    max_features_per_split: int = 4
    min_samples_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tree_count < 1:
            raise ValueError("tree_count must be >= 1")
        if not 1 <= self.max_features_per_split <= LEVEL2_DIM:
            raise ValueError(f"max_features_per_split must be in [1, {LEVEL2_DIM}]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


class DecisionTree:
    """Depth-unlimited CART-style binary tree with Gini splits.

    Stored as parallel node arrays (feature, threshold, children, class
    counts); leaves carry feature -1.  When the random feature subset
    yields no useful split the search widens to every feature, so distinct
    training rows are always memorized.
    """

    def __init__(self, min_samples_leaf: int = 1,
                 max_features: int | None = None) -> None:
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[list[int]] = []
        self.n_features_: int | None = None

    # -- training ----------------------------------------------------------

    def fit(self, x: np.ndarray, y: np.ndarray,
            rng: np.random.Generator | None = None) -> "DecisionTree":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if x.ndim != 2 or len(x) != len(y):
            raise ShapeMismatch("X must be 2-D and aligned with y")
        if len(set(y.tolist())) < 2:
            raise SingleClassData("tree training needs both classes")
        self.n_features_ = x.shape[1]
        rng = rng or np.random.default_rng(0)
        self.feature, self.threshold = [], []
        self.left, self.right, self.counts = [], [], []
        self._grow(x, y, np.arange(len(y)), rng)
        return self

    def _node_counts(self, y: np.ndarray, idx: np.ndarray) -> list[int]:
        return [int(np.sum(y[idx] == 0)), int(np.sum(y[idx] == 1))]

    def _add_leaf(self, y: np.ndarray, idx: np.ndarray) -> int:
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(self._node_counts(y, idx))
        return node

    def _best_split(
        self, x: np.ndarray, y: np.ndarray, idx: np.ndarray, features
    ) -> tuple[float, int, float]:
        # Any valid cut qualifies, even at zero gain: impure nodes must
        # keep partitioning or patterns like XOR can never be learned.
        best_gain, best_feature, best_threshold = -np.inf, -1, 0.0
        parent = _gini(np.asarray(self._node_counts(y, idx), dtype=np.float64))
        n = len(idx)
        node_y = y[idx].astype(np.float64)
        leaf = self.min_samples_leaf
        for f in features:
            values = x[idx, f]
            order = np.argsort(values, kind="stable")
            sorted_values = values[order]
            # prefix class counts score every cut point at once
            ones = np.cumsum(node_y[order])
            total_ones = ones[-1]
            left_n = np.arange(1, n, dtype=np.float64)
            left_ones = ones[:-1]
            right_n = n - left_n
            right_ones = total_ones - left_ones
            p1l = left_ones / left_n
            p1r = right_ones / right_n
            gini_left = 1.0 - p1l * p1l - (1.0 - p1l) * (1.0 - p1l)
            gini_right = 1.0 - p1r * p1r - (1.0 - p1r) * (1.0 - p1r)
            gain = parent - (left_n * gini_left + right_n * gini_right) / n
            valid = sorted_values[1:] != sorted_values[:-1]
            if leaf > 1:
                valid &= (left_n >= leaf) & (right_n >= leaf)
            if not valid.any():
                continue
            gain = np.where(valid, gain, -np.inf)
            cut = int(np.argmax(gain))  # first maximum: deterministic
            if gain[cut] > best_gain + 1e-12:
                best_gain = float(gain[cut])
                best_feature = f
                best_threshold = float((sorted_values[cut] + sorted_values[cut + 1]) / 2.0)
        return best_gain, best_feature, best_threshold

    def _grow(self, x: np.ndarray, y: np.ndarray, root_idx: np.ndarray,
              rng: np.random.Generator) -> None:
        # explicit pre-order stack: depth-unlimited trees must not depend
        # on the interpreter recursion limit
        n_features = x.shape[1]
        stack: list[tuple[np.ndarray, int, bool]] = [(root_idx, -1, False)]
        while stack:
            idx, parent, is_left = stack.pop()
            counts = self._node_counts(y, idx)
            feature = -1
            if counts[0] > 0 and counts[1] > 0 and len(idx) >= 2 * self.min_samples_leaf:
                if self.max_features is not None and self.max_features < n_features:
                    candidates = rng.choice(n_features, size=self.max_features,
                                            replace=False)
                else:
                    candidates = np.arange(n_features)
                _, feature, threshold = self._best_split(x, y, idx, candidates)
                if feature < 0 and len(candidates) < n_features:
                    # sampled features were all constant here; widen the search
                    _, feature, threshold = self._best_split(
                        x, y, idx, np.arange(n_features)
                    )

            if feature < 0:
                node = self._add_leaf(y, idx)
            else:
                node = len(self.feature)
                self.feature.append(int(feature))
                self.threshold.append(threshold)
                self.left.append(-1)
                self.right.append(-1)
                self.counts.append(counts)
                mask = x[idx, feature] <= threshold
                # right pushed first so the left child pops next,
                # matching recursive pre-order rng consumption
                stack.append((idx[~mask], node, False))
                stack.append((idx[mask], node, True))

            if parent >= 0:
                if is_left:
                    self.left[parent] = node
                else:
                    self.right[parent] = node

    # -- prediction ---------------------------------------------------------

    def _leaf_for(self, row: np.ndarray) -> int:
        node = 0
        while self.feature[node] >= 0:
            if row[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return node

    def predict_one(self, row: np.ndarray) -> int:
        """Leaf majority class; a tied leaf votes the negative class 0."""
        benign, pgdn = self.counts[self._leaf_for(row)]
        return 1 if pgdn > benign else 0

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        return np.array([self.predict_one(row) for row in x], dtype=np.int64)

    def score(self, x: np.ndarray) -> np.ndarray:
        """Per-row PGDN fraction of the reached leaf."""
        x = self._check(x)
        out = np.empty(len(x))
        for i, row in enumerate(x):
            benign, pgdn = self.counts[self._leaf_for(row)]
            out[i] = pgdn / (benign + pgdn)
        return out

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.n_features_ is None:
            raise RuntimeError("tree is not fitted")
        if x.shape[1] != self.n_features_:
            raise ShapeMismatch(
                f"row width {x.shape[1]}, tree was grown on {self.n_features_}"
            )
        return x

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "counts": self.counts,
            "n_features": self.n_features_,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DecisionTree":
        tree = cls(min_samples_leaf=obj["min_samples_leaf"],
                   max_features=obj["max_features"])
        tree.feature = [int(v) for v in obj["feature"]]
        tree.threshold = [float(v) for v in obj["threshold"]]
        tree.left = [int(v) for v in obj["left"]]
        tree.right = [int(v) for v in obj["right"]]
        tree.counts = [[int(a), int(b)] for a, b in obj["counts"]]
        tree.n_features_ = obj["n_features"]
        return tree


class RandomForest:
    """Bagged Gini trees; vote fraction is the model score."""

    def __init__(self, params: ForestParams | None = None) -> None:
        self.params = params or ForestParams()
        self.trees: list[DecisionTree] = []
        self.n_features_: int | None = None

    def fit(self, x: np.ndarray, y: np.ndarray) -> "RandomForest":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if x.ndim != 2 or len(x) != len(y) or len(y) < 2:
            raise ShapeMismatch("X must be 2-D with at least two aligned rows")
        if len(set(y.tolist())) < 2:
            raise SingleClassData("forest training needs both classes")
        self.n_features_ = x.shape[1]
        self.trees = []
        # one spawned seed per tree keeps any parallel schedule identical
        # to the sequential one
        seeds = np.random.SeedSequence(self.params.seed).spawn(self.params.tree_count)
        n = len(y)
        for seq in seeds:
            rng = np.random.default_rng(seq)
            if self.params.bootstrap:
                while True:
                    sample = rng.integers(0, n, size=n)
                    if len(set(y[sample].tolist())) == 2:
                        break
            else:
                sample = np.arange(n)
            tree = DecisionTree(
                min_samples_leaf=self.params.min_samples_leaf,
                max_features=self.params.max_features_per_split,
            )
            tree.fit(x[sample], y[sample], rng)
            self.trees.append(tree)
        return self

    def vote_fraction(self, x: np.ndarray) -> np.ndarray:
        """Fraction of trees voting PGDN, per row."""
        if not self.trees:
            raise RuntimeError("forest is not fitted")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features_:
            raise ShapeMismatch(
                f"row width {x.shape[1]}, forest was grown on {self.n_features_}"
            )
        votes = np.zeros(len(x))
        for tree in self.trees:
            votes += tree.predict(x)
        return votes / len(self.trees)

    def score(self, x: np.ndarray) -> np.ndarray:
        return self.vote_fraction(x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Majority vote; an exact tie resolves to the negative class."""
        return (self.vote_fraction(x) > 0.5).astype(np.int64)

    def to_json(self) -> dict:
        return {
            "params": {
                "tree_count": self.params.tree_count,
                "max_features_per_split": self.params.max_features_per_split,
                "min_samples_leaf": self.params.min_samples_leaf,
                "bootstrap": self.params.bootstrap,
                "seed": self.params.seed,
            },
            "n_features": self.n_features_,
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RandomForest":
        forest = cls(ForestParams(**obj["params"]))
        forest.n_features_ = obj["n_features"]
        forest.trees = [DecisionTree.from_json(t) for t in obj["trees"]]
        return forest


class LinearSvm:
    """Hinge-loss linear classifier trained by full-batch subgradient
    descent on internally standardized features."""

    def __init__(self, epochs: int = 200, learning_rate: float = 0.1,
                 l2: float = 1e-3, seed: int = 0) -> None:
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.l2 = l2
        self.seed = seed
        self.w: np.ndarray | None = None
        self.b = 0.0
        self.mean: np.ndarray | None = None
        self.std: np.ndarray | None = None
        self.n_features_: int | None = None

    def fit(self, x: np.ndarray, y: np.ndarray) -> "LinearSvm":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if len(set(y.tolist())) < 2:
            raise SingleClassData("svm training needs both classes")
        self.n_features_ = x.shape[1]
        self.mean = x.mean(axis=0)
        self.std = x.std(axis=0)
        self.std[self.std == 0.0] = 1.0
        xs = (x - self.mean) / self.std
        signs = np.where(y == 1, 1.0, -1.0)

        rng = np.random.default_rng(self.seed)
        self.w = rng.normal(0.0, 0.01, size=x.shape[1])
        self.b = 0.0
        n = len(y)
        for epoch in range(self.epochs):
            lr = self.learning_rate / (1.0 + 0.01 * epoch)
            margins = signs * (xs @ self.w + self.b)
            active = margins < 1.0
            grad_w = self.l2 * self.w - (signs[active, None] * xs[active]).sum(axis=0) / n
            grad_b = -signs[active].sum() / n
            self.w -= lr * grad_w
            self.b -= lr * grad_b
        return self

    def margin(self, x: np.ndarray) -> np.ndarray:
        if self.w is None:
            raise RuntimeError("svm is not fitted")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features_:
            raise ShapeMismatch(
                f"row width {x.shape[1]}, svm was trained on {self.n_features_}"
            )
        xs = (x - self.mean) / self.std
        return xs @ self.w + self.b

    def score(self, x: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.margin(x)))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.margin(x) > 0.0).astype(np.int64)

    def to_json(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "l2": self.l2,
            "seed": self.seed,
            "w": self.w.tolist(),
            "b": self.b,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "n_features": self.n_features_,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearSvm":
        svm = cls(epochs=obj["epochs"], learning_rate=obj["learning_rate"],
                  l2=obj["l2"], seed=obj["seed"])
        svm.w = np.asarray(obj["w"], dtype=np.float64)
        svm.b = float(obj["b"])
        svm.mean = np.asarray(obj["mean"], dtype=np.float64)
        svm.std = np.asarray(obj["std"], dtype=np.float64)
        svm.n_features_ = obj["n_features"]
        return svm


def make_backend(name: str, seed: int = 0) -> "DecisionTree | RandomForest | LinearSvm":
    if name == "forest":
        return RandomForest(ForestParams(seed=seed))
    if name == "tree":
        return DecisionTree()
    if name == "linear_svm":
        return LinearSvm(seed=seed)
    raise ValueError(f"unknown level-2 backend: {name!r}")


def backend_to_json(backend) -> dict:
    kind = {RandomForest: "forest", DecisionTree: "tree", LinearSvm: "linear_svm"}[
        type(backend)
    ]
    return {"kind": kind, "model": backend.to_json()}


def backend_from_json(obj: dict):
    kind = obj["kind"]
    cls = {"forest": RandomForest, "tree": DecisionTree, "linear_svm": LinearSvm}[kind]
    return cls.from_json(obj["model"])


# -- spec-surface wrappers over the 20-dim level-2 input ---------------------


def forest_train(x: np.ndarray, y: np.ndarray, params: ForestParams) -> RandomForest:
    """Grow a forest on level-2 rows; rejects anything but 20 columns."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != LEVEL2_DIM:
        raise ShapeMismatch(f"level-2 rows must have {LEVEL2_DIM} columns")
    return RandomForest(params).fit(x, y)


def forest_predict(forest: RandomForest, row: np.ndarray) -> tuple[int, float]:
    """(vote, PGDN vote fraction) for one 20-dim row; tie means benign."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (LEVEL2_DIM,):
        raise ShapeMismatch(f"level-2 rows must have {LEVEL2_DIM} columns")
    fraction = float(forest.vote_fraction(row[None, :])[0])
    return (1 if fraction > 0.5 else 0), fraction
