"""From-scratch random forest: CART trees, Gini splits, bagging, voting.

Trees are stored as flat parallel arrays (feature, threshold, left, right,
per-leaf class counts) in preorder. Every tie anywhere (split candidates,
leaf vote, forest vote) breaks toward the lower index/code so that training
and prediction are fully reproducible; each tree derives its own RNG stream
from (seed, tree_index), which also makes training order-independent and
safe to parallelize.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dataset import Dataset
from .errors import DecodeFailure, InvalidArgument

MODEL_FORMAT = 1


def worker_count(n_tasks: int) -> int:
    """Workers to use: min(cpu, LANDSENSE_THREADS cap, tasks)."""
    cap = os.environ.get("LANDSENSE_THREADS", "").strip()
    workers = os.cpu_count() or 1
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, min(workers, n_tasks))


@dataclass
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | str = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidArgument("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise InvalidArgument("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidArgument("max_depth must be >= 0 (or None)")
        if isinstance(self.features_per_split, str):
            if self.features_per_split != "sqrt":
                raise InvalidArgument("features_per_split must be an int or 'sqrt'")
        elif self.features_per_split < 1:
            raise InvalidArgument("features_per_split must be >= 1")

    def resolve_features(self, K: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, int(math.isqrt(K)))
        f = int(self.features_per_split)
        if f > K:
            raise InvalidArgument(f"features_per_split={f} exceeds K={K}")
        return f

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split,
                "features_per_split": self.features_per_split,
                "bootstrap": self.bootstrap, "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestParams":
        allowed = {"n_trees", "max_depth", "min_samples_split",
                   "features_per_split", "bootstrap", "seed"}
        return cls(**{k: v for k, v in doc.items() if k in allowed})


@dataclass
class DecisionTree:
    """Flat-array binary tree; feature == -1 marks a leaf."""
    feature: np.ndarray      # int32 (n_nodes,)
    threshold: np.ndarray    # float64
    left: np.ndarray         # int32
    right: np.ndarray        # int32
    counts: np.ndarray       # int64 (n_nodes, n_classes), nonzero only at leaves
    leaf_class: np.ndarray   # int32, class index at leaves, -1 internal

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        """Class index (into the forest's class list) per row of X."""
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        return _kernels.tree_predict(self.feature, self.threshold, self.left,
                                     self.right, self.leaf_class, X)


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    params: ForestParams
    K: int
    classes: list[int] = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def gini_impurity(class_counts: dict[int, int]) -> float:
    """1 - sum((count_c / total)^2); 0 for a pure node."""
    if not class_counts:
        raise InvalidArgument("empty class counts")
    total = sum(class_counts.values())
    if total < 1:
        raise InvalidArgument("total count must be >= 1")
    return 1.0 - sum((c / total) ** 2 for c in class_counts.values())


def best_split(features: np.ndarray, labels: np.ndarray,
               feature_subset: list[int] | None = None) -> dict | None:
    """Best (feature, threshold) over the given rows, or None for no-split.

    Thresholds are midpoints between consecutive distinct sorted values;
    ties break to the lower feature index then the lower threshold; a split
    must strictly reduce the parent Gini.
    """
    X = np.ascontiguousarray(np.atleast_2d(features), dtype=np.float64)
    labels = np.asarray(labels)
    if feature_subset is None:
        subset = np.arange(X.shape[1])
    else:
        subset = np.array(sorted(feature_subset), dtype=np.int64)
        if subset.size == 0:
            raise InvalidArgument("feature_subset must be non-empty")
    classes = np.unique(labels)
    y = np.searchsorted(classes, labels).astype(np.int32)
    block = np.ascontiguousarray(X[:, subset])
    col, thr, imp, found = _kernels.best_split(block, y, len(classes))
    if not found:
        return None
    return {"feature_index": int(subset[col]), "threshold_db": float(thr),
            "weighted_child_impurity": float(imp)}


_LEAF = -1


class _TreeBuilder:
    """Accumulates flat node arrays during growth."""

    def __init__(self, n_classes: int):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[np.ndarray] = []
        self.leaf_class: list[int] = []
        self.n_classes = n_classes

    def add_leaf(self, counts: np.ndarray) -> int:
        idx = len(self.feature)
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.counts.append(counts)
        # first maximum = lowest class index = lowest code (classes sorted)
        self.leaf_class.append(int(np.argmax(counts)))
        return idx

    def add_internal(self, feature: int, threshold: float) -> int:
        idx = len(self.feature)
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.counts.append(np.zeros(self.n_classes, dtype=np.int64))
        self.leaf_class.append(_LEAF)
        return idx

    def build(self) -> DecisionTree:
        return DecisionTree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            counts=np.vstack(self.counts).astype(np.int64),
            leaf_class=np.array(self.leaf_class, dtype=np.int32))


def train_tree(X: np.ndarray, y: np.ndarray, n_classes: int,
               params: ForestParams, rng: np.random.Generator) -> DecisionTree:
    """Grow one CART tree on (X, y) with per-node feature subsampling.

    y holds class indices in [0, n_classes). Growth stops on purity, depth,
    node size, or when no candidate split reduces impurity. Preorder DFS
    (left first) fixes the rng consumption order, so the tree is a pure
    function of (X, y, params, rng state).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int32)
    K = X.shape[1]
    f_per_split = params.resolve_features(K)
    max_depth = params.max_depth
    builder = _TreeBuilder(n_classes)

    # Explicit stack (preorder: parent, left subtree, right subtree) to keep
    # unlimited-depth growth off the Python recursion limit.
    root_idx = np.arange(len(y))
    stack: list[tuple[np.ndarray, int, int, int]] = [(root_idx, 0, _LEAF, 0)]
    while stack:
        idx, depth, parent, side = stack.pop()
        counts = np.bincount(y[idx], minlength=n_classes).astype(np.int64)
        node_id: int
        grow_split = None
        if (counts > 0).sum() > 1 and len(idx) >= params.min_samples_split \
                and (max_depth is None or depth < max_depth):
            feats = rng.choice(K, size=f_per_split, replace=False)
            feats.sort()
            block = np.ascontiguousarray(X[idx][:, feats])
            col, thr, imp, found = _kernels.best_split(block, y[idx], n_classes)
            if found:
                grow_split = (int(feats[col]), float(thr))
        if grow_split is None:
            node_id = builder.add_leaf(counts)
        else:
            feat, thr = grow_split
            node_id = builder.add_internal(feat, thr)
            go_left = X[idx, feat] <= thr
            # push right first so the left child is processed (and numbered)
            # next: preorder
            stack.append((idx[~go_left], depth + 1, node_id, 1))
            stack.append((idx[go_left], depth + 1, node_id, 0))
        if parent != _LEAF:
            if side == 0:
                builder.left[parent] = node_id
            else:
                builder.right[parent] = node_id
    return builder.build()


def train_forest(ds: Dataset, params: ForestParams) -> ForestModel:
    """Bagged ensemble: tree t trains on its own bootstrap with stream (seed, t)."""
    if ds.L == 0:
        raise InvalidArgument("cannot train on an empty dataset")
    classes = ds.classes()
    class_arr = np.array(classes, dtype=np.int64)
    y = np.searchsorted(class_arr, ds.labels).astype(np.int32)
    X = ds.features
    L = ds.L

    def _one(t: int) -> DecisionTree:
        rng = np.random.default_rng([int(params.seed), t])
        if params.bootstrap:
            sample = rng.integers(0, L, L)
            return train_tree(X[sample], y[sample], len(classes), params, rng)
        return train_tree(X, y, len(classes), params, rng)

    n_workers = worker_count(params.n_trees)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            trees = list(pool.map(_one, range(params.n_trees)))
    else:
        trees = [_one(t) for t in range(params.n_trees)]
    return ForestModel(trees=trees, params=params, K=ds.K, classes=classes)


def predict_batch(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Plurality vote over trees for each row; ties go to the lower code."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if X.shape[1] != model.K:
        raise InvalidArgument(f"feature width {X.shape[1]} != model K={model.K}")
    votes = np.zeros((X.shape[0], len(model.classes)), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for tree in model.trees:
        votes[rows, tree.predict_index(X)] += 1
    class_arr = np.array(model.classes, dtype=np.int64)
    return class_arr[np.argmax(votes, axis=1)]


def predict(model: ForestModel, features_db) -> dict:
    """Single-row prediction with the per-class vote fractions."""
    feats = np.asarray(features_db, dtype=np.float64)
    if feats.ndim != 1 or feats.shape[0] != model.K:
        raise InvalidArgument(f"expected a feature vector of width {model.K}")
    X = np.ascontiguousarray(feats.reshape(1, -1))
    counts = np.zeros(len(model.classes), dtype=np.int64)
    for tree in model.trees:
        counts[int(tree.predict_index(X)[0])] += 1
    winner = model.classes[int(np.argmax(counts))]
    votes = {code: int(c) / model.n_trees
             for code, c in zip(model.classes, counts)}
    return {"class": winner, "votes": votes}


def serialize(model: ForestModel) -> bytes:
    """Versioned JSON encoding; stable byte-for-byte for a given model."""
    doc = {
        "format": MODEL_FORMAT,
        "params": model.params.to_dict(),
        "K": model.K,
        "classes": model.classes,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "counts": t.counts.tolist(),
            }
            for t in model.trees
        ],
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


def deserialize(payload: bytes) -> ForestModel:
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError, AttributeError) as exc:
        raise DecodeFailure(f"corrupt model payload: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise DecodeFailure(f"unsupported model format: {doc.get('format')!r}"
                            if isinstance(doc, dict) else "not a model document")
    try:
        params = ForestParams.from_dict(doc["params"])
        classes = [int(c) for c in doc["classes"]]
        trees = []
        for td in doc["trees"]:
            counts = np.array(td["counts"], dtype=np.int64)
            if counts.ndim != 2 or counts.shape[1] != len(classes):
                raise DecodeFailure("tree counts shape mismatch")
            feature = np.array(td["feature"], dtype=np.int32)
            n = len(feature)
            tree = DecisionTree(
                feature=feature,
                threshold=np.array(td["threshold"], dtype=np.float64),
                left=np.array(td["left"], dtype=np.int32),
                right=np.array(td["right"], dtype=np.int32),
                counts=counts,
                leaf_class=np.where(feature == _LEAF,
                                    np.argmax(counts, axis=1), _LEAF).astype(np.int32))
            for arr in (tree.threshold, tree.left, tree.right):
                if len(arr) != n:
                    raise DecodeFailure("tree arrays have inconsistent lengths")
            if n == 0 or counts.shape[0] != n:
                raise DecodeFailure("tree arrays have inconsistent lengths")
            trees.append(tree)
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeFailure(f"corrupt model payload: {exc}") from exc
    if len(trees) != params.n_trees:
        raise DecodeFailure("tree count does not match params.n_trees")
    return ForestModel(trees=trees, params=params, K=int(doc["K"]), classes=classes)


def save_model(model: ForestModel, path, extra_meta: dict | None = None) -> None:
    payload = serialize(model)
    if extra_meta:
        doc = json.loads(payload)
        doc["provenance"] = extra_meta
        payload = (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()
    with open(path, "wb") as fh:
        fh.write(payload)


def load_model(path) -> ForestModel:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
