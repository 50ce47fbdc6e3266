"""File-level defect classifiers over root feature vectors.

Both classifiers are deterministic: logistic regression uses full-batch
gradient descent with a backtracking (Armijo) line search, and the random
forest draws every bootstrap sample and feature subset from per-tree streams
derived from one seed, with impurity ties broken by lowest feature index and
then lowest threshold. A bag-of-words featurizer over normalized AST labels
is included as the baseline representation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import ceil, sqrt
from pathlib import Path

import numpy as np

from . import jsonio
from .corpus import FileRecord, Vocabulary, iter_nodes
from .errors import DocumentError, TrainingDataError
from .rng import stream
from .treelstm import DEFAULT_DEPTH_LIMIT, TreeLstmModel, forward_root, sigmoid


@dataclass
class FeatureMatrix:
    """Per-file feature rows keyed by (project, version, file_id)."""

    keys: list[tuple[str, str, str]]
    values: np.ndarray  # (n, dim)
    labels: list[int | None]

    def __post_init__(self):
        if self.values.ndim != 2 or len(self.keys) != len(self.values) \
                or len(self.labels) != len(self.values):
            raise ValueError("feature matrix rows, keys and labels must align")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def label_array(self) -> np.ndarray:
        if any(lab is None for lab in self.labels):
            raise TrainingDataError("feature matrix has unlabeled rows")
        return np.asarray(self.labels, dtype=np.intp)


def featurize_corpus(records: list[FileRecord], model: TreeLstmModel,
                     depth_limit: int = DEFAULT_DEPTH_LIMIT) -> FeatureMatrix:
    """One row per record: the Tree-LSTM root hidden vector."""
    values = np.empty((len(records), model.hidden_dim))
    for i, record in enumerate(records):
        values[i] = forward_root(record, model, depth_limit)
    return FeatureMatrix([r.key for r in records], values, [r.label for r in records])


def bow_featurize(records: list[FileRecord], vocab: Vocabulary,
                  threshold: int = 5) -> FeatureMatrix:
    """Two-bin bag of words: coordinate v is 1 iff the token count >= threshold."""
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    values = np.zeros((len(records), len(vocab)))
    for i, record in enumerate(records):
        counts = np.zeros(len(vocab))
        for node in iter_nodes(record.tree):
            counts[vocab.index(node.label)] += 1
        values[i] = counts >= threshold
    return FeatureMatrix([r.key for r in records], values, [r.label for r in records])


def _as_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(X, FeatureMatrix):
        values = X.values
        if y is None:
            y = X.label_array()
    else:
        values = np.asarray(X, dtype=float)
        if y is None:
            raise ValueError("labels are required when X is a plain array")
    y = np.asarray(y)
    if values.ndim != 2 or len(values) != len(y):
        raise ValueError("X and y must have matching first dimensions")
    if len(np.unique(y)) < 2:
        raise TrainingDataError("training data contains a single class")
    return values, y.astype(float)


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2: float
    loss_history: list[float] = field(default_factory=list, repr=False, compare=False)


def _logistic_loss(X, y, w, b, l2) -> float:
    margins = (2.0 * y - 1.0) * (X @ w + b)
    return float(np.logaddexp(0.0, -margins).mean() + 0.5 * l2 * (w @ w))


def train_logistic(X, y=None, l2: float = 1e-4, tol: float = 1e-6,
                   max_iter: int = 5000) -> LogisticModel:
    """Minimize L2-regularized logistic loss (bias unregularized) by
    full-batch gradient descent with backtracking line search, until the
    gradient norm falls below `tol` or `max_iter` iterations."""
    Xa, ya = _as_xy(X, y)
    n, dim = Xa.shape
    w = np.zeros(dim)
    b = 0.0
    loss = _logistic_loss(Xa, ya, w, b, l2)
    history = [loss]
    for _ in range(max_iter):
        p = sigmoid(Xa @ w + b)
        residual = (p - ya) / n
        gw = Xa.T @ residual + l2 * w
        gb = float(residual.sum())
        gnorm2 = float(gw @ gw) + gb * gb
        if sqrt(gnorm2) <= tol:
            break
        step = 1.0
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            loss_new = _logistic_loss(Xa, ya, w_new, b_new, l2)
            if loss_new <= loss - 1e-4 * step * gnorm2 or step < 1e-18:
                break
            step *= 0.5
        if loss_new > loss:  # line search stalled at float resolution
            break
        w, b, loss = w_new, b_new, loss_new
        history.append(loss)
    return LogisticModel(w, b, l2, history)


def predict_proba_logistic(model: LogisticModel, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    z = x @ model.weights + model.bias
    p = sigmoid(np.asarray(z, dtype=float))
    return float(p) if np.ndim(z) == 0 else p


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 16
    min_leaf: int = 1
    features_per_split: int | None = None  # None: ceil(sqrt(dim))
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("forest sizes must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")


@dataclass
class TreeNode:
    """Decision tree node: internal when left/right are set, else a leaf
    carrying (P(clean), P(defective))."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    proba: tuple[float, float] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.proba is not None


@dataclass
class ForestModel:
    trees: list[TreeNode]
    n_trees: int
    max_depth: int
    min_leaf: int
    features_per_split: int | None
    seed: int
    bootstrap_indices: list[np.ndarray] = field(default_factory=list, repr=False,
                                                compare=False)


def _leaf(labels: np.ndarray) -> TreeNode:
    n1 = int(labels.sum())
    n = len(labels)
    return TreeNode(proba=((n - n1) / n, n1 / n))


def _best_split(Xa, labels, idx, feats, min_leaf):
    """Lowest weighted-Gini split over `feats`; ties go to the lowest feature
    index, then the lowest threshold. Returns (feature, threshold) or None."""
    n = len(idx)
    best_score = np.inf
    best = None
    n1 = labels.sum()
    for f in feats:
        v = Xa[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        ls = labels[order]
        nl = np.arange(1, n)
        l1 = np.cumsum(ls)[:-1]
        valid = (vs[1:] != vs[:-1]) & (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        nr = n - nl
        r1 = n1 - l1
        # weighted Gini * n; constant offsets dropped
        score = (nl - (l1 * l1 + (nl - l1) ** 2) / nl
                 + nr - (r1 * r1 + (nr - r1) ** 2) / nr)
        score[~valid] = np.inf
        pos = int(np.argmin(score))
        if score[pos] < best_score:
            best_score = float(score[pos])
            best = (int(f), float((vs[pos] + vs[pos + 1]) / 2.0))
    return best


def _build_tree(Xa, ya, idx, depth, cfg: ForestConfig, mtry: int,
                rng: np.random.Generator) -> TreeNode:
    labels = ya[idx]
    n1 = int(labels.sum())
    if n1 == 0 or n1 == len(idx) or depth >= cfg.max_depth or len(idx) < 2 * cfg.min_leaf:
        return _leaf(labels)
    dim = Xa.shape[1]
    feats = np.sort(rng.choice(dim, size=min(mtry, dim), replace=False))
    split = _best_split(Xa, labels, idx, feats, cfg.min_leaf)
    if split is None:
        return _leaf(labels)
    feature, threshold = split
    mask = Xa[idx, feature] <= threshold
    left = _build_tree(Xa, ya, idx[mask], depth + 1, cfg, mtry, rng)
    right = _build_tree(Xa, ya, idx[~mask], depth + 1, cfg, mtry, rng)
    return TreeNode(feature, threshold, left, right)


def train_forest(X, y=None, config: ForestConfig | None = None) -> ForestModel:
    """Random forest of seeded-bootstrap Gini trees."""
    if config is None:
        config = ForestConfig()
    Xa, ya = _as_xy(X, y)
    n, dim = Xa.shape
    mtry = config.features_per_split or ceil(sqrt(dim))
    trees = []
    bootstraps = []
    for t in range(config.n_trees):
        rng = stream(config.seed, "bootstrap", t)
        sample = rng.integers(0, n, size=n)
        bootstraps.append(sample)
        trees.append(_build_tree(Xa, ya.astype(np.intp), sample, 0, config, mtry, rng))
    return ForestModel(trees, config.n_trees, config.max_depth, config.min_leaf,
                       config.features_per_split, config.seed, bootstraps)


def _tree_proba(node: TreeNode, x: np.ndarray) -> float:
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.proba[1]


def predict_proba_forest(model: ForestModel, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return sum(_tree_proba(t, x) for t in model.trees) / len(model.trees)
    return np.array([predict_proba_forest(model, row) for row in x])


def oob_predictions(model: ForestModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-bag probabilities. Returns (proba, covered) where covered[i] is
    False when every tree saw row i in its bootstrap (proba then 0)."""
    if not model.bootstrap_indices:
        raise ValueError("model was not trained in this process; no bootstrap info")
    Xa = np.asarray(X.values if isinstance(X, FeatureMatrix) else X, dtype=float)
    n = len(Xa)
    total = np.zeros(n)
    votes = np.zeros(n)
    for tree, sample in zip(model.trees, model.bootstrap_indices):
        out = np.ones(n, dtype=bool)
        out[np.unique(sample)] = False
        for i in np.flatnonzero(out):
            total[i] += _tree_proba(tree, Xa[i])
            votes[i] += 1
    covered = votes > 0
    proba = np.zeros(n)
    proba[covered] = total[covered] / votes[covered]
    return proba, covered


def predict(p) -> int | np.ndarray:
    """1 (defective) iff the probability is at least 0.5."""
    arr = np.asarray(p)
    if arr.ndim == 0:
        return int(arr >= 0.5)
    return (arr >= 0.5).astype(int)


def predict_proba(model, x) -> float | np.ndarray:
    if isinstance(model, LogisticModel):
        return predict_proba_logistic(model, x)
    if isinstance(model, ForestModel):
        return predict_proba_forest(model, x)
    raise TypeError(f"unknown classifier type {type(model).__name__}")


# --- serialization ---

def _tree_to_preorder(root: TreeNode) -> list[dict]:
    nodes = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            nodes.append({"p": [node.proba[0], node.proba[1]]})
        else:
            nodes.append({"f": node.feature, "t": node.threshold})
            stack.append(node.right)
            stack.append(node.left)
    return nodes


def _tree_from_preorder(nodes: list[dict], source: str) -> TreeNode:
    pos = 0

    def build() -> TreeNode:
        nonlocal pos
        if pos >= len(nodes):
            raise DocumentError(f"{source}: truncated tree node list")
        spec = nodes[pos]
        pos += 1
        if not isinstance(spec, dict):
            raise DocumentError(f"{source}: tree node must be an object")
        if "p" in spec:
            p = spec["p"]
            if (not isinstance(p, list) or len(p) != 2
                    or not all(isinstance(v, (int, float)) for v in p)):
                raise DocumentError(f"{source}: leaf probabilities must be a pair")
            return TreeNode(proba=(float(p[0]), float(p[1])))
        if "f" not in spec or "t" not in spec:
            raise DocumentError(f"{source}: tree node needs 'f'/'t' or 'p'")
        node = TreeNode(int(spec["f"]), float(spec["t"]))
        node.left = build()
        node.right = build()
        return node

    root = build()
    if pos != len(nodes):
        raise DocumentError(f"{source}: trailing tree nodes after preorder walk")
    return root


def classifier_to_document(model) -> dict:
    if isinstance(model, LogisticModel):
        return {"format_version": 1, "kind": "logistic",
                "weights": model.weights.tolist(), "bias": float(model.bias),
                "l2": float(model.l2)}
    if isinstance(model, ForestModel):
        return {"format_version": 1, "kind": "forest",
                "n_trees": model.n_trees, "max_depth": model.max_depth,
                "min_leaf": model.min_leaf,
                "features_per_split": model.features_per_split,
                "seed": model.seed,
                "trees": [_tree_to_preorder(t) for t in model.trees]}
    raise TypeError(f"unknown classifier type {type(model).__name__}")


def classifier_from_document(doc, source: str = "classifier"):
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise DocumentError(f"{source}: expected an object with format_version 1")
    kind = doc.get("kind")
    if kind == "logistic":
        weights = np.asarray(doc.get("weights", None), dtype=float)
        if weights.ndim != 1:
            raise DocumentError(f"{source}: 'weights' must be a number array")
        bias, l2 = doc.get("bias"), doc.get("l2")
        if not isinstance(bias, (int, float)) or not isinstance(l2, (int, float)):
            raise DocumentError(f"{source}: 'bias' and 'l2' must be numbers")
        return LogisticModel(weights, float(bias), float(l2))
    if kind == "forest":
        trees_doc = doc.get("trees")
        if not isinstance(trees_doc, list) or not trees_doc:
            raise DocumentError(f"{source}: 'trees' must be a non-empty list")
        trees = [_tree_from_preorder(t, f"{source}.trees[{i}]")
                 for i, t in enumerate(trees_doc)]
        return ForestModel(trees, len(trees), int(doc.get("max_depth", 0)),
                           int(doc.get("min_leaf", 1)),
                           doc.get("features_per_split"), int(doc.get("seed", 0)))
    raise DocumentError(f"{source}: unknown classifier kind {kind!r}")


def save_classifier(path, model) -> None:
    jsonio.write(path, classifier_to_document(model))


def load_classifier(path):
    return classifier_from_document(jsonio.read(path), str(path))


# --- feature file I/O (CSV) ---

def write_features_csv(path, features: FeatureMatrix) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["project", "version", "file_id", "label",
                         *(f"f{i}" for i in range(features.dim))])
        for key, label, row in zip(features.keys, features.labels, features.values):
            writer.writerow([*key, "" if label is None else label,
                             *(repr(float(v)) for v in row)])


def read_features_csv(path) -> FeatureMatrix:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DocumentError(f"{path}: {exc.strerror or exc}") from exc
    if not rows or len(rows[0]) < 4 or rows[0][:4] != ["project", "version", "file_id", "label"]:
        raise DocumentError(f"{path}: not a feature file (bad header)")
    dim = len(rows[0]) - 4
    keys, labels = [], []
    values = np.empty((len(rows) - 1, dim))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != dim + 4:
            raise DocumentError(f"{path}:{r}: expected {dim + 4} columns, got {len(row)}")
        keys.append((row[0], row[1], row[2]))
        if row[3] == "":
            labels.append(None)
        elif row[3] in ("0", "1"):
            labels.append(int(row[3]))
        else:
            raise DocumentError(f"{path}:{r}: label must be 0, 1 or empty")
        try:
            values[r - 2] = [float(v) for v in row[4:]]
        except ValueError as exc:
            raise DocumentError(f"{path}:{r}: bad feature value") from exc
    return FeatureMatrix(keys, values, labels)
