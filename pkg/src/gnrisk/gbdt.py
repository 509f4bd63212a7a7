"""Second-order gradient-boosted regression trees for binary default labels.

The ensemble predicts ``sigmoid(base_score + sum_k eta * f_k(x))``.  Each tree
is fitted to the gradient and hessian of the logistic loss; split candidates
are scored by the regularised structure gain and leaves take the closed-form
weight ``-G / (H + lambda)``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class TrainParams:
    K: int = 100
    eta: float = 0.1
    max_depth: int = 4
    gamma: float = 0.0
    lam: float = 1.0
    min_child_hessian: float = 1.0
    base_score: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.gamma < 0 or self.lam < 0:
            raise ValueError("gamma and lambda must be non-negative")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainParams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass
class TreeNode:
    """Internal node when ``feature`` is set (left iff value < threshold), else a leaf."""

    feature: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.weight}
        return {"feat": self.feature, "thr": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "leaf" in d:
            return cls(weight=float(d["leaf"]))
        return cls(feature=int(d["feat"]), threshold=float(d["thr"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))

    def internal_nodes(self):
        if not self.is_leaf:
            yield self
            yield from self.left.internal_nodes()
            yield from self.right.internal_nodes()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())


@dataclass
class TreeEnsemble:
    trees: list
    params: TrainParams
    dimension_names: list
    categories: dict = field(default_factory=dict)

    def margin(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.dimension_names):
            raise ValueError(f"expected {len(self.dimension_names)} dimensions, got {X.shape[1]}")
        out = np.full(X.shape[0], self.params.base_score)
        for tree in self.trees:
            out += self.params.eta * predict_tree(tree, X)
        return out

    def predict(self, X) -> np.ndarray:
        return sigmoid(self.margin(X))

    def to_json(self) -> str:
        doc = {
            "params": self.params.to_dict(),
            "dimension_names": list(self.dimension_names),
            "categories": dict(self.categories),
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TreeEnsemble":
        doc = json.loads(text)
        return cls(
            trees=[TreeNode.from_dict(t) for t in doc["trees"]],
            params=TrainParams.from_dict(doc["params"]),
            dimension_names=list(doc["dimension_names"]),
            categories=dict(doc.get("categories", {})),
        )


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def logistic_loss(logits, labels) -> float:
    """Mean negative log-likelihood of binary ``labels`` under ``logits``."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def grad_hess(pred_logit, label):
    """First and second derivative of the logistic loss w.r.t. the logit."""
    p = sigmoid(pred_logit)
    g = p - np.asarray(label, dtype=np.float64)
    h = p * (1.0 - p)
    if np.ndim(g) == 0:
        return float(g), float(h)
    return g, h


def leaf_weight(G: float, H: float, lam: float) -> float:
    return -G / (H + lam)


def split_gain(GL, HL, GR, HR, lam, gamma):
    G, H = GL + GR, HL + HR
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)) - gamma


@dataclass(frozen=True)
class SplitDecision:
    feature: int
    threshold: float
    gain: float


def presort(X: np.ndarray) -> np.ndarray:
    """Stable ascending row order per feature, shape (n_features, n_rows)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def best_split(X, g, h, params: TrainParams, rows=None, order=None) -> SplitDecision | None:
    """Exact greedy search over every feature and every midpoint between
    consecutive distinct values of the rows reaching the node.

    Returns ``None`` when no admissible split has positive gain.
    """
    X = np.asarray(X, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n = X.shape[0]
    if order is None:
        order = presort(X)
    in_node = np.zeros(n, dtype=np.uint8)
    if rows is None:
        rows = np.arange(n)
    in_node[rows] = 1
    if len(rows) < 2:
        return None
    G = float(np.sum(g[rows]))
    H = float(np.sum(h[rows]))
    f, thr, gain = _kernels.best_split(X, order, in_node, g, h, G, H, params.lam, params.gamma,
                                       params.min_child_hessian)
    if f < 0:
        return None
    return SplitDecision(int(f), float(thr), float(gain))


def _grow(X, order, g, h, rows, depth, params) -> TreeNode:
    """``order`` holds, per feature, the node's rows in ascending value order;
    children receive stable partitions of it, so no node rescans the full set."""
    if depth < params.max_depth and rows.size >= 2:
        split = best_split(X, g, h, params, rows=rows, order=order)
        if split is not None:
            go_left = X[rows, split.feature] < split.threshold
            left, right = rows[go_left], rows[~go_left]
            left_order = right_order = None
            if depth + 1 < params.max_depth:
                side = np.zeros(X.shape[0], dtype=np.uint8)
                side[left] = 1
                left_order, right_order = _kernels.partition_order(order, side)
            return TreeNode(
                feature=split.feature,
                threshold=split.threshold,
                left=_grow(X, left_order, g, h, left, depth + 1, params),
                right=_grow(X, right_order, g, h, right, depth + 1, params),
            )
    return TreeNode(weight=leaf_weight(float(np.sum(g[rows])), float(np.sum(h[rows])), params.lam))


def predict_tree(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, rows = stack.pop()
        if nd.is_leaf:
            out[rows] = nd.weight
            continue
        left = X[rows, nd.feature] < nd.threshold
        stack.append((nd.left, rows[left]))
        stack.append((nd.right, rows[~left]))
    return out


def train(matrix, params: TrainParams | None = None, labels=None, callback=None) -> TreeEnsemble:
    """Fit ``params.K`` trees depth-first on a FeatureMatrix (or an array plus
    ``labels``).  ``callback(k, logits)`` sees the margins after each round."""
    params = params or TrainParams()
    if hasattr(matrix, "X"):
        X, y = matrix.X, matrix.y if labels is None else labels
        names, categories = list(matrix.dimensions), dict(matrix.categories)
    else:
        X, y = matrix, labels
        names, categories = None, {}
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("feature matrix has no dimensions")
    if X.shape[0] == 0:
        raise ValueError("feature matrix has no rows")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],) or not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be a binary vector, one per row")
    if names is None:
        names = [f"x{j}" for j in range(X.shape[1])]
    order = presort(X)
    rows = np.arange(X.shape[0])
    logits = np.full(X.shape[0], params.base_score)
    trees = []
    for k in range(params.K):
        g, h = grad_hess(logits, y)
        tree = _grow(X, order, g, h, rows, 0, params)
        trees.append(tree)
        logits = logits + params.eta * predict_tree(tree, X)
        if callback is not None:
            callback(k, logits)
    return TreeEnsemble(trees=trees, params=params, dimension_names=names, categories=categories)


def predict(ensemble: TreeEnsemble, x) -> np.ndarray | float:
    """Default probability for one row (returns a float) or a matrix of rows."""
    x = np.asarray(x, dtype=np.float64)
    p = ensemble.predict(x)
    return float(p[0]) if x.ndim == 1 else p


@dataclass
class Importance:
    counts: dict
    category_counts: dict
    shares: dict
    empty: bool

    def to_dict(self) -> dict:
        return asdict(self)


def importance(ensemble: TreeEnsemble, categories: dict | None = None) -> Importance:
    """Split counts per dimension over all internal nodes, and their category shares."""
    categories = categories if categories is not None else ensemble.categories
    counts = {name: 0 for name in ensemble.dimension_names}
    for tree in ensemble.trees:
        for nd in tree.internal_nodes():
            counts[ensemble.dimension_names[nd.feature]] += 1
    cat_names = sorted(set(categories.values())) if categories else []
    cat_counts = {c: 0 for c in cat_names}
    for name, c in counts.items():
        if name in categories:
            cat_counts[categories[name]] += c
    total = sum(counts.values())
    shares = {c: (v / total if total else 0.0) for c, v in cat_counts.items()}
    return Importance(counts=counts, category_counts=cat_counts, shares=shares, empty=total == 0)
