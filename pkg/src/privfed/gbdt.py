"""Second-order (Newton) gradient boosted trees for binary logistic loss.

Trees are grown by exact greedy search. Leaf weights are stored unscaled and
multiplied by the learning rate when scores are accumulated:

    raw(x) = base_score + learning_rate * sum_t leaf_t(x)
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, InvalidHyper, MalformedModel, SingleClassInit

FORMAT_VERSION = 1
HESSIAN_FLOOR = 1e-16


@dataclass(frozen=True)
class GbdtHyper:
    trees_total: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    lambda_reg: float = 1.0
    min_child_weight: float = 1.0

    def validate(self):
        if self.trees_total < 1:
            raise InvalidHyper("trees_total must be >= 1")
        if self.max_depth < 1:
            raise InvalidHyper("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidHyper("learning_rate must lie in (0, 1]")
        if self.lambda_reg < 0 or self.min_child_weight < 0:
            raise InvalidHyper("lambda_reg and min_child_weight must be >= 0")
        return self


@dataclass(frozen=True)
class Leaf:
    weight: float


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class GbdtModel:
    base_score: float
    learning_rate: float
    trees: tuple = ()
    n_train: int = 0
    n_features: int | None = None
    format_version: int = FORMAT_VERSION

    @classmethod
    def empty(cls, learning_rate: float = 0.1) -> "GbdtModel":
        return cls(base_score=math.nan, learning_rate=learning_rate)

    @property
    def initialized(self) -> bool:
        return not math.isnan(self.base_score)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(raw, y):
    """Mean negative log-likelihood, computed stably from raw scores."""
    raw = np.asarray(raw, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def grad_hess(raw, y):
    p = sigmoid(raw)
    g = p - y
    h = np.maximum(p * (1.0 - p), HESSIAN_FLOOR)
    return g, h


def _tree_values(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=np.float64)
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if isinstance(nd, Leaf):
            out[idx] = nd.weight
            continue
        go_left = X[idx, nd.feature_index] < nd.threshold
        stack.append((nd.left, idx[go_left]))
        stack.append((nd.right, idx[~go_left]))
    return out


def leaf_sum(model: GbdtModel, X: np.ndarray) -> np.ndarray:
    s = np.zeros(X.shape[0], dtype=np.float64)
    for tree in model.trees:
        s += _tree_values(tree, X)
    return s


def raw_score(model: GbdtModel, X) -> np.ndarray:
    X = _as_matrix(model, X)
    return model.base_score + model.learning_rate * leaf_sum(model, X)


def predict_proba(model: GbdtModel, X) -> np.ndarray | float:
    """Positive-class probability for one vector (returns float) or a matrix."""
    single = np.ndim(X) == 1
    p = sigmoid(raw_score(model, X))
    return float(p[0]) if single else p


def _as_matrix(model: GbdtModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if model.n_features is not None and X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {X.shape[1]}")
    return X


def _best_split(X, g, h, idx, hyper: GbdtHyper):
    """Return (gain, feature, threshold) of the best admissible split, or None.

    Ties on gain keep the lower feature index, then the lower threshold.
    """
    lam = hyper.lambda_reg
    G = g[idx].sum()
    H = h[idx].sum()
    parent = G * G / (H + lam)
    best = None
    for f in range(X.shape[1]):
        col = X[idx, f]
        order = np.argsort(col, kind="stable")
        v = col[order]
        cg = np.cumsum(g[idx][order])
        ch = np.cumsum(h[idx][order])
        # candidate cut after position i where v[i] < v[i + 1]
        cut = np.flatnonzero(v[:-1] < v[1:])
        if cut.size == 0:
            continue
        GL, HL = cg[cut], ch[cut]
        GR, HR = G - GL, H - HL
        ok = (HL >= hyper.min_child_weight) & (HR >= hyper.min_child_weight)
        if not ok.any():
            continue
        gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent)
        gain = np.where(ok, gain, -np.inf)
        j = int(np.argmax(gain))
        if gain[j] > 0 and (best is None or gain[j] > best[0]):
            thr = (v[cut[j]] + v[cut[j] + 1]) / 2.0
            best = (float(gain[j]), f, float(thr))
    return best


def _grow(X, g, h, idx, depth, hyper: GbdtHyper) -> TreeNode:
    if depth < hyper.max_depth and idx.size >= 2:
        best = _best_split(X, g, h, idx, hyper)
        if best is not None:
            _, f, thr = best
            go_left = X[idx, f] < thr
            return Split(
                feature_index=f,
                threshold=thr,
                left=_grow(X, g, h, idx[go_left], depth + 1, hyper),
                right=_grow(X, g, h, idx[~go_left], depth + 1, hyper),
            )
    return Leaf(weight=float(-g[idx].sum() / (h[idx].sum() + hyper.lambda_reg)))


def fit_tree(X, g, h, hyper: GbdtHyper) -> TreeNode:
    return _grow(X, g, h, np.arange(X.shape[0]), 0, hyper)


def train_increment(model: GbdtModel | None, ds: Dataset, hyper: GbdtHyper, n_new_trees: int, seed: int = 0) -> GbdtModel:
    """Append ``n_new_trees`` trees fit to ``ds``.

    An empty (or ``None``) model first gets its base score from the positive
    rate of ``ds``. ``seed`` is accepted for interface stability; training is
    deterministic.
    """
    hyper.validate()
    if n_new_trees < 0:
        raise InvalidHyper("n_new_trees must be >= 0")
    if model is None or not model.initialized:
        p_bar = float(ds.labels.mean()) if ds.n else math.nan
        if not 0.0 < p_bar < 1.0:
            raise SingleClassInit("cannot initialise base score from a single-class dataset")
        model = GbdtModel(
            base_score=math.log(p_bar / (1.0 - p_bar)),
            learning_rate=hyper.learning_rate,
            n_features=ds.d,
        )
    elif model.learning_rate != hyper.learning_rate:
        raise InvalidHyper("learning_rate differs from the model being extended")
    X = _as_matrix(model, ds.features)
    y = ds.labels.astype(np.float64)

    s = leaf_sum(model, X)
    trees = list(model.trees)
    for _ in range(n_new_trees):
        g, h = grad_hess(model.base_score + model.learning_rate * s, y)
        tree = fit_tree(X, g, h, hyper)
        trees.append(tree)
        s += _tree_values(tree, X)
    return GbdtModel(
        base_score=model.base_score,
        learning_rate=model.learning_rate,
        trees=tuple(trees),
        n_train=max(model.n_train, ds.n),
        n_features=ds.d if model.n_features is None else model.n_features,
    )


# -- canonical serialization ------------------------------------------------

_MODEL_FIELDS = {"base_score", "checksum", "format_version", "learning_rate", "n_features", "n_train", "trees"}


def _node_to_doc(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.weight}
    return {
        "feature": node.feature_index,
        "left": _node_to_doc(node.left),
        "right": _node_to_doc(node.right),
        "threshold": node.threshold,
    }


def _doc_to_node(doc) -> TreeNode:
    if not isinstance(doc, dict):
        raise MalformedModel("tree node must be an object")
    if set(doc) == {"leaf"}:
        return Leaf(weight=_real(doc["leaf"]))
    if set(doc) == {"feature", "left", "right", "threshold"}:
        f = doc["feature"]
        if not isinstance(f, int) or isinstance(f, bool) or f < 0:
            raise MalformedModel("feature index must be a non-negative integer")
        return Split(f, _real(doc["threshold"]), _doc_to_node(doc["left"]), _doc_to_node(doc["right"]))
    raise MalformedModel(f"unknown tree node fields {sorted(doc)}")


def _real(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MalformedModel(f"expected a real, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise MalformedModel("non-finite real")
    return v


def _dump(doc: dict) -> bytes:
    # float repr is the shortest string that round-trips a 64-bit float
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def serialize(model: GbdtModel) -> bytes:
    if not model.initialized:
        raise MalformedModel("cannot serialize an uninitialised model")
    doc = {
        "base_score": model.base_score,
        "format_version": model.format_version,
        "learning_rate": model.learning_rate,
        "n_features": model.n_features,
        "n_train": model.n_train,
        "trees": [_node_to_doc(t) for t in model.trees],
    }
    doc["checksum"] = hashlib.sha256(_dump(doc)).hexdigest()
    return _dump(doc)


def deserialize(data: bytes) -> GbdtModel:
    """Parse canonical model bytes.

    Rejects anything that is not byte-for-byte the canonical rendering of a
    model whose embedded SHA-256 checksum matches.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedModel(f"not a model document: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedModel("model document must be an object")
    if set(doc) != _MODEL_FIELDS:
        raise MalformedModel(f"unexpected field set {sorted(doc)}")
    if doc["format_version"] != FORMAT_VERSION or isinstance(doc["format_version"], bool):
        raise MalformedModel(f"unsupported format_version {doc['format_version']!r}")
    checksum = doc.pop("checksum")
    if not isinstance(checksum, str) or hashlib.sha256(_dump(doc)).hexdigest() != checksum:
        raise MalformedModel("checksum mismatch")
    for key in ("n_train", "n_features"):
        if not isinstance(doc[key], int) or isinstance(doc[key], bool) or doc[key] < 0:
            raise MalformedModel(f"{key} must be a non-negative integer")
    if not isinstance(doc["trees"], list):
        raise MalformedModel("trees must be a list")
    model = GbdtModel(
        base_score=_real(doc["base_score"]),
        learning_rate=_real(doc["learning_rate"]),
        trees=tuple(_doc_to_node(t) for t in doc["trees"]),
        n_train=doc["n_train"],
        n_features=doc["n_features"],
    )
    if serialize(model) != bytes(data):
        raise MalformedModel("document is not in canonical form")
    return model
