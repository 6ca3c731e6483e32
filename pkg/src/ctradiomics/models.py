"""Classifier families: logistic regression, KNN, linear SVM, CART and random forest.

Every model embeds the Scaler fitted on its training rows and standardises
inputs itself, so scoring needs only the model file and raw feature values.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CorruptModel,
    InvalidSpec,
    KeyMismatch,
    SchemaVersionMismatch,
    SingleClassTraining,
    UnstandardizedInput,
)
from .features.table import FeatureTable
from .stats import Scaler, check_training_rows, scaler_fit

SCHEMA = 1
THRESHOLD = 0.5
SPLIT_TIE = 1e-12

DEFAULTS = {
    "logreg": {"lambda": 1.0, "max_iter": 500, "tol": 1e-8},
    "knn": {"k": 5},
    "linear_svm": {"lambda": 0.01, "epochs": 200, "seed": 0},
    "decision_tree": {"max_depth": None, "min_leaf": 1, "seed": 0},
    "random_forest": {"n_trees": 100, "mtry": None, "min_leaf": 1, "bootstrap": True, "seed": None},
}
MODEL_KINDS = tuple(DEFAULTS)


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DEFAULTS:
            raise InvalidSpec(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise InvalidSpec(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")
        merged = {**DEFAULTS[self.kind], **self.params}
        object.__setattr__(self, "params", merged)
        self._validate(merged)

    def _validate(self, p):
        def need(cond, what):
            if not cond:
                raise InvalidSpec(f"{self.kind}: {what}")

        def is_int(v):
            return isinstance(v, (int, np.integer)) and not isinstance(v, bool)

        if self.kind == "logreg":
            need(p["lambda"] >= 0, "lambda must be >= 0")
            need(is_int(p["max_iter"]) and p["max_iter"] >= 1, "max_iter must be a positive int")
            need(p["tol"] > 0, "tol must be > 0")
        elif self.kind == "knn":
            need(is_int(p["k"]) and p["k"] >= 1, "k must be a positive int")
        elif self.kind == "linear_svm":
            need(p["lambda"] > 0, "lambda must be > 0")
            need(is_int(p["epochs"]) and p["epochs"] >= 1, "epochs must be a positive int")
        else:
            need(is_int(p["min_leaf"]) and p["min_leaf"] >= 1, "min_leaf must be a positive int")
            if self.kind == "decision_tree":
                need(p["max_depth"] is None or (is_int(p["max_depth"]) and p["max_depth"] >= 1),
                     "max_depth must be null or a positive int")
            else:
                need(is_int(p["n_trees"]) and p["n_trees"] >= 1, "n_trees must be a positive int")
                need(p["mtry"] is None or (is_int(p["mtry"]) and p["mtry"] >= 1),
                     "mtry must be null or a positive int")
                need(isinstance(p["bootstrap"], bool), "bootstrap must be a boolean")
        if self.kind in ("linear_svm", "decision_tree", "random_forest"):
            need(is_int(p["seed"]), "seed is mandatory and must be an int")

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_json(cls, doc: dict) -> "ModelSpec":
        return cls(doc["kind"], dict(doc.get("params", {})))


@dataclass(frozen=True)
class Prediction:
    score: float
    margin: float | None
    label: int


# --------------------------------------------------------------------- trees


@dataclass
class Tree:
    """Flat binary tree; leaves have ``left == right == -1``; ``x <= threshold`` goes left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, Z: np.ndarray) -> np.ndarray:
        node = np.zeros(len(Z), dtype=np.int64)
        rows = np.arange(len(Z))
        while True:
            internal = self.left[node] >= 0
            if not internal.any():
                break
            r, nd = rows[internal], node[internal]
            go_left = Z[r, self.feature[nd]] <= self.threshold[nd]
            node[internal] = np.where(go_left, self.left[nd], self.right[nd])
        return self.value[node]

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            n, d = stack.pop()
            best = max(best, d)
            if self.left[n] >= 0:
                stack += [(self.left[n], d + 1), (self.right[n], d + 1)]
        return best

    def to_json(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(), "cover": self.cover.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "Tree":
        t = cls(np.array(doc["feature"], dtype=np.int64),
                np.array(doc["threshold"], dtype=np.float64),
                np.array(doc["left"], dtype=np.int64), np.array(doc["right"], dtype=np.int64),
                np.array(doc["value"], dtype=np.float64), np.array(doc["cover"], dtype=np.float64))
        t.check()
        return t

    def check(self) -> None:
        n = self.n_nodes
        arrays = (self.threshold, self.left, self.right, self.value, self.cover)
        if n == 0 or any(len(a) != n for a in arrays):
            raise CorruptModel("tree arrays are empty or of unequal length")
        internal = self.left >= 0
        if np.any(internal != (self.right >= 0)):
            raise CorruptModel("internal node with a single child")
        kids = np.concatenate([self.left[internal], self.right[internal]])
        if np.any(kids >= n) or np.any(kids <= 0) or len(np.unique(kids)) != len(kids):
            raise CorruptModel("child indices are out of range or shared")
        if np.any((self.value < 0) | (self.value > 1)) or not np.all(np.isfinite(self.threshold)):
            raise CorruptModel("leaf values must lie in [0, 1] and thresholds be finite")


def _best_split(Z: np.ndarray, y: np.ndarray, features, min_leaf: int):
    """Lowest weighted Gini over ``features``; ties go to the lower feature, then threshold.

    Returns ``(feature, threshold)`` or None when no admissible split exists.
    Zero-gain splits are admissible, which lets XOR-type targets be learnt.
    """
    n = len(y)
    best = None  # (impurity, feature, threshold)
    for f in sorted(features):
        order = np.argsort(Z[:, f], kind="stable")
        xs, ys = Z[order, f], y[order]
        cut = np.flatnonzero(xs[1:] > xs[:-1])  # split after position cut
        if len(cut) == 0:
            continue
        nl = cut + 1
        nr = n - nl
        ok = (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        cut, nl, nr = cut[ok], nl[ok], nr[ok]
        l1 = np.cumsum(ys)[cut]
        l0 = nl - l1
        r1 = ys.sum() - l1
        r0 = nr - r1
        # n * weighted Gini; written symmetrically in the two classes
        imp = 2.0 * l0 * l1 / nl + 2.0 * r0 * r1 / nr
        i = int(np.argmin(imp))
        thr = 0.5 * (xs[cut[i]] + xs[cut[i] + 1])
        if best is None or imp[i] < best[0] - SPLIT_TIE:
            best = (imp[i], f, thr)
    return None if best is None else (best[1], best[2])


def grow_tree(Z: np.ndarray, y: np.ndarray, max_depth=None, min_leaf: int = 1,
              mtry: int | None = None, rng: np.random.Generator | None = None) -> Tree:
    """CART with Gini impurity; ``mtry`` features are drawn per node when given."""
    y = np.asarray(y, dtype=np.int64)
    p = Z.shape[1]
    feat, thr, left, right, val, cover = [], [], [], [], [], []

    def candidates(rows):
        if mtry is None or mtry >= p:
            return _best_split(Z[rows], y[rows], range(p), min_leaf)
        perm = rng.permutation(p)
        split = _best_split(Z[rows], y[rows], perm[:mtry], min_leaf)
        # keep drawing when every sampled feature is constant in this node
        start = mtry
        while split is None and start < p:
            split = _best_split(Z[rows], y[rows], perm[start:start + mtry], min_leaf)
            start += mtry
        return split

    def build(rows, depth):
        node = len(feat)
        ys = y[rows]
        feat.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        val.append(float(ys.sum()) / len(ys))
        cover.append(float(len(ys)))
        pure = ys.min() == ys.max()
        if pure or (max_depth is not None and depth >= max_depth) or len(rows) < 2 * min_leaf:
            return node
        split = candidates(rows)
        if split is None:
            return node
        f, t = split
        go_left = Z[rows, f] <= t
        feat[node], thr[node] = int(f), float(t)
        left[node] = build(rows[go_left], depth + 1)
        right[node] = build(rows[~go_left], depth + 1)
        return node

    build(np.arange(len(y)), 0)
    return Tree(np.array(feat, dtype=np.int64), np.array(thr), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(val), np.array(cover))


# ------------------------------------------------------------ linear models


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log1pexp(z):
    return np.logaddexp(0.0, z)


UNSTANDARDIZED_MEAN = 3.0


def warn_if_unstandardized(Z) -> bool:
    """Gradient fitters assume z-scored columns; ``train`` always supplies them."""
    means = np.abs(np.mean(Z, axis=0)) if len(Z) else np.zeros(0)
    if means.size and means.max() > UNSTANDARDIZED_MEAN:
        warnings.warn(f"largest column mean {means.max():.3g}: input does not look standardised",
                      UnstandardizedInput, stacklevel=3)
        return True
    return False


def fit_logreg(Z, y, lam=1.0, max_iter=500, tol=1e-8):
    """Gradient descent with Armijo backtracking on
    ``mean(cross-entropy) + lam / (2 n) * |w|^2`` (bias unpenalised)."""
    warn_if_unstandardized(Z)
    n, p = Z.shape
    y = np.asarray(y, dtype=np.float64)
    A = np.column_stack([Z, np.ones(n)])
    reg = np.full(p + 1, lam / n)
    reg[-1] = 0.0

    def objective(theta):
        m = A @ theta
        return float(np.mean(_log1pexp(m) - y * m) + 0.5 * np.sum(reg * theta ** 2))

    def gradient(theta):
        return A.T @ (_sigmoid(A @ theta) - y) / n + reg * theta

    theta = np.zeros(p + 1)
    step = 1.0
    f = objective(theta)
    for _ in range(max_iter):
        g = gradient(theta)
        if np.max(np.abs(g)) < tol:
            break
        gg = float(g @ g)
        step = min(step * 2.0, 1e6)
        while True:
            cand = theta - step * g
            fc = objective(cand)
            if fc <= f - 0.5 * step * gg or step < 1e-14:
                break
            step *= 0.5
        theta, f = cand, fc
    return theta[:-1], float(theta[-1])


def fit_platt(margins, y, iters=100):
    """Platt scaling ``score = sigmoid(a * margin + b)`` with smoothed targets."""
    m = np.asarray(margins, dtype=np.float64)
    y = np.asarray(y)
    n_pos, n_neg = int(y.sum()), int(len(y) - y.sum())
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 1.0, math.log((n_pos + 1.0) / (n_neg + 1.0))

    def nll(a, b):
        z = a * m + b
        return float(np.sum(_log1pexp(z) - t * z))

    f = nll(a, b)
    for _ in range(iters):
        s = _sigmoid(a * m + b)
        r = s - t
        w = s * (1 - s) + 1e-12
        g = np.array([r @ m, r.sum()])
        H = np.array([[w @ (m * m), w @ m], [w @ m, w.sum()]]) + 1e-12 * np.eye(2)
        if np.max(np.abs(g)) < 1e-10:
            break
        d = np.linalg.solve(H, g)
        step = 1.0
        while step > 1e-10:
            fa = nll(a - step * d[0], b - step * d[1])
            if fa <= f:
                break
            step *= 0.5
        else:
            break
        a, b, f = a - step * d[0], b - step * d[1], fa
    return float(a), float(b)


def fit_linear_svm(Z, y, lam=0.01, epochs=200, seed=0):
    """Pegasos: hinge loss + L2 with step ``1 / (lam t)``, seeded per-epoch order.

    A constant feature carries the (regularised) bias.
    """
    warn_if_unstandardized(Z)
    n, p = Z.shape
    A = np.column_stack([Z, np.ones(n)])
    s = np.where(np.asarray(y) == 1, 1.0, -1.0)
    w = np.zeros(p + 1)
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            viol = s[i] * (A[i] @ w) < 1.0
            w *= 1.0 - eta * lam
            if viol:
                w += eta * s[i] * A[i]
    return w[:-1], float(w[-1])


# ------------------------------------------------------------------ models


@dataclass
class TrainedModel:
    spec: ModelSpec
    keys: list[str]
    scaler: Scaler
    params: dict
    train_rows_hash: str
    schema: int = SCHEMA

    # -- scoring on standardised rows
    def margin_matrix(self, Z: np.ndarray) -> np.ndarray | None:
        if self.spec.kind in ("logreg", "linear_svm"):
            return Z @ self.params["w"] + self.params["b"]
        return None

    def score_matrix(self, Z: np.ndarray) -> np.ndarray:
        kind = self.spec.kind
        if kind == "logreg":
            s = _sigmoid(self.margin_matrix(Z))
        elif kind == "linear_svm":
            s = _sigmoid(self.params["platt_a"] * self.margin_matrix(Z) + self.params["platt_b"])
        elif kind == "knn":
            s = _knn_scores(self.params["exemplars"], self.params["labels"],
                            self.params["k"], Z)
        elif kind == "decision_tree":
            s = self.params["tree"].predict(Z)
        else:
            s = np.mean([t.predict(Z) for t in self.params["trees"]], axis=0)
        return np.clip(np.asarray(s, dtype=np.float64), 0.0, 1.0)

    @property
    def trees(self) -> list[Tree]:
        if self.spec.kind == "decision_tree":
            return [self.params["tree"]]
        return list(self.params.get("trees", []))

    # -- scoring on raw rows
    def standardise(self, X: np.ndarray) -> np.ndarray:
        return self.scaler.transform(X)

    def scores(self, X: np.ndarray) -> np.ndarray:
        return self.score_matrix(self.standardise(np.atleast_2d(X)))


def _knn_scores(E: np.ndarray, labels: np.ndarray, k: int, Z: np.ndarray) -> np.ndarray:
    k = min(k, len(E))
    out = np.empty(len(Z))
    for i, z in enumerate(Z):
        d = np.sum((E - z) ** 2, axis=1)
        nearest = np.argsort(d, kind="stable")[:k]  # equal distance -> lower row index
        out[i] = labels[nearest].mean()
    return out


def train(spec: ModelSpec, table: FeatureTable) -> TrainedModel:
    """Fit a Scaler on the training table, standardise, then fit the model."""
    check_training_rows(table)
    y = np.asarray(table.y, dtype=np.int64)
    if len(y) < 2 or len(np.unique(y)) < 2:
        raise SingleClassTraining("training needs at least one row of each class")
    scaler = scaler_fit(table)
    Z = scaler.transform(table.X)
    p = spec.params
    kind = spec.kind
    if kind == "logreg":
        w, b = fit_logreg(Z, y, p["lambda"], p["max_iter"], p["tol"])
        params = {"w": w, "b": b}
    elif kind == "knn":
        params = {"k": p["k"], "exemplars": Z.copy(), "labels": y.astype(np.float64)}
    elif kind == "linear_svm":
        w, b = fit_linear_svm(Z, y, p["lambda"], p["epochs"], p["seed"])
        a, c = fit_platt(Z @ w + b, y)
        params = {"w": w, "b": b, "platt_a": a, "platt_b": c}
    elif kind == "decision_tree":
        params = {"tree": grow_tree(Z, y, p["max_depth"], p["min_leaf"])}
    else:
        n, nf = Z.shape
        mtry = p["mtry"] or max(1, int(math.isqrt(nf)))
        trees = []
        for t in range(p["n_trees"]):
            rng = np.random.default_rng([p["seed"], t])
            rows = rng.integers(0, n, n) if p["bootstrap"] else np.arange(n)
            trees.append(grow_tree(Z[rows], y[rows], None, p["min_leaf"], mtry, rng))
        params = {"trees": trees, "mtry": mtry}
    return TrainedModel(spec, list(table.keys), scaler, params, table.ids_hash)


def predict_scores(model: TrainedModel, table: FeatureTable) -> np.ndarray:
    """Scores for every row of ``table``; columns are aligned by key."""
    return model.scores(table.columns(model.keys).X)


def predict_score(model: TrainedModel, row: dict) -> Prediction:
    missing = [k for k in model.keys if k not in row]
    if missing:
        raise KeyMismatch(f"row lacks model keys, e.g. {missing[:3]}")
    x = np.array([[float(row[k]) for k in model.keys]])
    Z = model.standardise(x)
    score = float(model.score_matrix(Z)[0])
    m = model.margin_matrix(Z)
    return Prediction(score, None if m is None else float(m[0]), int(score >= THRESHOLD))


# ------------------------------------------------------------- persistence


def _params_to_json(kind: str, params: dict) -> dict:
    if kind in ("logreg", "linear_svm"):
        out = {"w": params["w"].tolist(), "b": params["b"]}
        if kind == "linear_svm":
            out.update(platt_a=params["platt_a"], platt_b=params["platt_b"])
        return out
    if kind == "knn":
        return {"k": params["k"], "exemplars": params["exemplars"].tolist(),
                "labels": params["labels"].tolist()}
    if kind == "decision_tree":
        return {"tree": params["tree"].to_json()}
    return {"mtry": params["mtry"], "trees": [t.to_json() for t in params["trees"]]}


def _params_from_json(kind: str, doc: dict) -> dict:
    if kind in ("logreg", "linear_svm"):
        out = {"w": np.array(doc["w"], dtype=np.float64), "b": float(doc["b"])}
        if kind == "linear_svm":
            out.update(platt_a=float(doc["platt_a"]), platt_b=float(doc["platt_b"]))
        return out
    if kind == "knn":
        return {"k": int(doc["k"]), "exemplars": np.array(doc["exemplars"], dtype=np.float64),
                "labels": np.array(doc["labels"], dtype=np.float64)}
    if kind == "decision_tree":
        return {"tree": Tree.from_json(doc["tree"])}
    return {"mtry": int(doc["mtry"]), "trees": [Tree.from_json(t) for t in doc["trees"]]}


def model_to_json(model: TrainedModel) -> dict:
    return {"schema": model.schema, "spec": model.spec.to_json(), "keys": list(model.keys),
            "scaler": model.scaler.to_json(), "params": _params_to_json(model.spec.kind, model.params),
            "train_rows_hash": model.train_rows_hash}


def dumps(model: TrainedModel) -> str:
    return json.dumps(model_to_json(model), sort_keys=True, separators=(",", ":")) + "\n"


def save(model: TrainedModel, path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def loads(text: str) -> TrainedModel:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise CorruptModel(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "schema" not in doc:
        raise CorruptModel("model document has no schema field")
    if doc["schema"] != SCHEMA:
        raise SchemaVersionMismatch(f"model schema {doc['schema']!r}, expected {SCHEMA}")
    try:
        spec = ModelSpec.from_json(doc["spec"])
        model = TrainedModel(spec, list(doc["keys"]), Scaler.from_json(doc["scaler"]),
                             _params_from_json(spec.kind, doc["params"]), doc["train_rows_hash"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"model document is incomplete: {exc!r}") from exc
    if model.scaler.keys != model.keys:
        raise CorruptModel("scaler keys disagree with model keys")
    return model


def load(path) -> TrainedModel:
    return loads(Path(path).read_text(encoding="utf-8"))
