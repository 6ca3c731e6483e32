"""Standardisation, univariate group statistics, correlation and ridge RFE."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .errors import InsufficientData, KTooLarge, NonFinite, TestLeakage
from .features.table import FeatureTable
from .imaging import rows_hash

STD_FLOOR = 1e-12


# -------------------------------------------------------------------- scaler


@dataclass
class Scaler:
    keys: list[str]
    mean: np.ndarray
    std: np.ndarray
    fit_rows_hash: str = ""
    constant: list[str] = field(default_factory=list)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z) * self.std + self.mean

    def to_json(self) -> dict:
        return {"keys": list(self.keys), "mean": self.mean.tolist(), "std": self.std.tolist(),
                "fit_rows_hash": self.fit_rows_hash, "constant": list(self.constant)}

    @classmethod
    def from_json(cls, doc: dict) -> "Scaler":
        return cls(list(doc["keys"]), np.array(doc["mean"], dtype=np.float64),
                   np.array(doc["std"], dtype=np.float64), doc.get("fit_rows_hash", ""),
                   list(doc.get("constant", [])))


def check_training_rows(table: FeatureTable) -> None:
    leaked = [i for i, s in zip(table.ids, table.splits) if s == "test"]
    if leaked:
        raise TestLeakage(f"{len(leaked)} test rows passed to a fitting routine, e.g. {leaked[0]}")


def scaler_fit(table: FeatureTable) -> Scaler:
    """Per-column mean and population std on training rows only."""
    check_training_rows(table)
    if not np.all(np.isfinite(table.X)):
        raise NonFinite("feature table has non-finite values")
    mean = table.X.mean(axis=0)
    std = table.X.std(axis=0)
    constant = [k for k, s in zip(table.keys, std) if s <= STD_FLOOR]
    return Scaler(list(table.keys), mean, np.maximum(std, STD_FLOOR), table.ids_hash, constant)


def scaler_apply(scaler: Scaler, table: FeatureTable) -> FeatureTable:
    aligned = table.columns(scaler.keys)
    return aligned.with_X(scaler.transform(aligned.X))


# ------------------------------------------------------- univariate tests


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p: float
    degenerate: bool = False


def welch_t(x, y) -> TestResult:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 2 or len(y) < 2:
        raise InsufficientData("Welch t-test needs at least two observations per group")
    va, vb = x.var(ddof=1) / len(x), y.var(ddof=1) / len(y)
    diff = x.mean() - y.mean()
    if va + vb == 0:
        if diff == 0:
            return TestResult(0.0, 1.0, True)
        return TestResult(math.copysign(math.inf, diff), 0.0, True)
    t = diff / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (len(x) - 1) + vb ** 2 / (len(y) - 1))
    p = 2.0 * stats.t.sf(abs(t), df)
    return TestResult(float(t), float(min(1.0, p)))


def midranks(values) -> np.ndarray:
    return stats.rankdata(values, method="average")


def mann_whitney(x, y) -> TestResult:
    """Two-sided Mann-Whitney U (U counts x > y pairs, ties as one half).

    Normal approximation with tie correction and a 0.5 continuity correction.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    n1, n2 = len(x), len(y)
    if n1 < 1 or n2 < 1:
        raise InsufficientData("Mann-Whitney needs at least one observation per group")
    pooled = np.concatenate([x, y])
    ranks = midranks(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    n = n1 + n2
    _, ties = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(ties ** 3 - ties)) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return TestResult(u, 1.0, True)
    z = (abs(u - n1 * n2 / 2.0) - 0.5) / math.sqrt(var)
    p = 2.0 * stats.norm.sf(max(z, 0.0))
    return TestResult(u, float(min(1.0, p)))


# ----------------------------------------------------------- group compare


@dataclass(frozen=True)
class GroupRow:
    key: str
    exp_mean: float
    exp_sd: float
    ctrl_mean: float
    ctrl_sd: float
    p_welch: float | None
    p_mannwhitney: float | None
    flags: tuple[str, ...] = ()


@dataclass
class GroupComparison:
    rows: list[GroupRow]

    def by_key(self) -> dict[str, GroupRow]:
        return {r.key: r for r in self.rows}

    def write_csv(self, path) -> None:
        def fmt(v):
            return "NA" if v is None else repr(float(v))

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["Num", "Radiomic Features", "Experimental Mean", "Experimental SD",
                        "Control Mean", "Control SD", "P (Welch)", "P (Mann-Whitney)", "Flags"])
            for i, r in enumerate(self.rows, 1):
                w.writerow([f"F{i}", r.key, fmt(r.exp_mean), fmt(r.exp_sd), fmt(r.ctrl_mean),
                            fmt(r.ctrl_sd), fmt(r.p_welch), fmt(r.p_mannwhitney),
                            ";".join(r.flags)])


def _sd(v: np.ndarray) -> float:
    return float(v.std(ddof=1)) if len(v) > 1 else 0.0


def group_compare(table: FeatureTable, keys=None) -> GroupComparison:
    """Malignant (experimental) versus benign (control) summary per feature."""
    keys = list(table.keys if keys is None else keys)
    sub = table.columns(keys)
    exp = sub.X[sub.y == 1]
    ctrl = sub.X[sub.y == 0]
    rows = []
    for j, key in enumerate(keys):
        a, b = exp[:, j], ctrl[:, j]
        flags = []
        p_w = p_mw = None
        if len(a) >= 2 and len(b) >= 2:
            w = welch_t(a, b)
            p_w = w.p
            if w.degenerate:
                flags.append("welch_degenerate")
        else:
            flags.append("welch_na")
        if len(a) >= 1 and len(b) >= 1:
            p_mw = mann_whitney(a, b).p
        else:
            flags.append("mannwhitney_na")
        rows.append(GroupRow(key, float(a.mean()) if len(a) else math.nan, _sd(a),
                             float(b.mean()) if len(b) else math.nan, _sd(b),
                             p_w, p_mw, tuple(flags)))
    return GroupComparison(rows)


# ------------------------------------------------------------- correlation


def correlation_matrix(X: np.ndarray, method: str = "pearson",
                       flags: list | None = None) -> np.ndarray:
    """Pairwise correlation of columns; constant columns correlate 0 with others."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise InsufficientData("correlation needs at least two rows")
    if method == "spearman":
        X = np.column_stack([midranks(c) for c in X.T])
    elif method != "pearson":
        raise ValueError(f"unknown correlation method {method!r}")
    centred = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(centred ** 2, axis=0))
    constant = norms == 0
    if constant.any() and flags is not None:
        flags.extend(f"constant_column:{j}" for j in np.flatnonzero(constant))
    safe = np.where(constant, 1.0, norms)
    R = (centred.T @ centred) / np.outer(safe, safe)
    R[constant, :] = 0.0
    R[:, constant] = 0.0
    R = np.clip((R + R.T) / 2, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    return R


# ------------------------------------------------------------------- ridge


def ridge_fit(X: np.ndarray, y: np.ndarray, alpha: float = 1.0,
              center: bool = True) -> tuple[np.ndarray, float]:
    """Ridge coefficients ``(X'X + alpha I)^-1 X'y`` and the unpenalised intercept."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFinite("ridge inputs must be finite")
    if center:
        xm, ym = X.mean(axis=0), y.mean()
        Xc, yc = X - xm, y - ym
    else:
        xm, ym = np.zeros(X.shape[1]), 0.0
        Xc, yc = X, y
    gram = Xc.T @ Xc
    gram[np.diag_indices_from(gram)] += alpha
    w = linalg.cho_solve(linalg.cho_factor(gram, lower=True), Xc.T @ yc)
    return w, float(ym - xm @ w)


@dataclass
class SelectionResult:
    selected: list[str]
    coefficients: list[float]
    trace: list[tuple[str, float]]
    k: int
    alpha: float
    fit_rows_hash: str = ""

    def to_json(self) -> dict:
        return {"schema": 1, "k": self.k, "alpha": self.alpha, "selected": list(self.selected),
                "coefficients": list(self.coefficients),
                "trace": [[k, c] for k, c in self.trace], "fit_rows_hash": self.fit_rows_hash}

    @classmethod
    def from_json(cls, doc: dict) -> "SelectionResult":
        return cls(list(doc["selected"]), list(doc.get("coefficients", [])),
                   [tuple(t) for t in doc.get("trace", [])], int(doc["k"]),
                   float(doc["alpha"]), doc.get("fit_rows_hash", ""))


def _weakest(weights: np.ndarray, m: int) -> np.ndarray:
    """Positions of the ``m`` smallest |w|; among ties the later position goes first."""
    mag = np.abs(weights)
    scale = mag.max()
    if scale > 0:
        # treat values equal to ~12 significant digits as tied
        mag = np.round(mag / scale, 12)
    order = np.lexsort((-np.arange(len(mag)), mag))
    return order[:m]


def rfe_ridge(X: np.ndarray, y: np.ndarray, keys, k: int = 20,
              alpha: float = 1.0) -> SelectionResult:
    """Recursive feature elimination driven by ridge coefficient magnitude.

    While more than ``2k`` features remain, ``ceil(10%)`` of them are dropped per
    refit; afterwards one per refit until ``k`` remain.  Ties keep the feature
    that comes first in ``keys``.
    """
    keys = list(keys)
    if k > len(keys):
        raise KTooLarge(f"k={k} exceeds the {len(keys)} available features")
    if k < 1:
        raise ValueError("k must be >= 1")
    alive = list(range(len(keys)))
    trace = []
    w, _ = ridge_fit(X[:, alive], y, alpha)
    while len(alive) > k:
        n = len(alive)
        step = math.ceil(0.1 * n) if n > 2 * k else 1
        step = min(step, n - k)
        drop = set(_weakest(w, step).tolist())
        for pos in sorted(drop, key=lambda p: (abs(w[p]), -p)):
            trace.append((keys[alive[pos]], float(abs(w[pos]))))
        alive = [a for pos, a in enumerate(alive) if pos not in drop]
        w, _ = ridge_fit(X[:, alive], y, alpha)
    return SelectionResult([keys[a] for a in alive], [float(c) for c in w], trace, k, alpha)


def select_features(table: FeatureTable, k: int = 20, alpha: float = 1.0) -> SelectionResult:
    """Standardise on the (training) table, then run ridge RFE on label targets."""
    scaler = scaler_fit(table)
    Z = scaler.transform(table.X)
    result = rfe_ridge(Z, table.y.astype(np.float64), table.keys, k, alpha)
    result.fit_rows_hash = rows_hash(table.ids)
    return result
