"""Confusion metrics, ROC/AUC, DeLong comparison, isotonic calibration and decision curves."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import CaseSetMismatch, EmptyInput, OneClassOnly
from .imaging import LABELS

POSITIVE_CLASSES = LABELS
DEFAULT_GRID = np.round(np.arange(1, 100) / 100.0, 2)


def _as_arrays(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).astype(np.int64).ravel()
    if len(s) == 0:
        raise EmptyInput("no scores given")
    if len(s) != len(y):
        raise CaseSetMismatch(f"{len(s)} scores for {len(y)} labels")
    return s, y


def orient(scores, labels, positive_class: str = "malignant"):
    """Map (score of malignancy, label malignant=1) onto the chosen positive class."""
    s, y = _as_arrays(scores, labels)
    if positive_class not in POSITIVE_CLASSES:
        raise ValueError(f"positive_class must be one of {POSITIVE_CLASSES}")
    if positive_class == "benign":
        return 1.0 - s, 1 - y
    return s, y


# ---------------------------------------------------------------- confusion


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int
    positive_class: str = "malignant"

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "positive_class": self.positive_class}


def confusion(scores, labels, threshold: float = 0.5,
              positive_class: str = "malignant") -> ConfusionMatrix:
    """Counts under the rule ``score >= threshold`` means positive."""
    s, y = orient(scores, labels, positive_class)
    pred = s >= threshold
    pos = y == 1
    return ConfusionMatrix(int(np.sum(pred & pos)), int(np.sum(pred & ~pos)),
                           int(np.sum(~pred & ~pos)), int(np.sum(~pred & pos)), positive_class)


def _pct(num, den, name, flags):
    if den == 0:
        flags.append(f"{name}:undefined_0/0")
        return None
    return 100.0 * num / den


def metrics(cm: ConfusionMatrix, flags: list | None = None) -> dict:
    """Sensitivity, specificity, accuracy, precision and F1 in percent; 0/0 gives None."""
    flags = [] if flags is None else flags
    out = {
        "sensitivity": _pct(cm.tp, cm.tp + cm.fn, "sensitivity", flags),
        "specificity": _pct(cm.tn, cm.tn + cm.fp, "specificity", flags),
        "accuracy": _pct(cm.tp + cm.tn, cm.n, "accuracy", flags),
        "precision": _pct(cm.tp, cm.tp + cm.fp, "precision", flags),
    }
    sens, prec = out["sensitivity"], out["precision"]
    if sens is None or prec is None or sens + prec == 0:
        flags.append("f1:undefined")
        out["f1"] = None
    else:
        out["f1"] = 2.0 * prec * sens / (prec + sens)
    return out


# ---------------------------------------------------------------------- ROC


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_json(self) -> dict:
        return {"auc": self.auc, "fpr": self.fpr.tolist(), "tpr": self.tpr.tolist(),
                "thresholds": [_finite_or_str(t) for t in self.thresholds]}


def _finite_or_str(v: float):
    return float(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _check_two_classes(y):
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise OneClassOnly("both classes must be present")
    return n_pos, len(y) - n_pos


def roc_auc(scores, labels) -> RocCurve:
    """ROC over distinct scores with +inf / -inf sentinels; tie-aware trapezoid AUC.

    The area is accumulated in integers, so it equals the pair-count
    ``P(s+ > s-) + P(s+ = s-) / 2`` exactly.
    """
    s, y = _as_arrays(scores, labels)
    P, N = _check_two_classes(y)
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s) - 1]
    tp = np.r_[0, np.cumsum(y_sorted)[last]]
    fp = np.r_[0, np.cumsum(1 - y_sorted)[last]]
    thresholds = np.r_[np.inf, s_sorted[last]]
    if thresholds[-1] != -np.inf:
        tp, fp, thresholds = np.r_[tp, P], np.r_[fp, N], np.r_[thresholds, -np.inf]
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    return RocCurve(fp / N, tp / P, thresholds, twice_area / (2 * P * N))


def auc_pairs(scores, labels) -> float:
    """Exhaustive pair-count AUC (reference definition)."""
    s, y = _as_arrays(scores, labels)
    P, N = _check_two_classes(y)
    pos, neg = s[y == 1], s[y == 0]
    gt = int(np.sum(pos[:, None] > neg[None, :]))
    eq = int(np.sum(pos[:, None] == neg[None, :]))
    return (2 * gt + eq) / (2 * P * N)


# ------------------------------------------------------------------- DeLong


@dataclass(frozen=True)
class DelongResult:
    auc_a: float
    auc_b: float
    var_a: float
    var_b: float
    cov: float
    z: float
    p: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _midrank(v: np.ndarray) -> np.ndarray:
    return stats.rankdata(v, method="average")


def delong_components(scores, labels):
    """Structural components (V10 per positive, V01 per negative) via midranks."""
    s, y = _as_arrays(scores, labels)
    M, N = _check_two_classes(y)
    pos, neg = s[y == 1], s[y == 0]
    r_all = _midrank(np.r_[pos, neg])
    v10 = (r_all[:M] - _midrank(pos)) / N
    v01 = 1.0 - (r_all[M:] - _midrank(neg)) / M
    return v10, v01


def _cov(a, b):
    return float(np.cov(a, b, ddof=1)[0, 1]) if len(a) > 1 else 0.0


def delong_variance(scores, labels) -> float:
    v10, v01 = delong_components(scores, labels)
    return _cov(v10, v10) / len(v10) + _cov(v01, v01) / len(v01)


def delong_test(scores_a, scores_b, labels) -> DelongResult:
    """Paired DeLong comparison of two AUCs on one case set; two-sided normal p."""
    a, y = _as_arrays(scores_a, labels)
    b, _ = _as_arrays(scores_b, labels)
    if len(a) != len(b):
        raise CaseSetMismatch(f"model A scored {len(a)} cases, model B {len(b)}")
    a10, a01 = delong_components(a, y)
    b10, b01 = delong_components(b, y)
    M, N = len(a10), len(a01)
    var_a = _cov(a10, a10) / M + _cov(a01, a01) / N
    var_b = _cov(b10, b10) / M + _cov(b01, b01) / N
    cov = _cov(a10, b10) / M + _cov(a01, b01) / N
    auc_a, auc_b = roc_auc(a, y).auc, roc_auc(b, y).auc
    var_d = var_a + var_b - 2.0 * cov
    diff = auc_a - auc_b
    if diff == 0 or var_d <= 1e-15:
        return DelongResult(auc_a, auc_b, var_a, var_b, cov, 0.0, 1.0)
    z = diff / math.sqrt(var_d)
    return DelongResult(auc_a, auc_b, var_a, var_b, cov, z, float(2.0 * stats.norm.sf(abs(z))))


# ---------------------------------------------------------------- isotonic


@dataclass
class IsotonicFit:
    breakpoints: np.ndarray
    levels: np.ndarray

    def __call__(self, x) -> np.ndarray:
        """Left-continuous step: level i covers ``(breakpoints[i-1], breakpoints[i]]``."""
        idx = np.searchsorted(self.breakpoints, np.asarray(x, dtype=np.float64), side="left")
        return self.levels[np.clip(idx, 0, len(self.levels) - 1)]

    def to_json(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "levels": self.levels.tolist()}


def pava(values, weights=None) -> np.ndarray:
    """Weighted pool-adjacent-violators: nondecreasing least-squares fit."""
    v = np.asarray(values, dtype=np.float64)
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=np.float64)
    means, wts, sizes = [], [], []
    for vi, wi in zip(v, w):
        means.append(vi)
        wts.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, n2 = means.pop(), wts.pop(), sizes.pop()
            total = wts[-1] + w2
            means[-1] = (means[-1] * wts[-1] + m2 * w2) / total
            wts[-1] = total
            sizes[-1] += n2
    return np.repeat(means, sizes)


def isotonic_fit(scores, outcomes, weights=None) -> IsotonicFit:
    """Monotone weighted least-squares fit of outcome on score, ties pre-pooled."""
    x = np.asarray(scores, dtype=np.float64).ravel()
    if len(x) == 0:
        raise EmptyInput("isotonic fit needs at least one pair")
    o = np.asarray(outcomes, dtype=np.float64).ravel()
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    ux, inv = np.unique(x, return_inverse=True)
    wsum = np.bincount(inv, weights=w, minlength=len(ux))
    osum = np.bincount(inv, weights=w * o, minlength=len(ux))
    return IsotonicFit(ux, pava(osum / wsum, wsum))


# ------------------------------------------------------------- calibration


@dataclass
class CalibrationCurve:
    mean_predicted: np.ndarray
    observed: np.ndarray
    counts: np.ndarray
    isotonic: IsotonicFit

    def to_json(self) -> dict:
        return {"mean_predicted": self.mean_predicted.tolist(), "observed": self.observed.tolist(),
                "counts": self.counts.tolist(), "isotonic": self.isotonic.to_json()}


def calibration_curve(scores, labels, n_bins: int = 10) -> CalibrationCurve:
    """Equal-width reliability bins on [0, 1] (empty bins omitted) plus an isotonic fit."""
    s, y = _as_arrays(scores, labels)
    b = np.clip(np.floor(s * n_bins).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(b, minlength=n_bins)
    keep = counts > 0
    mean_pred = np.bincount(b, weights=s, minlength=n_bins)[keep] / counts[keep]
    observed = np.bincount(b, weights=y, minlength=n_bins)[keep] / counts[keep]
    return CalibrationCurve(mean_pred, observed, counts[keep], isotonic_fit(s, y))


# ---------------------------------------------------------- decision curve


def net_benefit(tp, fp, n, pt):
    return tp / n - (fp / n) * (pt / (1.0 - pt))


@dataclass
class DecisionCurve:
    thresholds: np.ndarray
    nb_model: np.ndarray
    nb_all: np.ndarray
    nb_none: np.ndarray

    def to_json(self) -> dict:
        return {"thresholds": self.thresholds.tolist(), "nb_model": self.nb_model.tolist(),
                "nb_all": self.nb_all.tolist(), "nb_none": self.nb_none.tolist()}


def decision_curve(scores, labels, grid=DEFAULT_GRID) -> DecisionCurve:
    s, y = _as_arrays(scores, labels)
    pts = np.asarray(grid, dtype=np.float64)
    if np.any((pts <= 0) | (pts >= 1)):
        raise ValueError("decision-curve thresholds must lie in (0, 1)")
    n = len(y)
    pos = y == 1
    pred = s[None, :] >= pts[:, None]
    tp = np.sum(pred & pos, axis=1)
    fp = np.sum(pred & ~pos, axis=1)
    nb_model = net_benefit(tp, fp, n, pts)
    nb_all = net_benefit(int(pos.sum()), int((~pos).sum()), n, pts)
    return DecisionCurve(pts, nb_model, nb_all, np.zeros_like(pts))


# ------------------------------------------------------------------ report


@dataclass
class SplitResult:
    ids: list[str]
    labels: np.ndarray
    scores: np.ndarray


@dataclass
class EvalReport:
    positive_class: str
    threshold: float
    entries: dict = field(default_factory=dict)  # model -> split -> dict
    delong: dict = field(default_factory=dict)  # split -> list of rows

    def to_json(self) -> dict:
        return {"schema": 1, "positive_class": self.positive_class, "threshold": self.threshold,
                "models": self.entries, "delong": self.delong}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "report.json"]
        written[0].write_text(self.dumps(), encoding="utf-8")
        for model, splits in sorted(self.entries.items()):
            for split, e in sorted(splits.items()):
                stem = f"{model}_{split}"
                roc = e["roc"]
                written.append(_write_rows(out / f"{stem}_roc.csv", ["threshold", "fpr", "tpr"],
                                           zip(roc["thresholds"], roc["fpr"], roc["tpr"])))
                cal = e["calibration"]
                written.append(_write_rows(out / f"{stem}_calibration.csv",
                                           ["mean_predicted", "observed", "count"],
                                           zip(cal["mean_predicted"], cal["observed"],
                                               cal["counts"])))
                iso = cal["isotonic"]
                written.append(_write_rows(out / f"{stem}_isotonic.csv", ["breakpoint", "level"],
                                           zip(iso["breakpoints"], iso["levels"])))
                dc = e["decision"]
                written.append(_write_rows(out / f"{stem}_decision.csv",
                                           ["pt", "nb_model", "nb_all", "nb_none"],
                                           zip(dc["thresholds"], dc["nb_model"], dc["nb_all"],
                                               dc["nb_none"])))
        return written


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else repr(v) for v in r])
    return path


def evaluate_split(res: SplitResult, threshold: float = 0.5,
                   positive_class: str = "malignant") -> dict:
    flags: list[str] = []
    cm = confusion(res.scores, res.labels, threshold, positive_class)
    s, y = orient(res.scores, res.labels, positive_class)
    entry = {"ids": list(res.ids), "labels": [int(v) for v in res.labels],
             "scores": [float(v) for v in res.scores], "confusion": cm.to_json(),
             "metrics": metrics(cm, flags), "flags": flags}
    try:
        entry["roc"] = roc_auc(s, y).to_json()
    except OneClassOnly:
        flags.append("roc:one_class_only")
        entry["roc"] = {"auc": None, "fpr": [], "tpr": [], "thresholds": []}
    entry["calibration"] = calibration_curve(s, y).to_json()
    entry["decision"] = decision_curve(s, y).to_json()
    return entry


def evaluate(results: dict, threshold: float = 0.5,
             positive_class: str = "malignant") -> EvalReport:
    """``results``: model name -> split name -> SplitResult; DeLong pairs per split."""
    report = EvalReport(positive_class, threshold)
    for model in sorted(results):
        report.entries[model] = {split: evaluate_split(r, threshold, positive_class)
                                 for split, r in sorted(results[model].items())}
    splits = sorted({s for m in results.values() for s in m})
    names = sorted(results)
    for split in splits:
        rows = []
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                ra, rb = results[a].get(split), results[b].get(split)
                if ra is None or rb is None:
                    continue
                if list(ra.ids) != list(rb.ids) or not np.array_equal(ra.labels, rb.labels):
                    raise CaseSetMismatch(f"{a} and {b} were scored on different {split} cases")
                sa, y = orient(ra.scores, ra.labels, positive_class)
                sb, _ = orient(rb.scores, rb.labels, positive_class)
                try:
                    d = delong_test(sa, sb, y).to_json()
                except OneClassOnly:
                    continue
                rows.append({"model_a": a, "model_b": b, **d})
        report.delong[split] = rows
    return report
