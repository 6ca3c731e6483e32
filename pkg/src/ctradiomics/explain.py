"""Exact tree SHAP, linear SHAP, SHAP rankings and voxel-wise feature maps."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnsupportedModel, UnsupportedShapeFeature
from .features.discretize import DiscretizationConfig
from .features.extract import ExtractionConfig, image_features
from .features.registry import PER_IMAGE_CLASSES, split_key
from .filters import filter_bank, intensity_scale
from .imaging import RoiMask, Volume3D
from .models import TrainedModel, Tree


@dataclass
class ShapValues:
    base_value: float
    phi: np.ndarray
    keys: list[str]
    scale: str = "probability"  # "margin" for linear models

    @property
    def total(self) -> float:
        return self.base_value + math.fsum(self.phi)


# ----------------------------------------------------------------- tree SHAP


def _extend(path, pz, po, pi):
    # path entries: [feature, zero_fraction, one_fraction, weight]
    n = len(path)
    path = [list(e) for e in path] + [[pi, pz, po, 1.0 if n == 0 else 0.0]]
    for i in range(n - 1, -1, -1):
        path[i + 1][3] += po * path[i][3] * (i + 1) / (n + 1)
        path[i][3] = pz * path[i][3] * (n - i) / (n + 1)
    return path


def _unwind(path, i):
    n = len(path) - 1
    path = [list(e) for e in path]
    one, zero = path[i][2], path[i][1]
    nxt = path[n][3]
    for j in range(n - 1, -1, -1):
        if one != 0:
            tmp = path[j][3]
            path[j][3] = nxt * (n + 1) / ((j + 1) * one)
            nxt = tmp - path[j][3] * zero * (n - j) / (n + 1)
        else:
            path[j][3] = path[j][3] * (n + 1) / (zero * (n - j))
    for j in range(i, n):
        path[j][:3] = path[j + 1][:3]
    return path[:n]


def _unwound_sum(path, i):
    return sum(e[3] for e in _unwind(path, i))


def tree_expected_value(tree: Tree) -> float:
    leaves = tree.left < 0
    return float(np.sum(tree.value[leaves] * tree.cover[leaves]) / tree.cover[0])


def tree_shap_single(tree: Tree, z: np.ndarray, n_features: int) -> np.ndarray:
    """Path-dependent exact Shapley values of one tree for one standardised row."""
    phi = np.zeros(n_features)

    def recurse(node, path, pz, po, pi):
        path = _extend(path, pz, po, pi)
        if tree.left[node] < 0:
            for i in range(1, len(path)):
                w = _unwound_sum(path, i)
                phi[path[i][0]] += w * (path[i][2] - path[i][1]) * tree.value[node]
            return
        f = int(tree.feature[node])
        if z[f] <= tree.threshold[node]:
            hot, cold = tree.left[node], tree.right[node]
        else:
            hot, cold = tree.right[node], tree.left[node]
        iz = io = 1.0
        for k in range(1, len(path)):
            if path[k][0] == f:
                iz, io = path[k][1], path[k][2]
                path = _unwind(path, k)
                break
        cover = tree.cover[node]
        recurse(hot, path, iz * tree.cover[hot] / cover, io, f)
        recurse(cold, path, iz * tree.cover[cold] / cover, 0.0, f)

    recurse(0, [], 1.0, 1.0, -1)
    return phi


def _tree_model(model: TrainedModel) -> list[Tree]:
    if model.spec.kind not in ("decision_tree", "random_forest"):
        raise UnsupportedModel(f"tree SHAP needs a tree model, got {model.spec.kind}")
    return model.trees


def tree_shap(model: TrainedModel, x: np.ndarray) -> ShapValues:
    """Exact SHAP for a raw feature row; forest values are averaged over trees."""
    trees = _tree_model(model)
    z = model.standardise(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]
    p = len(model.keys)
    phi = np.mean([tree_shap_single(t, z, p) for t in trees], axis=0)
    base = float(np.mean([tree_expected_value(t) for t in trees]))
    return ShapValues(base, phi, list(model.keys))


def linear_shap_values(w, b, z, mu) -> tuple[float, np.ndarray]:
    """phi_i = w_i (z_i - mu_i); base = margin at mu."""
    w, z, mu = (np.asarray(a, dtype=np.float64) for a in (w, z, mu))
    return float(w @ mu + b), w * (z - mu)


def linear_shap(model: TrainedModel, x: np.ndarray, background_means=None) -> ShapValues:
    """Margin-scale SHAP; background means default to the training means."""
    if model.spec.kind not in ("logreg", "linear_svm"):
        raise UnsupportedModel(f"linear SHAP needs a linear model, got {model.spec.kind}")
    mu_raw = model.scaler.mean if background_means is None else background_means
    mu = model.standardise(np.atleast_2d(mu_raw))[0]
    z = model.standardise(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]
    base, phi = linear_shap_values(model.params["w"], model.params["b"], z, mu)
    return ShapValues(base, phi, list(model.keys), "margin")


def shap_values(model: TrainedModel, x) -> ShapValues:
    if model.spec.kind in ("logreg", "linear_svm"):
        return linear_shap(model, x)
    return tree_shap(model, x)


# ------------------------------------------------------------------ summary


@dataclass
class ShapSummary:
    keys: list[str]
    ids: list[str]
    phi: np.ndarray  # rows x features
    X: np.ndarray
    base_value: float
    mean_abs: np.ndarray
    ranking: list[str]
    scale: str

    def top(self, k: int = 20) -> list[str]:
        return self.ranking[:k]

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        long_path, summary_path = out / "shap_values.csv", out / "shap_summary.csv"
        with open(long_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "feature", "phi", "value"])
            for i, rid in enumerate(self.ids):
                for j, k in enumerate(self.keys):
                    w.writerow([rid, k, repr(float(self.phi[i, j])), repr(float(self.X[i, j]))])
        pos = {k: j for j, k in enumerate(self.keys)}
        with open(summary_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "feature", "mean_abs_phi"])
            for r, k in enumerate(self.ranking, 1):
                w.writerow([r, k, repr(float(self.mean_abs[pos[k]]))])
        meta = out / "shap_meta.json"
        meta.write_text(json.dumps({"base_value": self.base_value, "scale": self.scale,
                                    "n_rows": len(self.ids)}, sort_keys=True) + "\n")
        return [long_path, summary_path, meta]


def shap_summary(model: TrainedModel, X: np.ndarray, ids=None, top_k: int | None = None) -> ShapSummary:
    """Mean |phi| ranking over rows; ties keep the model's canonical key order."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(X) == 0:
        raise ValueError("SHAP summary needs at least one row")
    ids = [str(i) for i in (ids if ids is not None else range(len(X)))]
    values = [shap_values(model, x) for x in X]
    phi = np.array([v.phi for v in values])
    # fsum makes the means independent of row order
    mean_abs = np.array([math.fsum(np.abs(phi[:, j])) / len(X) for j in range(phi.shape[1])])
    order = sorted(range(len(model.keys)), key=lambda j: (-mean_abs[j], j))
    ranking = [model.keys[j] for j in order]
    if top_k is not None:
        ranking = ranking[:top_k]
    return ShapSummary(list(model.keys), ids, phi, X, values[0].base_value, mean_abs, ranking,
                       values[0].scale)


# ------------------------------------------------------------- feature maps


@dataclass
class FeatureMap:
    key: str
    kernel_radius: int
    values: np.ndarray  # raw local feature values, NaN outside the ROI
    image: np.ndarray  # uint8 normalised map, 0 outside the ROI
    roi: np.ndarray
    vmin: float
    vmax: float

    @property
    def degenerate(self) -> bool:
        return self.vmax == self.vmin

    def sidecar(self) -> dict:
        zs = [int(z) for z in np.flatnonzero(self.roi.any(axis=(0, 1)))]
        return {"key": self.key, "kernel_radius": self.kernel_radius, "min": self.vmin,
                "max": self.vmax, "degenerate": self.degenerate, "background": 0,
                "dims": list(self.roi.shape), "slices": zs}

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for z in self.sidecar()["slices"]:
            path = out / f"{self.key}_z{z:03d}.pgm"
            write_pgm(path, self.image[:, :, z].T)
            written.append(path)
        side = out / f"{self.key}.json"
        side.write_text(json.dumps(self.sidecar(), sort_keys=True) + "\n")
        return written + [side]


def write_pgm(path, img: np.ndarray) -> None:
    """Binary 8-bit PGM; ``img`` is indexed [row, column]."""
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def normalise(values: np.ndarray, roi: np.ndarray) -> tuple[np.ndarray, float, float]:
    inside = values[roi]
    vmin, vmax = float(inside.min()), float(inside.max())
    img = np.zeros(values.shape, dtype=np.uint8)
    if vmax == vmin:
        img[roi] = 128
    else:
        img[roi] = np.rint((inside - vmin) / (vmax - vmin) * 255.0).astype(np.uint8)
    return img, vmin, vmax


def feature_map(vol: Volume3D, mask: RoiMask, key: str, kernel_radius: int = 2,
                discretization: DiscretizationConfig | None = None,
                aggregation: str = "mean") -> FeatureMap:
    """Local feature value at every ROI voxel, computed on the ``(2r+1)^3`` window
    intersected with the ROI."""
    fname, cls, name = split_key(key)
    if cls == "shape":
        raise UnsupportedShapeFeature(f"{key}: shape features are not voxel-local")
    if cls not in PER_IMAGE_CLASSES:
        raise ValueError(f"{key}: unsupported class {cls}")
    if kernel_radius < 0:
        raise ValueError("kernel radius must be >= 0")
    cfg = ExtractionConfig(filters=(fname,), classes=(cls,),
                           discretization=discretization or DiscretizationConfig(),
                           aggregation=aggregation)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        image = filter_bank(vol, (fname,), intensity_scale=intensity_scale(vol))[0].volume.data
    roi = mask.data
    r = kernel_radius
    values = np.full(roi.shape, np.nan)
    for x, y, z in zip(*np.nonzero(roi)):
        sl = tuple(slice(max(c - r, 0), c + r + 1) for c in (x, y, z))
        feats = image_features(image[sl], roi[sl], vol.voxel_volume, cfg, [])
        values[x, y, z] = feats[cls][name]
    img, vmin, vmax = normalise(values, roi)
    return FeatureMap(key, r, values, img, roi.copy(), vmin, vmax)
