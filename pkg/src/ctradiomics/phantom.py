"""Seeded synthetic CT phantoms: smoothed ellipsoids whose texture amplitude
carries the class signal."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imaging import DatasetManifest, PatientRecord, RoiMask, Volume3D, manifest_to_json, write_raw


@dataclass(frozen=True)
class PhantomSpec:
    n_per_class: int = 40  # training site
    n_test_per_class: int = 15  # held-out site
    grid: tuple[int, int, int] = (28, 28, 14)
    spacing: tuple[float, float, float] = (1.0, 1.0, 2.0)
    benign_amplitude: float = 6.0
    malignant_amplitude: float = 18.0
    fine_weight: float = 0.5  # share of the high-frequency component in the texture mix
    seed: int = 7

    def __post_init__(self):
        if self.benign_amplitude < 0 or self.malignant_amplitude < 0:
            raise ValueError("texture amplitudes must be >= 0")
        if not 0 <= self.fine_weight <= 1:
            raise ValueError("fine_weight must lie in [0, 1]")
        if self.n_per_class < 1 or self.n_test_per_class < 0:
            raise ValueError("class sizes must be positive")
        if min(self.grid) < 8:
            raise ValueError("grid must be at least 8 voxels per axis")

    def to_json(self) -> dict:
        d = asdict(self)
        d["grid"], d["spacing"] = list(self.grid), list(self.spacing)
        return d


def _unit(field: np.ndarray) -> np.ndarray:
    sd = field.std()
    return (field - field.mean()) / sd if sd > 0 else field


def make_case(spec: PhantomSpec, malignant: bool, rng: np.random.Generator):
    """One phantom volume and mask."""
    nx, ny, nz = spec.grid
    sx, sy, sz = spec.spacing
    # physical semi-axes in mm, centre jittered by up to two voxels
    semi = rng.uniform([7.0, 7.0, 7.0], [10.0, 10.0, 11.0])
    centre = np.array([nx / 2, ny / 2, nz / 2]) + rng.uniform(-2, 2, 3)
    x, y, z = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    r2 = (((x - centre[0]) * sx / semi[0]) ** 2 + ((y - centre[1]) * sy / semi[1]) ** 2
          + ((z - centre[2]) * sz / semi[2]) ** 2)
    mask = r2 <= 1.0

    base = np.where(mask, 60.0, 0.0) + rng.uniform(-5, 5)
    smooth = ndimage.gaussian_filter(base, sigma=1.0, mode="nearest")

    coarse = _unit(ndimage.gaussian_filter(rng.normal(size=spec.grid), sigma=2.0, mode="wrap"))
    fine = _unit(rng.normal(size=spec.grid))
    texture = np.sqrt(1 - spec.fine_weight) * coarse + np.sqrt(spec.fine_weight) * fine
    amp = spec.malignant_amplitude if malignant else spec.benign_amplitude
    amp *= rng.uniform(0.8, 1.2)
    # texture lives inside the lesion; the background keeps faint scanner noise
    data = smooth + np.where(mask, amp * texture, 2.0 * fine)
    return Volume3D(data, spec.spacing), RoiMask(mask)


def generate(spec: PhantomSpec, out_dir) -> DatasetManifest:
    """Write raw-format cases plus ``manifest.json``; site A trains, site B tests."""
    out = Path(out_dir)
    cases = out / "cases"
    cases.mkdir(parents=True, exist_ok=True)
    plan = []
    for site, n in (("A", spec.n_per_class), ("B", spec.n_test_per_class)):
        for label in ("benign", "malignant"):
            plan += [(site, label)] * n
    patients = []
    for i, (site, label) in enumerate(plan):
        pid = f"P{i + 1:04d}"
        rng = np.random.default_rng([spec.seed, i])
        vol, mask = make_case(spec, label == "malignant", rng)
        img_h, msk_h = cases / f"{pid}_img.json", cases / f"{pid}_mask.json"
        write_raw(vol, img_h, img_h.with_suffix(".f32le"))
        write_raw(Volume3D(mask.data.astype(np.float64), spec.spacing), msk_h,
                  msk_h.with_suffix(".f32le"))
        patients.append(PatientRecord(pid, site, label, img_h, msk_h))
    rule = {"kind": "by_site", "train_sites": ["A"], "test_sites": ["B"]}
    manifest = DatasetManifest(patients, rule)
    doc = manifest_to_json(manifest, out)
    doc["phantom"] = spec.to_json()
    (out / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return manifest
