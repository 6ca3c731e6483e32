from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..filters import DEFAULT_FILTERS, filter_bank, intensity_scale, parse_filters, required_margin
from ..imaging import ValidatedCase, crop_to_bbox
from . import texture
from .discretize import DiscretizationConfig, discretize
from .firstorder import first_order
from .registry import CLASSES, PER_IMAGE_CLASSES, feature_key
from .shape import shape_features

# two mutually inconsistent totals quoted for the original study, surfaced
# next to the computed budget rather than absorbed
PUBLISHED_TOTALS = {"abstract": 1132, "methods": 1122}


@dataclass(frozen=True)
class ExtractionConfig:
    filters: tuple[str, ...] = DEFAULT_FILTERS
    classes: tuple[str, ...] = tuple(CLASSES)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    aggregation: str = "mean"  # per-direction features averaged; "merged" sums matrices

    def __post_init__(self):
        unknown = set(self.classes) - set(CLASSES)
        if unknown:
            raise ValueError(f"unknown feature classes {sorted(unknown)}")
        if self.aggregation not in ("mean", "merged"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        parse_filters(self.filters)

    @property
    def filter_names(self) -> list[str]:
        return [f.name for f in parse_filters(self.filters)]


@dataclass
class FeatureVector:
    keys: list[str]
    values: np.ndarray
    flags: list[str] = field(default_factory=list)
    id: str | None = None

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.keys, self.values.tolist()))


def feature_keys(cfg: ExtractionConfig) -> list[str]:
    keys = []
    names = cfg.filter_names
    if "shape" in cfg.classes and "original" in names:
        keys += [feature_key("original", "shape", n) for n in CLASSES["shape"]]
    for fname in names:
        for cls in PER_IMAGE_CLASSES:
            if cls in cfg.classes:
                keys += [feature_key(fname, cls, n) for n in CLASSES[cls]]
    return keys


def expected_feature_count(cfg: ExtractionConfig = ExtractionConfig()) -> int:
    names = cfg.filter_names
    per_image = sum(len(CLASSES[c]) for c in PER_IMAGE_CLASSES if c in cfg.classes)
    shape = len(CLASSES["shape"]) if "shape" in cfg.classes and "original" in names else 0
    return shape + len(names) * per_image


def image_features(data: np.ndarray, mask: np.ndarray, voxel_volume: float,
                   cfg: ExtractionConfig, flags: list | None = None) -> dict[str, dict[str, float]]:
    """First-order and texture features of one (derived) image, by class."""
    out = {}
    if "firstorder" in cfg.classes:
        out["firstorder"] = first_order(data, mask, voxel_volume, cfg.discretization, flags)
    if any(c in cfg.classes for c in texture_classes()):
        gray = discretize(data, mask, cfg.discretization)
        lv, ng = gray.levels, gray.ng
        if "glcm" in cfg.classes:
            out["glcm"] = texture.glcm_features(lv, ng, cfg.aggregation, flags)
        if "glrlm" in cfg.classes:
            out["glrlm"] = texture.glrlm_features(lv, ng, cfg.aggregation, flags)
        if "glszm" in cfg.classes:
            out["glszm"] = texture.glszm_features(lv, ng, flags)
        if "gldm" in cfg.classes:
            out["gldm"] = texture.gldm_features(lv, ng, flags)
        if "ngtdm" in cfg.classes:
            out["ngtdm"] = texture.ngtdm_features(lv, ng, flags)
    return out


def texture_classes():
    return ("glcm", "glrlm", "glszm", "gldm", "ngtdm")


def extract_all(case: ValidatedCase, cfg: ExtractionConfig = ExtractionConfig()) -> FeatureVector:
    """Shape once on the original ROI, then per-image classes on every derived image.

    The case is cropped to the ROI with a margin covering the widest filter
    support, so results equal those on the uncropped grid.
    """
    scale = intensity_scale(case.volume)
    cropped = crop_to_bbox(case, required_margin(cfg.filters, case.volume.spacing))
    mask = cropped.mask.data
    spacing = cropped.volume.spacing
    flags: list[str] = []
    values: dict[str, float] = {}

    names = cfg.filter_names
    if "shape" in cfg.classes and "original" in names:
        for n, v in shape_features(mask, spacing, flags).items():
            values[feature_key("original", "shape", n)] = v
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        derived_images = filter_bank(cropped.volume, cfg.filters, intensity_scale=scale)
    flags += [f"filter:{w.message}" for w in caught]
    for derived in derived_images:
        fname = derived.filter.name
        img_flags: list[str] = []
        by_class = image_features(derived.volume.data, mask, cropped.volume.voxel_volume,
                                  cfg, img_flags)
        flags += [f"{fname}:{f}" for f in img_flags]
        for cls in PER_IMAGE_CLASSES:
            for n, v in by_class.get(cls, {}).items():
                values[feature_key(fname, cls, n)] = v

    keys = feature_keys(cfg)
    vec = np.array([values[k] for k in keys], dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        bad = [k for k, v in zip(keys, vec) if not np.isfinite(v)]
        raise FloatingPointError(f"non-finite features: {bad[:5]}")
    return FeatureVector(keys, vec, flags)
