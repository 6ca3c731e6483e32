"""Derived-image filter bank: LoG, undecimated Haar subbands and intensity maps.

Filter names follow the radiomics convention used in feature keys, e.g.
``original``, ``log-sigma-3-0-mm-3D``, ``wavelet-LH``, ``squareroot``.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SigmaTooLargeForVolume, SliceTooSmall
from .imaging import Volume3D

SUBBANDS = ("LL", "LH", "HL", "HH")
INTENSITY_KINDS = ("square", "squareroot", "logarithm", "exponential")
DEFAULT_FILTERS = (
    "original",
    "log-sigma-1-0-mm-3D",
    "log-sigma-3-0-mm-3D",
    "log-sigma-5-0-mm-3D",
    "wavelet-LL",
    "wavelet-LH",
    "wavelet-HL",
    "wavelet-HH",
    "square",
    "squareroot",
    "logarithm",
    "exponential",
)
_ORDER = ("original", "log", "wavelet", *INTENSITY_KINDS)
_LOG_NAME = re.compile(r"^log-sigma-(\d+)-(\d+)-mm-3D$")


@dataclass(frozen=True)
class FilterSpec:
    kind: str  # original | log | wavelet | square | squareroot | logarithm | exponential
    sigma_mm: float | None = None
    subband: str | None = None

    def __post_init__(self):
        if self.kind not in _ORDER:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.kind == "log" and not (self.sigma_mm and self.sigma_mm > 0):
            raise ValueError("LoG needs sigma_mm > 0")
        if self.kind == "wavelet" and self.subband not in SUBBANDS:
            raise ValueError(f"wavelet subband must be one of {SUBBANDS}")

    @property
    def name(self) -> str:
        if self.kind == "log":
            whole, frac = f"{self.sigma_mm:.10g}".partition(".")[::2]
            return f"log-sigma-{whole}-{frac or '0'}-mm-3D"
        if self.kind == "wavelet":
            return f"wavelet-{self.subband}"
        return self.kind

    def sort_key(self):
        return (_ORDER.index(self.kind), self.sigma_mm or 0.0,
                SUBBANDS.index(self.subband) if self.subband else 0)

    @classmethod
    def parse(cls, name: str) -> "FilterSpec":
        m = _LOG_NAME.match(name)
        if m:
            return cls("log", sigma_mm=float(f"{m.group(1)}.{m.group(2)}"))
        if name.startswith("wavelet-"):
            return cls("wavelet", subband=name[len("wavelet-"):])
        if name in ("original", *INTENSITY_KINDS):
            return cls(name)
        raise ValueError(f"unrecognised filter name {name!r}")


@dataclass(frozen=True)
class DerivedImage:
    filter: FilterSpec
    volume: Volume3D


# ----------------------------------------------------------------------- LoG


def gaussian_kernel1d(sigma_vox: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma_vox) ** 2)
    return k / k.sum()


def log_radius(sigma_mm: float, spacing) -> tuple[int, ...]:
    """Unclamped Gaussian truncation radius per axis, in voxels."""
    return tuple(int(math.ceil(4.0 * sigma_mm / s)) for s in spacing)


def _convolve_axis(a: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = (len(kernel) - 1) // 2
    if r == 0:
        return a * kernel[0]
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    padded = np.moveaxis(np.pad(a, pad, mode="reflect"), axis, 0)
    n = a.shape[axis]
    out = np.zeros((n,) + padded.shape[1:])
    for k, w in enumerate(kernel):
        out += w * padded[k:k + n]
    return np.moveaxis(out, 0, axis)


def apply_log(vol: Volume3D, sigma_mm: float, strict: bool = False) -> DerivedImage:
    """Scale-normalised Laplacian of Gaussian.

    Gaussian smoothing uses per-axis voxel sigma ``sigma_mm / spacing`` with
    the kernel truncated at ``ceil(4 * sigma_vox)``; both the smoothing and the
    6-neighbour Laplacian use whole-sample mirror boundaries.  The response is
    multiplied by ``sigma_mm ** 2``.
    """
    if not sigma_mm > 0:
        raise ValueError("sigma_mm must be > 0")
    data = vol.data
    radii = log_radius(sigma_mm, vol.spacing)
    clamped = tuple(min(r, n - 1) for r, n in zip(radii, vol.dims))
    if clamped != radii:
        flat = [ax for ax, n in enumerate(vol.dims) if n == 1]
        if strict and flat:
            raise SigmaTooLargeForVolume(
                f"axes {flat} have a single voxel; cannot mirror a radius-{max(radii)} kernel")
        warnings.warn(f"LoG sigma {sigma_mm} mm: kernel radius {radii} clamped to {clamped}",
                      stacklevel=2)

    # subtracting an exact voxel value keeps constant inputs exactly zero
    smoothed = data - data.min()
    for axis, (r, s) in enumerate(zip(clamped, vol.spacing)):
        smoothed = _convolve_axis(smoothed, gaussian_kernel1d(sigma_mm / s, r), axis)

    lap = np.zeros_like(smoothed)
    padded = np.pad(smoothed, 1, mode="reflect")
    core = padded[1:-1, 1:-1, 1:-1]
    for axis, s in enumerate(vol.spacing):
        lo = [slice(1, -1)] * 3
        hi = [slice(1, -1)] * 3
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        lap += (padded[tuple(lo)] - 2.0 * core + padded[tuple(hi)]) / (s * s)
    return DerivedImage(FilterSpec("log", sigma_mm=sigma_mm),
                        Volume3D(sigma_mm ** 2 * lap, vol.spacing))


# ------------------------------------------------------------------- wavelet

_SQRT2 = math.sqrt(2.0)


def _haar(a: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    nxt = np.roll(a, -1, axis=axis)
    return (a + nxt) / _SQRT2, (a - nxt) / _SQRT2


def apply_wavelet(vol: Volume3D) -> list[DerivedImage]:
    """One level of undecimated 2-D Haar analysis on each axial slice.

    Subband letters name the x filter then the y filter; boundaries wrap.
    """
    nx, ny, _ = vol.dims
    if nx < 2 or ny < 2:
        raise SliceTooSmall(f"axial slice {nx}x{ny} is smaller than 2x2")
    lo_x, hi_x = _haar(vol.data, 0)
    bands = {}
    for xb, a in (("L", lo_x), ("H", hi_x)):
        lo_y, hi_y = _haar(a, 1)
        bands[xb + "L"], bands[xb + "H"] = lo_y, hi_y
    return [DerivedImage(FilterSpec("wavelet", subband=sb), Volume3D(bands[sb], vol.spacing))
            for sb in SUBBANDS]


# ------------------------------------------------------- intensity transforms


def intensity_map(v: np.ndarray, kind: str, m: float) -> np.ndarray:
    """Odd, monotone maps of [-m, m] onto itself with f(m) = m."""
    a = np.abs(v)
    r = a / m
    if kind == "square":
        mag = a * r
    elif kind == "squareroot":
        mag = np.sqrt(r) * m
    elif kind == "logarithm":
        mag = m * (np.log1p(a) / np.log1p(m))
    elif kind == "exponential":
        mag = m * (np.expm1(r) / np.expm1(1.0))
    else:
        raise ValueError(f"unknown intensity transform {kind!r}")
    return np.sign(v) * mag


def intensity_scale(vol: Volume3D) -> float:
    m = float(np.abs(vol.data).max())
    return m if m > 0 else 1.0


def apply_intensity(vol: Volume3D, kind: str, scale: float | None = None) -> DerivedImage:
    """``scale`` defaults to max |v| of ``vol``; pass the uncropped value to make
    the transform independent of cropping."""
    m = intensity_scale(vol) if scale is None else scale
    return DerivedImage(FilterSpec(kind), Volume3D(intensity_map(vol.data, kind, m), vol.spacing))


# ---------------------------------------------------------------------- bank


def parse_filters(names) -> list[FilterSpec]:
    specs = sorted({FilterSpec.parse(n) for n in names}, key=FilterSpec.sort_key)
    if not specs:
        raise ValueError("filter configuration is empty")
    return specs


def filter_bank(vol: Volume3D, filters=DEFAULT_FILTERS,
                intensity_scale: float | None = None) -> list[DerivedImage]:
    """Apply the enabled filters, returned in canonical order."""
    specs = parse_filters(filters)
    out = []
    wavelets = None
    for spec in specs:
        if spec.kind == "original":
            out.append(DerivedImage(spec, vol))
        elif spec.kind == "log":
            out.append(apply_log(vol, spec.sigma_mm))
        elif spec.kind == "wavelet":
            if wavelets is None:
                wavelets = {d.filter.subband: d for d in apply_wavelet(vol)}
            out.append(wavelets[spec.subband])
        else:
            out.append(apply_intensity(vol, spec.kind, intensity_scale))
    return out


def required_margin(filters, spacing) -> int:
    """Voxel margin around the ROI that makes cropping invisible to the filters."""
    margin = 0
    for spec in parse_filters(filters):
        if spec.kind == "log":
            margin = max(margin, max(log_radius(spec.sigma_mm, spacing)) + 1)
        elif spec.kind == "wavelet":
            margin = max(margin, 1)
    return margin
