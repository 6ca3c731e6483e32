from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMask


@dataclass(frozen=True)
class DiscretizationConfig:
    mode: str = "fixed_bin_width"
    width: float = 25.0
    n_bins: int = 32

    def __post_init__(self):
        if self.mode == "fixed_bin_width":
            if not self.width > 0:
                raise ValueError("bin width must be > 0")
        elif self.mode == "fixed_bin_count":
            if self.n_bins < 2:
                raise ValueError("bin count must be >= 2")
        else:
            raise ValueError(f"unknown discretization mode {self.mode!r}")

    def to_json(self) -> dict:
        if self.mode == "fixed_bin_width":
            return {"mode": self.mode, "width": self.width}
        return {"mode": self.mode, "n_bins": self.n_bins}

    @classmethod
    def from_json(cls, doc: dict) -> "DiscretizationConfig":
        return cls(**doc)


@dataclass(frozen=True)
class GrayImage:
    levels: np.ndarray  # int, 1..ng inside the mask, 0 outside
    ng: int


def discretize_values(values: np.ndarray, cfg: DiscretizationConfig) -> np.ndarray:
    vmin, vmax = values.min(), values.max()
    if vmax == vmin:
        return np.ones(values.shape, dtype=np.int64)
    if cfg.mode == "fixed_bin_width":
        return np.floor((values - vmin) / cfg.width).astype(np.int64) + 1
    width = (vmax - vmin) / cfg.n_bins
    levels = np.floor((values - vmin) / width).astype(np.int64) + 1
    return np.minimum(levels, cfg.n_bins)


def discretize(vol_data: np.ndarray, mask: np.ndarray, cfg: DiscretizationConfig) -> GrayImage:
    """Min-anchored discretization of the in-mask voxels."""
    if not mask.any():
        raise EmptyMask("cannot discretize an empty ROI")
    levels = np.zeros(mask.shape, dtype=np.int64)
    levels[mask] = discretize_values(vol_data[mask], cfg)
    return GrayImage(levels, int(levels.max()))


def bin_edges(vmin: float, vmax: float, cfg: DiscretizationConfig) -> list[float]:
    """Interior bin edges, for reporting."""
    if cfg.mode == "fixed_bin_width":
        n = int(math.floor((vmax - vmin) / cfg.width))
        return [vmin + cfg.width * k for k in range(1, n + 1)]
    width = (vmax - vmin) / cfg.n_bins
    return [vmin + width * k for k in range(1, cfg.n_bins)]
