from __future__ import annotations

import numpy as np

from .discretize import DiscretizationConfig, discretize_values


def first_order(data: np.ndarray, mask: np.ndarray, voxel_volume: float = 1.0,
                cfg: DiscretizationConfig = DiscretizationConfig(),
                flags: list | None = None) -> dict[str, float]:
    """The 18 first-order statistics of the in-mask intensities.

    Variance is the population variance and Kurtosis is non-excess.  Entropy
    (bits) and Uniformity are taken over the discretized histogram.  A
    zero-variance ROI reports Skewness = Kurtosis = 0.
    """
    x = data[mask].astype(np.float64)
    n = x.size
    mean = x.mean()
    dev = x - mean
    m2 = np.mean(dev ** 2)
    energy = float(np.sum(x ** 2))

    _, counts = np.unique(discretize_values(x, cfg), return_counts=True)
    p = counts / n
    entropy = float(-np.sum(p * np.log2(p)))

    p10, p25, median, p75, p90 = np.percentile(x, [10, 25, 50, 75, 90])
    robust = x[(x >= p10) & (x <= p90)]
    if robust.size:
        rmad = float(np.mean(np.abs(robust - robust.mean())))
    else:
        rmad = 0.0
        if flags is not None:
            flags.append("firstorder:empty_robust_range")
    if m2 > 0:
        skew = np.mean(dev ** 3) / m2 ** 1.5
        kurt = np.mean(dev ** 4) / m2 ** 2
    else:
        skew = kurt = 0.0
        if flags is not None:
            flags.append("firstorder:zero_variance")

    return {
        "Energy": energy,
        "TotalEnergy": energy * voxel_volume,
        "Entropy": entropy + 0.0,
        "Minimum": float(x.min()),
        "10Percentile": float(p10),
        "90Percentile": float(p90),
        "Maximum": float(x.max()),
        "Mean": float(mean),
        "Median": float(median),
        "InterquartileRange": float(p75 - p25),
        "Range": float(x.max() - x.min()),
        "MeanAbsoluteDeviation": float(np.mean(np.abs(dev))),
        "RobustMeanAbsoluteDeviation": rmad,
        "RootMeanSquared": float(np.sqrt(energy / n)),
        "Skewness": float(skew),
        "Kurtosis": float(kurt),
        "Variance": float(m2),
        "Uniformity": float(np.sum(p ** 2)),
    }
