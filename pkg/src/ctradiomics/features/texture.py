"""Second- and higher-order texture matrices and their features.

All matrices are built on a discretized gray image (levels ``1..ng`` inside
the ROI, ``0`` outside).  Neighbours outside the ROI never contribute.  GLCM
and GLRLM use the 13 unique directions of the 26-neighbourhood at distance 1;
by default features are computed per direction and then averaged, directions
without any valid voxel pair being skipped.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy import ndimage

from .registry import GLCM, GLDM, GLRLM, GLSZM, NGTDM

DIRECTIONS = tuple(
    d for d in itertools.product((-1, 0, 1), repeat=3)
    if d > (0, 0, 0)
)  # 13 directions, one of each antipodal pair
NEIGHBOURS = tuple(d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0))

# value reported for NGTDM coarseness when all neighbourhood differences vanish
COARSENESS_CEILING = 1e6


def _flag(flags, code):
    if flags is not None and code not in flags:
        flags.append(code)


def _shift(padded: np.ndarray, d) -> np.ndarray:
    """View of a 1-padded array offset by ``d``, aligned with the unpadded grid."""
    return padded[tuple(slice(1 + o, padded.shape[k] - 1 + o) for k, o in enumerate(d))]


def _entropy(p: np.ndarray) -> float:
    q = p[p > 0]
    return float(-np.sum(q * np.log2(q)))


def _average(per_direction: list[dict], names) -> dict[str, float]:
    return {n: float(np.mean([f[n] for f in per_direction])) for n in names}


# ---------------------------------------------------------------------- GLCM


def glcm_matrices(levels: np.ndarray, ng: int) -> list[np.ndarray]:
    """Symmetric co-occurrence counts per direction (zero matrices kept)."""
    padded = np.pad(levels, 1)
    out = []
    for d in DIRECTIONS:
        nb = _shift(padded, d)
        valid = (levels > 0) & (nb > 0)
        codes = (levels[valid] - 1) * ng + (nb[valid] - 1)
        p = np.bincount(codes, minlength=ng * ng).reshape(ng, ng).astype(np.float64)
        out.append(p + p.T)
    return out


def glcm_from_matrix(counts: np.ndarray, ng: int) -> dict[str, float]:
    """Features of one co-occurrence count matrix (integer-valued)."""
    p = counts / counts.sum()
    lv = np.arange(1, ng + 1, dtype=np.float64)
    i, j = np.meshgrid(lv, lv, indexing="ij")
    px, py = p.sum(axis=1), p.sum(axis=0)
    ux, uy = float(lv @ px), float(lv @ py)
    sx = np.sqrt(np.sum((lv - ux) ** 2 * px))
    sy = np.sqrt(np.sum((lv - uy) ** 2 * py))

    k = np.abs(i - j).astype(np.int64).ravel()
    p_minus = np.bincount(k, weights=p.ravel(), minlength=ng)
    p_plus = np.bincount((i + j).astype(np.int64).ravel(), weights=p.ravel(), minlength=2 * ng + 1)
    kk = np.arange(ng, dtype=np.float64)
    diff_avg = float(kk @ p_minus)

    hx, hy, hxy = _entropy(px), _entropy(py), _entropy(p)
    pxpy = np.outer(px, py)
    nz = p > 0
    hxy1 = float(-np.sum(p[nz] * np.log2(pxpy[nz])))
    # hxy2 - hxy is the mutual information; summing p log(p / px py) with the
    # ratio formed from integer counts keeps it exactly 0 for an independent
    # matrix, where the entropy difference leaves noise that the sqrt amplifies
    ratio = counts[nz] * counts.sum() / np.outer(counts.sum(axis=1), counts.sum(axis=0))[nz]
    mutual = float(np.sum(p[nz] * np.log2(ratio)))
    hmax = max(hx, hy)

    off = i != j
    shifted = i + j - ux - uy
    return {
        "Autocorrelation": float(np.sum(p * i * j)),
        "ClusterProminence": float(np.sum(shifted ** 4 * p)),
        "ClusterShade": float(np.sum(shifted ** 3 * p)),
        "ClusterTendency": float(np.sum(shifted ** 2 * p)),
        "Contrast": float(np.sum((i - j) ** 2 * p)),
        "Correlation": float((np.sum(p * i * j) - ux * uy) / (sx * sy)) if sx * sy > 0 else 1.0,
        "DifferenceAverage": diff_avg,
        "DifferenceEntropy": _entropy(p_minus),
        "DifferenceVariance": float(np.sum((kk - diff_avg) ** 2 * p_minus)),
        "Id": float(np.sum(p / (1 + np.abs(i - j)))),
        "Idm": float(np.sum(p / (1 + (i - j) ** 2))),
        "Idmn": float(np.sum(p / (1 + (i - j) ** 2 / ng ** 2))),
        "Idn": float(np.sum(p / (1 + np.abs(i - j) / ng))),
        "Imc1": (hxy - hxy1) / hmax if hmax > 0 else 0.0,
        "Imc2": float(np.sqrt(max(0.0, 1 - np.exp(-2 * mutual)))),
        "InverseVariance": float(np.sum(p[off] / (i[off] - j[off]) ** 2)),
        "JointAverage": ux,
        "JointEnergy": float(np.sum(p ** 2)),
        "JointEntropy": hxy,
        "MaximumProbability": float(p.max()),
        "SumEntropy": _entropy(p_plus),
        "SumSquares": float(np.sum((i - ux) ** 2 * p)),
    }


GLCM_DEGENERATE = {**{n: 0.0 for n in GLCM}, "MaximumProbability": 1.0, "JointEnergy": 1.0,
                   "Correlation": 1.0, "Id": 1.0, "Idm": 1.0, "Idmn": 1.0, "Idn": 1.0,
                   "Autocorrelation": 1.0, "JointAverage": 1.0}


def glcm_features(levels: np.ndarray, ng: int, aggregation: str = "mean",
                  flags: list | None = None) -> dict[str, float]:
    mats = [m for m in glcm_matrices(levels, ng) if m.sum() > 0]
    if not mats:
        _flag(flags, "glcm:no_valid_pairs")
        return dict(GLCM_DEGENERATE)
    if ng == 1 or (levels.max() == levels[levels > 0].min()):
        _flag(flags, "glcm:single_level")
    if aggregation == "merged":
        return glcm_from_matrix(sum(mats), ng)
    return _average([glcm_from_matrix(m, ng) for m in mats], GLCM)


# ------------------------------------------------------- size-type matrices
# GLRLM, GLSZM and GLDM share one family of formulas over a matrix whose rows
# are gray levels and whose columns are run length / zone size / dependence.

_GENERIC = ("short", "long", "gln", "glnn", "sn", "snn", "pct", "glv", "sv", "ent",
            "lgl", "hgl", "slgl", "shgl", "llgl", "lhgl")


def _size_features(P: np.ndarray, n_voxels: int) -> dict[str, float]:
    total = P.sum()
    ng, ns = P.shape
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, ns + 1, dtype=np.float64)[None, :]
    pg = P.sum(axis=1)
    ps = P.sum(axis=0)
    p = P / total
    mu_i = float(np.sum(p * i))
    mu_j = float(np.sum(p * j))
    return {
        "short": float(np.sum(P / j ** 2) / total),
        "long": float(np.sum(P * j ** 2) / total),
        "gln": float(np.sum(pg ** 2) / total),
        "glnn": float(np.sum(pg ** 2) / total ** 2),
        "sn": float(np.sum(ps ** 2) / total),
        "snn": float(np.sum(ps ** 2) / total ** 2),
        "pct": float(total / n_voxels),
        "glv": float(np.sum(p * (i - mu_i) ** 2)),
        "sv": float(np.sum(p * (j - mu_j) ** 2)),
        "ent": _entropy(p),
        "lgl": float(np.sum(P / i ** 2) / total),
        "hgl": float(np.sum(P * i ** 2) / total),
        "slgl": float(np.sum(P / (i ** 2 * j ** 2)) / total),
        "shgl": float(np.sum(P * i ** 2 / j ** 2) / total),
        "llgl": float(np.sum(P * j ** 2 / i ** 2) / total),
        "lhgl": float(np.sum(P * i ** 2 * j ** 2) / total),
    }


def _rename(generic: dict, names, order=_GENERIC) -> dict[str, float]:
    return {name: generic[g] for g, name in zip(order, names)}


# --------------------------------------------------------------------- GLRLM


def run_lengths(levels: np.ndarray, d) -> tuple[np.ndarray, np.ndarray]:
    """(gray level, length) of every maximal run along direction ``d``."""
    padded = np.pad(levels, 1)
    inside = levels > 0
    prev = _shift(padded, tuple(-o for o in d))
    nxt = _shift(padded, d)
    starts = np.argwhere(inside & (prev != levels)) + 1  # padded coordinates
    cont = np.zeros(padded.shape, dtype=bool)
    cont[1:-1, 1:-1, 1:-1] = inside & (nxt == levels)

    step = np.asarray(d)
    pos = starts.copy()
    length = np.ones(len(starts), dtype=np.int64)
    active = cont[tuple(pos.T)]
    while active.any():
        pos[active] += step
        length[active] += 1
        active[active] = cont[tuple(pos[active].T)]
    gray = padded[tuple(starts.T)]
    return gray, length


def glrlm_matrices(levels: np.ndarray, ng: int) -> list[np.ndarray]:
    runs = [run_lengths(levels, d) for d in DIRECTIONS]
    rmax = max(int(length.max()) for _, length in runs)
    mats = []
    for gray, length in runs:
        P = np.zeros((ng, rmax))
        np.add.at(P, (gray - 1, length - 1), 1)
        mats.append(P)
    return mats


def glrlm_features(levels: np.ndarray, ng: int, aggregation: str = "mean",
                   flags: list | None = None) -> dict[str, float]:
    n_voxels = int((levels > 0).sum())
    mats = glrlm_matrices(levels, ng)
    if aggregation == "merged":
        return _rename(_size_features(sum(mats), n_voxels * len(mats)), GLRLM)
    return _average([_rename(_size_features(P, n_voxels), GLRLM) for P in mats], GLRLM)


# --------------------------------------------------------------------- GLSZM

_CONNECT26 = np.ones((3, 3, 3), dtype=bool)


def zone_sizes(levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(gray level, size) of every 26-connected constant-level zone."""
    grays, sizes = [], []
    for g in np.unique(levels[levels > 0]):
        labelled, n = ndimage.label(levels == g, structure=_CONNECT26)
        counts = np.bincount(labelled.ravel())[1:]
        grays.append(np.full(n, g))
        sizes.append(counts)
    return np.concatenate(grays), np.concatenate(sizes)


def glszm_matrix(levels: np.ndarray, ng: int) -> np.ndarray:
    gray, size = zone_sizes(levels)
    P = np.zeros((ng, int(size.max())))
    np.add.at(P, (gray - 1, size - 1), 1)
    return P


def glszm_features(levels: np.ndarray, ng: int, flags: list | None = None) -> dict[str, float]:
    P = glszm_matrix(levels, ng)
    if P.sum() == 1:
        _flag(flags, "glszm:single_zone")
    return _rename(_size_features(P, int((levels > 0).sum())), GLSZM)


# ---------------------------------------------------------------------- GLDM

_GLDM_ORDER = ("short", "long", "gln", "sn", "snn", "glv", "sv", "ent",
               "lgl", "hgl", "slgl", "shgl", "llgl", "lhgl")


def dependence_counts(levels: np.ndarray) -> np.ndarray:
    """For each voxel: number of same-level in-ROI neighbours (26-neighbourhood)."""
    padded = np.pad(levels, 1)
    dep = np.zeros(levels.shape, dtype=np.int64)
    for d in NEIGHBOURS:
        dep += _shift(padded, d) == levels
    return dep


def gldm_matrix(levels: np.ndarray, ng: int) -> np.ndarray:
    inside = levels > 0
    dep = dependence_counts(levels)[inside]
    P = np.zeros((ng, len(NEIGHBOURS) + 1))
    np.add.at(P, (levels[inside] - 1, dep), 1)
    return P


def gldm_features(levels: np.ndarray, ng: int, flags: list | None = None) -> dict[str, float]:
    P = gldm_matrix(levels, ng)
    return _rename(_size_features(P, int((levels > 0).sum())), GLDM, _GLDM_ORDER)


# --------------------------------------------------------------------- NGTDM


def ngtdm_table(levels: np.ndarray, ng: int) -> tuple[np.ndarray, np.ndarray]:
    """Per level: count of voxels with at least one in-ROI neighbour, and the
    summed absolute difference to their neighbourhood mean."""
    padded = np.pad(levels, 1)
    total = np.zeros(levels.shape)
    count = np.zeros(levels.shape, dtype=np.int64)
    for d in NEIGHBOURS:
        nb = _shift(padded, d)
        total += nb
        count += nb > 0
    valid = (levels > 0) & (count > 0)
    g = levels[valid]
    diff = np.abs(g - total[valid] / count[valid])
    n = np.bincount(g - 1, minlength=ng).astype(np.float64)
    s = np.bincount(g - 1, weights=diff, minlength=ng)
    return n, s


def ngtdm_features(levels: np.ndarray, ng: int, flags: list | None = None) -> dict[str, float]:
    n, s = ngtdm_table(levels, ng)
    nvp = n.sum()
    if nvp == 0:
        _flag(flags, "ngtdm:no_neighbours")
        return {"Coarseness": COARSENESS_CEILING, "Contrast": 0.0, "Busyness": 0.0,
                "Complexity": 0.0, "Strength": 0.0}
    p = n / nvp
    lv = np.arange(1, ng + 1, dtype=np.float64)
    present = p > 0
    ngp = int(present.sum())
    pi, pj = np.meshgrid(p[present], p[present], indexing="ij")
    li, lj = np.meshgrid(lv[present], lv[present], indexing="ij")
    si, sj = np.meshgrid(s[present], s[present], indexing="ij")

    ps = float(p @ s)
    if ps > 0:
        coarseness = 1.0 / ps
    else:
        coarseness = COARSENESS_CEILING
        _flag(flags, "ngtdm:zero_differences")
    contrast = 0.0
    if ngp > 1:
        contrast = float(np.sum(pi * pj * (li - lj) ** 2) / (ngp * (ngp - 1)) * s.sum() / nvp)
    busy_den = float(np.sum(np.abs(li * pi - lj * pj)))
    if busy_den > 0:
        busyness = ps / busy_den
    else:
        busyness = 0.0
        _flag(flags, "ngtdm:busyness_undefined")
    complexity = float(np.sum(np.abs(li - lj) * (pi * si + pj * sj) / (pi + pj)) / nvp)
    s_total = s.sum()
    if s_total > 0:
        strength = float(np.sum((pi + pj) * (li - lj) ** 2) / s_total)
    else:
        strength = 0.0
        _flag(flags, "ngtdm:strength_undefined")
    return {"Coarseness": coarseness, "Contrast": contrast, "Busyness": busyness,
            "Complexity": complexity, "Strength": strength}
