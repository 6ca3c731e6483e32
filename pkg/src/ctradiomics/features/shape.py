from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import pdist


def _max_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    return float(pdist(points).max())


def _exposed_faces(mask: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Per-voxel exposed-face indicator and exposed-face count per axis."""
    padded = np.pad(mask, 1)
    core = padded[1:-1, 1:-1, 1:-1]
    exposed = np.zeros(mask.shape, dtype=bool)
    per_axis = []
    for axis in range(3):
        count = 0
        for step in (-1, 1):
            nb = np.roll(padded, step, axis=axis)[1:-1, 1:-1, 1:-1]
            face = core & ~nb
            exposed |= face
            count += int(face.sum())
        per_axis.append(count)
    return exposed, per_axis


def shape_features(mask: np.ndarray, spacing, flags: list | None = None) -> dict[str, float]:
    """14 shape descriptors of a binary ROI.

    Surface area counts exposed voxel faces (no mesh), which overestimates
    the area of smooth objects; Sphericity can therefore fall below the
    mesh-based value.  Diameters are maximal distances between voxel centres.
    """
    sx, sy, sz = (float(s) for s in spacing)
    count = int(mask.sum())
    volume = count * sx * sy * sz

    exposed, faces = _exposed_faces(mask)
    area = faces[0] * sy * sz + faces[1] * sx * sz + faces[2] * sx * sy

    idx = np.argwhere(mask)
    coords = idx * np.array([sx, sy, sz])
    boundary_idx = np.argwhere(exposed)
    boundary = boundary_idx * np.array([sx, sy, sz])

    def planar(axis):
        best = 0.0
        for value in np.unique(boundary_idx[:, axis]):
            best = max(best, _max_distance(boundary[boundary_idx[:, axis] == value]))
        return best

    if count > 1:
        centred = coords - coords.mean(axis=0)
        cov = centred.T @ centred / count
        lam = np.clip(np.sort(np.linalg.eigvalsh(cov))[::-1], 0.0, None)
    else:
        lam = np.zeros(3)
    if lam[0] > 0:
        elongation = math.sqrt(lam[1] / lam[0])
        flatness = math.sqrt(lam[2] / lam[0])
    else:
        elongation = flatness = 1.0
        if flags is not None:
            flags.append("shape:single_voxel")

    return {
        "VoxelVolume": volume,
        "SurfaceArea": area,
        "SurfaceVolumeRatio": area / volume,
        "Sphericity": math.pi ** (1 / 3) * (6 * volume) ** (2 / 3) / area,
        "Maximum3DDiameter": _max_distance(boundary),
        "Maximum2DDiameterAxial": planar(2),
        "Maximum2DDiameterCoronal": planar(1),
        "Maximum2DDiameterSagittal": planar(0),
        "MajorAxisLength": 4 * math.sqrt(lam[0]),
        "MinorAxisLength": 4 * math.sqrt(lam[1]),
        "LeastAxisLength": 4 * math.sqrt(lam[2]),
        "Elongation": elongation,
        "Flatness": flatness,
        "Compactness1": volume / (math.sqrt(math.pi) * area ** 1.5),
    }
