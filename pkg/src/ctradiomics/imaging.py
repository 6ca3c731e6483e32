"""Volume, mask and manifest I/O.

Volumes are held as float64 arrays indexed ``[x, y, z]``; on disk both
supported formats store voxels x-fastest, which maps onto Fortran order.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    CompressedInput,
    DimMismatch,
    DuplicateId,
    EmptyMask,
    GridMismatch,
    LengthMismatch,
    MalformedHeader,
    MalformedManifest,
    NonFiniteVoxel,
    UnassignedSite,
    UnsupportedDatatype,
)

NIFTI_HEADER_SIZE = 348
# NIfTI datatype code -> numpy base type
NIFTI_DTYPES = {2: "u1", 4: "i2", 16: "f4"}
LABELS = ("benign", "malignant")


@dataclass(frozen=True)
class Volume3D:
    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise DimMismatch(f"expected a 3-D grid, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteVoxel("volume contains NaN or infinite voxels")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or min(spacing) <= 0:
            raise MalformedHeader(f"spacing must be three positive values, got {self.spacing}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.data.shape)

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.spacing))


@dataclass(frozen=True)
class RoiMask:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data).astype(bool)
        if data.ndim != 3:
            raise DimMismatch(f"expected a 3-D mask, got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.data.shape)

    @property
    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class ValidatedCase:
    volume: Volume3D
    mask: RoiMask
    # half-open [lo, hi) per axis
    bbox: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]


# --------------------------------------------------------------------- NIfTI


def load_nifti(path) -> Volume3D:
    """Read a single-file, uncompressed, 3-D NIfTI-1 volume.

    Only uint8, int16 and float32 payloads are accepted.  Stored values are
    mapped through ``scl_slope * v + scl_inter`` whenever the slope is a
    nonzero finite number.
    """
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raise CompressedInput(f"{path}: gzip-compressed NIfTI is not supported")
    if len(raw) < 352:
        raise MalformedHeader(f"{path}: {len(raw)} bytes is shorter than a NIfTI-1 header")

    if struct.unpack("<i", raw[:4])[0] == NIFTI_HEADER_SIZE:
        endian = "<"
    elif struct.unpack(">i", raw[:4])[0] == NIFTI_HEADER_SIZE:
        endian = ">"
    else:
        raise MalformedHeader(f"{path}: sizeof_hdr is not 348 in either byte order")

    magic = raw[344:348]
    if magic != b"n+1\x00":
        raise BadMagic(f"{path}: magic {magic!r} is not single-file NIfTI-1")

    dim = struct.unpack(endian + "8h", raw[40:56])
    if dim[0] != 3:
        raise DimMismatch(f"{path}: dim[0] = {dim[0]}, expected 3")
    dims = dim[1:4]
    if min(dims) < 1:
        raise MalformedHeader(f"{path}: nonpositive grid size {dims}")

    datatype = struct.unpack(endian + "h", raw[70:72])[0]
    if datatype not in NIFTI_DTYPES:
        raise UnsupportedDatatype(f"{path}: datatype code {datatype}")
    pixdim = struct.unpack(endian + "8f", raw[76:108])
    vox_offset = int(struct.unpack(endian + "f", raw[108:112])[0])
    slope, inter = struct.unpack(endian + "2f", raw[112:120])

    dtype = np.dtype(endian + NIFTI_DTYPES[datatype])
    n = int(np.prod(dims))
    if len(raw) < vox_offset + n * dtype.itemsize:
        raise LengthMismatch(f"{path}: payload shorter than {dims} voxels")
    stored = np.frombuffer(raw, dtype=dtype, count=n, offset=vox_offset)
    values = stored.astype(np.float64)
    if slope != 0 and np.isfinite(slope):
        values = float(slope) * values + float(inter)

    spacing = tuple(abs(float(p)) if p != 0 else 1.0 for p in pixdim[1:4])
    return Volume3D(values.reshape(dims, order="F"), spacing)


# ----------------------------------------------------------------------- raw


def _read_raw_header(header_path) -> tuple[tuple[int, ...], tuple[float, ...]]:
    try:
        header = json.loads(Path(header_path).read_text())
        dims = tuple(int(d) for d in header["dims"])
        spacing = tuple(float(s) for s in header.get("spacing_mm", (1.0, 1.0, 1.0)))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise MalformedHeader(f"{header_path}: {exc}") from exc
    if header.get("schema", 1) != 1:
        raise MalformedHeader(f"{header_path}: unsupported schema {header.get('schema')}")
    if len(dims) != 3 or min(dims) < 1 or len(spacing) != 3 or min(spacing) <= 0:
        raise MalformedHeader(f"{header_path}: bad dims {dims} or spacing {spacing}")
    return dims, spacing


def load_raw(header_path, data_path) -> Volume3D:
    """Read the fixture format: JSON header plus little-endian float32 voxels."""
    dims, spacing = _read_raw_header(header_path)
    payload = Path(data_path).read_bytes()
    expected = 4 * int(np.prod(dims))
    if len(payload) != expected:
        raise LengthMismatch(f"{data_path}: {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return Volume3D(values.reshape(dims, order="F"), spacing)


def write_raw(vol: Volume3D, header_path, data_path) -> None:
    header = {"schema": 1, "dims": list(vol.dims), "spacing_mm": list(vol.spacing)}
    Path(header_path).write_text(json.dumps(header) + "\n")
    Path(data_path).write_bytes(vol.data.astype("<f4").tobytes(order="F"))


def raw_data_path(header_path) -> Path:
    return Path(header_path).with_suffix(".f32le")


def load_volume(path) -> Volume3D:
    """Dispatch on extension: ``.nii`` is NIfTI, ``.json`` a raw-fixture header."""
    path = Path(path)
    if path.suffix == ".json":
        return load_raw(path, raw_data_path(path))
    return load_nifti(path)


def load_mask(path) -> RoiMask:
    return RoiMask(load_volume(path).data != 0)


# --------------------------------------------------------------- validation


def validate_pair(vol: Volume3D, mask: RoiMask) -> ValidatedCase:
    if vol.dims != mask.dims:
        raise GridMismatch(f"volume grid {vol.dims} != mask grid {mask.dims}")
    if mask.count < 1:
        raise EmptyMask("mask has no foreground voxels")
    coords = np.nonzero(mask.data)
    bbox = tuple((int(c.min()), int(c.max()) + 1) for c in coords)
    return ValidatedCase(vol, mask, bbox)


def crop_to_bbox(case: ValidatedCase, margin_voxels: int) -> ValidatedCase:
    """Crop both grids to the mask bounding box plus a margin, clamped to the volume."""
    if margin_voxels < 0:
        raise ValueError("margin must be >= 0")
    sl = tuple(
        slice(max(lo - margin_voxels, 0), min(hi + margin_voxels, n))
        for (lo, hi), n in zip(case.bbox, case.volume.dims)
    )
    vol = Volume3D(case.volume.data[sl], case.volume.spacing)
    return validate_pair(vol, RoiMask(case.mask.data[sl]))


# ----------------------------------------------------------------- manifest


@dataclass(frozen=True)
class PatientRecord:
    id: str
    site: str
    label: str
    volume_path: Path
    mask_path: Path
    split: str = "auto"

    @property
    def y(self) -> int:
        """Regression/classification target: benign 0, malignant 1."""
        return LABELS.index(self.label)


@dataclass(frozen=True)
class DatasetManifest:
    patients: list[PatientRecord]
    split_rule: dict = field(default_factory=lambda: {"kind": "explicit"})


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise MalformedManifest(f"{path}: {exc}") from exc
    if doc.get("schema") != 1:
        raise MalformedManifest(f"{path}: expected schema 1, got {doc.get('schema')!r}")
    base = path.parent
    patients = []
    try:
        for p in doc["patients"]:
            if p["label"] not in LABELS:
                raise MalformedManifest(f"patient {p['id']}: label {p['label']!r}")
            split = p.get("split", "auto")
            if split not in ("train", "test", "auto"):
                raise MalformedManifest(f"patient {p['id']}: split {split!r}")
            patients.append(
                PatientRecord(
                    id=str(p["id"]),
                    site=str(p["site"]),
                    label=p["label"],
                    volume_path=base / p["volume"],
                    mask_path=base / p["mask"],
                    split=split,
                )
            )
        rule = doc.get("split_rule", {"kind": "explicit"})
    except (KeyError, TypeError) as exc:
        raise MalformedManifest(f"{path}: {exc!r}") from exc
    return DatasetManifest(patients, rule)


def manifest_to_json(manifest: DatasetManifest, base_dir) -> dict:
    base_dir = Path(base_dir)
    return {
        "schema": 1,
        "split_rule": manifest.split_rule,
        "patients": [
            {
                "id": p.id,
                "site": p.site,
                "label": p.label,
                "volume": Path(p.volume_path).relative_to(base_dir).as_posix(),
                "mask": Path(p.mask_path).relative_to(base_dir).as_posix(),
                "split": p.split,
            }
            for p in manifest.patients
        ],
    }


def resolve_split(manifest: DatasetManifest) -> tuple[list[PatientRecord], list[PatientRecord]]:
    """Partition patients into (train, test), each sorted by id."""
    seen = set()
    for p in manifest.patients:
        if p.id in seen:
            raise DuplicateId(f"patient id {p.id!r} appears more than once")
        seen.add(p.id)

    rule = manifest.split_rule
    kind = rule.get("kind")
    train, test = [], []
    if kind == "by_site":
        train_sites = set(rule.get("train_sites", ()))
        test_sites = set(rule.get("test_sites", ()))
        for p in manifest.patients:
            in_train, in_test = p.site in train_sites, p.site in test_sites
            if in_train == in_test:
                raise UnassignedSite(f"site {p.site!r} (patient {p.id}) must be on exactly one side")
            (train if in_train else test).append(p)
    elif kind == "explicit":
        for p in manifest.patients:
            if p.split == "auto":
                raise UnassignedSite(f"patient {p.id} has no explicit split")
            (train if p.split == "train" else test).append(p)
    else:
        raise MalformedManifest(f"unknown split rule {kind!r}")
    key = lambda p: p.id  # noqa: E731
    return sorted(train, key=key), sorted(test, key=key)


def rows_hash(ids) -> str:
    """Order-independent fingerprint of a set of row ids."""
    digest = hashlib.sha256("\n".join(sorted(str(i) for i in ids)).encode())
    return digest.hexdigest()[:16]
