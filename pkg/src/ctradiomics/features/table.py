"""Patient-by-feature table and its CSV form.

CSV layout: ``id,site,label,split`` followed by canonical feature keys; one row
per patient.  Floats are written with ``repr`` so they round-trip exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..imaging import LABELS, rows_hash

META_COLUMNS = ("id", "site", "label", "split")


@dataclass
class FeatureTable:
    ids: list[str]
    keys: list[str]
    X: np.ndarray
    y: np.ndarray  # 0 benign, 1 malignant; float targets allowed for regression
    sites: list[str] | None = None
    splits: list[str] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y)
        n = len(self.ids)
        if self.X.shape != (n, len(self.keys)) or len(self.y) != n:
            raise ValueError(f"table shape {self.X.shape} disagrees with {n} ids x "
                             f"{len(self.keys)} keys")
        if len(set(self.keys)) != len(self.keys):
            raise ValueError("duplicate feature keys")
        self.sites = list(self.sites) if self.sites is not None else [""] * n
        self.splits = list(self.splits) if self.splits is not None else ["train"] * n

    def __len__(self):
        return len(self.ids)

    @property
    def ids_hash(self) -> str:
        return rows_hash(self.ids)

    def rows(self, which) -> "FeatureTable":
        idx = np.asarray(which)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return FeatureTable([self.ids[i] for i in idx], list(self.keys), self.X[idx], self.y[idx],
                            [self.sites[i] for i in idx], [self.splits[i] for i in idx])

    def split(self, name: str) -> "FeatureTable":
        return self.rows([s == name for s in self.splits])

    def columns(self, keys) -> "FeatureTable":
        pos = {k: i for i, k in enumerate(self.keys)}
        missing = [k for k in keys if k not in pos]
        if missing:
            from ..errors import KeyMismatch

            raise KeyMismatch(f"keys not in table: {missing[:5]}")
        cols = [pos[k] for k in keys]
        return FeatureTable(list(self.ids), list(keys), self.X[:, cols], self.y,
                            self.sites, self.splits)

    def with_X(self, X) -> "FeatureTable":
        return FeatureTable(list(self.ids), list(self.keys), X, self.y, self.sites, self.splits)


def write_csv(table: FeatureTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*META_COLUMNS, *table.keys])
        for i, pid in enumerate(table.ids):
            label = LABELS[int(table.y[i])]
            w.writerow([pid, table.sites[i], label, table.splits[i],
                        *(repr(float(v)) for v in table.X[i])])


def read_csv(path) -> FeatureTable:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header[:4]) != META_COLUMNS:
        raise ValueError(f"{path}: first columns must be {META_COLUMNS}")
    return FeatureTable(
        ids=[r[0] for r in body],
        keys=header[4:],
        X=np.array([[float(v) for v in r[4:]] for r in body]).reshape(len(body), len(header) - 4),
        y=np.array([LABELS.index(r[2]) for r in body], dtype=np.int64),
        sites=[r[1] for r in body],
        splits=[r[3] for r in body],
    )
