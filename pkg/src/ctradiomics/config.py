"""Run configuration: a JSON document validated against a closed schema."""
from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .errors import InvalidConfig
from .features.discretize import DiscretizationConfig
from .features.extract import ExtractionConfig
from .features.registry import CLASSES
from .filters import DEFAULT_FILTERS
from .models import MODEL_KINDS, ModelSpec

_NUM = {"type": "number"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema": {"const": 1},
        "seed": {"type": "integer"},
        "extraction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "filters": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "classes": {"type": "array", "minItems": 1,
                            "items": {"enum": list(CLASSES)}},
                "discretization": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "mode": {"enum": ["fixed_bin_width", "fixed_bin_count"]},
                        "width": {"type": "number", "exclusiveMinimum": 0},
                        "n_bins": {"type": "integer", "minimum": 1},
                    },
                },
                "aggregation": {"enum": ["mean", "merged"]},
            },
        },
        "selection": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": {"type": "integer", "minimum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "correlation": {"enum": ["pearson", "spearman"]},
            },
        },
        "models": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_-]+$"},
                    "kind": {"enum": list(MODEL_KINDS)},
                    "params": {"type": "object"},
                },
            },
        },
        "evaluation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "threshold": {"type": "number", "minimum": 0, "maximum": 1},
                "positive_class": {"enum": ["benign", "malignant"]},
                "calibration_bins": {"type": "integer", "minimum": 1},
                "grid": {"type": "array", "items": {**_NUM, "exclusiveMinimum": 0,
                                                   "exclusiveMaximum": 1}, "minItems": 1},
            },
        },
        "explain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "top_k": {"type": "integer", "minimum": 1},
                "kernel_radius": {"type": "integer", "minimum": 0},
            },
        },
    },
}

DEFAULTS = {
    "schema": 1,
    "seed": 7,
    "extraction": {"filters": list(DEFAULT_FILTERS), "classes": list(CLASSES),
                   "discretization": {"mode": "fixed_bin_width", "width": 25.0, "n_bins": 32},
                   "aggregation": "mean"},
    "selection": {"k": 20, "alpha": 1.0, "correlation": "pearson"},
    "models": [{"name": "random_forest", "kind": "random_forest", "params": {}}],
    "evaluation": {"threshold": 0.5, "positive_class": "malignant", "calibration_bins": 10},
    "explain": {"top_k": 20, "kernel_radius": 2},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


class RunConfig:
    def __init__(self, doc: dict | None = None):
        doc = {} if doc is None else doc
        try:
            jsonschema.validate(doc, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise InvalidConfig(f"{where}: {exc.message}") from exc
        self.doc = _merge(DEFAULTS, doc)
        try:
            self.extraction  # noqa: B018 - validates filter names
            self.model_specs(self.seed)
        except (ValueError, KeyError) as exc:
            raise InvalidConfig(str(exc)) from exc

    @classmethod
    def load(cls, path=None) -> "RunConfig":
        if path is None:
            return cls()
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
        return cls(doc)

    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    @property
    def extraction(self) -> ExtractionConfig:
        e = self.doc["extraction"]
        return ExtractionConfig(tuple(e["filters"]), tuple(e["classes"]),
                                DiscretizationConfig.from_json(e["discretization"]),
                                e["aggregation"])

    @property
    def selection(self) -> dict:
        return self.doc["selection"]

    @property
    def evaluation(self) -> dict:
        return self.doc["evaluation"]

    @property
    def explain(self) -> dict:
        return self.doc["explain"]

    def model_specs(self, seed: int | None = None) -> dict[str, ModelSpec]:
        """Named specs; stochastic families without a seed inherit the run seed."""
        seed = self.seed if seed is None else seed
        specs = {}
        for m in self.doc["models"]:
            params = dict(m.get("params", {}))
            if m["kind"] in ("linear_svm", "decision_tree", "random_forest"):
                params.setdefault("seed", seed)
            name = m.get("name", m["kind"])
            if name in specs:
                raise InvalidConfig(f"duplicate model name {name!r}")
            specs[name] = ModelSpec(m["kind"], params)
        return specs
