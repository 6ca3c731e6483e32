"""Command-line pipeline: phantom | extract | select | train | evaluate | explain |
featuremap | report.

Every command writes only under ``--out``.  Failures print a JSON object
``{"code": ..., "message": ...}`` on stderr and exit with status 1.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import RadiomicsError, TestLeakage
from .evaluation import SplitResult, evaluate
from .explain import feature_map, shap_summary
from .features.extract import PUBLISHED_TOTALS, expected_feature_count, extract_all
from .features.table import FeatureTable, read_csv, write_csv
from .imaging import load_manifest, load_mask, load_volume, resolve_split, validate_pair
from .models import load as load_model
from .models import predict_scores, save, train
from .phantom import PhantomSpec, generate
from .render import render_report
from .stats import SelectionResult, correlation_matrix, group_compare, select_features


def _dump(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _say(msg: str) -> None:
    print(msg, flush=True)


# ------------------------------------------------------------------ commands


def cmd_phantom(args, cfg: RunConfig, out: Path) -> None:
    spec = PhantomSpec(n_per_class=args.n_per_class, n_test_per_class=args.n_test_per_class,
                       benign_amplitude=args.benign_amplitude,
                       malignant_amplitude=args.malignant_amplitude, seed=cfg.seed)
    manifest = generate(spec, out)
    _say(f"wrote {len(manifest.patients)} phantoms and manifest.json to {out}")


def _extract_one(job):
    pid, vol_path, mask_path, ecfg = job
    try:
        case = validate_pair(load_volume(vol_path), load_mask(mask_path))
        fv = extract_all(case, ecfg)
    except RadiomicsError as exc:
        raise type(exc)(f"patient {pid}: {exc.message}") from exc
    return fv.keys, fv.values, fv.flags


def cmd_extract(args, cfg: RunConfig, out: Path) -> None:
    manifest = load_manifest(args.manifest)
    train_rows, test_rows = resolve_split(manifest)
    patients = train_rows + test_rows
    ecfg = cfg.extraction
    jobs = [(p.id, p.volume_path, p.mask_path, ecfg) for p in patients]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(j) for j in jobs]
    keys = results[0][0]
    table = FeatureTable([p.id for p in patients], keys, np.array([r[1] for r in results]),
                         np.array([p.y for p in patients]), [p.site for p in patients],
                         ["train"] * len(train_rows) + ["test"] * len(test_rows))
    write_csv(table, out / "features.csv")
    expected = expected_feature_count(ecfg)
    _dump(out / "extraction.json", {
        "schema": 1, "n_patients": len(patients), "n_features": len(keys),
        "expected_features": expected, "published_totals": PUBLISHED_TOTALS,
        "config": {"filters": ecfg.filter_names, "classes": list(ecfg.classes),
                   "discretization": ecfg.discretization.to_json(),
                   "aggregation": ecfg.aggregation},
        "flags": {p.id: r[2] for p, r in zip(patients, results)},
    })
    _say(f"features per case: {len(keys)} (expected {expected}; "
         f"published totals {PUBLISHED_TOTALS['methods']} (methods) and "
         f"{PUBLISHED_TOTALS['abstract']} (abstract) are not reproduced by this "
         f"configuration)")
    _say(f"patients: {len(train_rows)} train, {len(test_rows)} test -> {out / 'features.csv'}")


def cmd_select(args, cfg: RunConfig, out: Path) -> None:
    table = read_csv(args.features).split("train")
    sel = cfg.selection
    k = args.k if args.k is not None else sel["k"]
    alpha = args.alpha if args.alpha is not None else sel["alpha"]
    result = select_features(table, k, alpha)
    _dump(out / "selection.json", result.to_json())
    group_compare(table, result.selected).write_csv(out / "group_comparison.csv")
    flags: list[str] = []
    R = correlation_matrix(table.columns(result.selected).X, sel["correlation"], flags)
    with open(out / "correlation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", *result.selected])
        for key, row in zip(result.selected, R):
            w.writerow([key, *(repr(float(v)) for v in row)])
    _say(f"selected {len(result.selected)} of {len(table.keys)} features on "
         f"{len(table)} training rows -> {out / 'selection.json'}")


def cmd_train(args, cfg: RunConfig, out: Path) -> None:
    table = read_csv(args.features).split("train")
    selection = SelectionResult.from_json(json.loads(Path(args.selection).read_text()))
    if selection.fit_rows_hash and selection.fit_rows_hash != table.ids_hash:
        raise TestLeakage("selection was fitted on a different row set than the training split")
    specs = cfg.model_specs()
    names = args.model or list(specs)
    unknown = [n for n in names if n not in specs]
    if unknown:
        raise ValueError(f"models {unknown} are not defined in the configuration")
    sub = table.columns(selection.selected)
    for name in names:
        model = train(specs[name], sub)
        save(model, out / f"model_{name}.json")
        _say(f"trained {name} ({specs[name].kind}) on {len(sub)} rows -> "
              f"{out / f'model_{name}.json'}")


def _model_name(path: Path) -> str:
    stem = path.stem
    return stem[len("model_"):] if stem.startswith("model_") else stem


def cmd_evaluate(args, cfg: RunConfig, out: Path) -> None:
    table = read_csv(args.features)
    ev = cfg.evaluation
    results = {}
    for mpath in map(Path, args.models):
        model = load_model(mpath)
        per_split = {}
        for split in args.split:
            part = table.split(split)
            if len(part) == 0:
                continue
            per_split[split] = SplitResult(part.ids, part.y, predict_scores(model, part))
        results[_model_name(mpath)] = per_split
    report = evaluate(results, ev["threshold"], ev["positive_class"])
    report.write(out)
    for name, splits in sorted(report.entries.items()):
        for split, e in sorted(splits.items()):
            auc = e["roc"]["auc"]
            _say(f"{name} {split}: AUC {auc if auc is None else f'{auc:.4f}'}")


def cmd_explain(args, cfg: RunConfig, out: Path) -> None:
    model = load_model(args.model)
    part = read_csv(args.features).split(args.split).columns(model.keys)
    summary = shap_summary(model, part.X, part.ids)
    summary.write(out)
    top = summary.top(args.top_k or cfg.explain["top_k"])
    (out / "shap_top.txt").write_text("\n".join(top) + "\n", encoding="utf-8")
    _say(f"SHAP over {len(part)} {args.split} rows; top feature {top[0]}")


def cmd_featuremap(args, cfg: RunConfig, out: Path) -> None:
    vol = load_volume(args.volume)
    mask = load_mask(args.mask)
    validate_pair(vol, mask)
    radius = args.radius if args.radius is not None else cfg.explain["kernel_radius"]
    ecfg = cfg.extraction
    fm = feature_map(vol, mask, args.key, radius, ecfg.discretization, ecfg.aggregation)
    files = fm.write(out)
    _say(f"wrote {len(files) - 1} slices for {args.key}")


def cmd_report(args, cfg: RunConfig, out: Path) -> None:
    doc = json.loads(Path(args.report).read_text())
    files = render_report(doc, out)
    _say(f"wrote {len(files)} SVG files to {out}")


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="run configuration JSON")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override run seed")

    p = argparse.ArgumentParser(prog="ctradiomics", parents=[common],
                                description="CT radiomics pipeline")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", parents=[common], help="generate a synthetic phantom cohort")
    s.add_argument("--n-per-class", type=int, default=40)
    s.add_argument("--n-test-per-class", type=int, default=15)
    s.add_argument("--benign-amplitude", type=float, default=PhantomSpec.benign_amplitude)
    s.add_argument("--malignant-amplitude", type=float, default=PhantomSpec.malignant_amplitude)
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("extract", parents=[common], help="extract features for a manifest")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("select", parents=[common], help="ridge RFE on training rows")
    s.add_argument("features")
    s.add_argument("--k", type=int)
    s.add_argument("--alpha", type=float)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("train", parents=[common], help="train configured models")
    s.add_argument("features")
    s.add_argument("selection")
    s.add_argument("--model", action="append", help="model name from the config (repeatable)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", parents=[common], help="metrics, curves and DeLong")
    s.add_argument("features")
    s.add_argument("models", nargs="+")
    s.add_argument("--split", nargs="+", default=["test"], choices=["train", "test"])
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("explain", parents=[common], help="SHAP values and ranking")
    s.add_argument("model")
    s.add_argument("features")
    s.add_argument("--split", default="test", choices=["train", "test"])
    s.add_argument("--top-k", type=int)
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("featuremap", parents=[common], help="voxel-wise feature map")
    s.add_argument("volume")
    s.add_argument("mask")
    s.add_argument("key")
    s.add_argument("--radius", type=int)
    s.set_defaults(func=cmd_featuremap)

    s = sub.add_parser("report", parents=[common], help="render report curves as SVG")
    s.add_argument("report")
    s.set_defaults(func=cmd_report)
    return p


def _fail(code: str, message: str) -> int:
    sys.stderr.write(json.dumps({"code": code, "message": message}) + "\n")
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("config", None), ("out", None), ("jobs", 1), ("seed", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        if args.out is None:
            raise ValueError("--out is required")
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.doc["seed"] = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        args.func(args, cfg, out)
    except RadiomicsError as exc:
        return _fail(exc.code, exc.message)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("IOError", str(exc))
    except ValueError as exc:
        return _fail("InvalidArgument", str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
