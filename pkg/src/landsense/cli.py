"""Command-line entry point.

Subcommands: scene, deploy, dataset, train, eval, sweep, pipeline. Every
command writes its artifacts under --out and finishes with a manifest that
lists each file with its sha256, so identical configs reproduce identical
bytes. Exit codes: 0 ok, 2 invalid arguments/config, 3 missing inputs,
4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import __version__ as TOOL_VERSION
from . import dataset as ds_mod
from . import experiment as exp_mod
from .errors import (DecodeFailure, InternalError, InvalidArgument, InvalidSpec,
                     LandsenseError, MissingCategory, MissingInput, OutOfBounds,
                     PlacementFailure)
from .forest import ForestParams, load_model, predict_batch, save_model, train_forest
from .metrics import confusion_matrix, macro_scores
from .propagation import PropagationParams
from .scene import (REGISTRY, DeployPreset, SceneSpec, category_code,
                    deploy_basestations, generate_scene, load_deployment, load_scene,
                    sample_ue_drops, save_deployment, save_scene)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_MISSING = 3
EXIT_INTERNAL = 4

_INVALID_ERRORS = (InvalidSpec, InvalidArgument, PlacementFailure,
                   MissingCategory, OutOfBounds, DecodeFailure)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _provenance(config_doc: dict, master_seed: int) -> dict:
    return {"tool_version": TOOL_VERSION,
            "config_hash": exp_mod.config_hash(config_doc),
            "master_seed": int(master_seed)}


def _write_manifest(out_dir: str, names: list[str], provenance: dict) -> None:
    artifacts = []
    for name in sorted(names):
        path = os.path.join(out_dir, name)
        artifacts.append({"name": name, "sha256": _sha256(path),
                          "bytes": os.path.getsize(path)})
    _write_json(os.path.join(out_dir, "manifest.json"),
                {"format": 1, "artifacts": artifacts, **provenance})


def _parse_mix(text: str) -> dict:
    mix = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise InvalidArgument(f"bad mix entry {part!r}; expected name=fraction")
        name, frac = part.split("=", 1)
        mix[category_code(name)] = float(frac)
    return mix


def _ensure_out(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_scene(args) -> int:
    if args.preset == "london-like":
        from .scene import LONDON_LIKE_MIX
        mix = dict(LONDON_LIKE_MIX)
    elif args.preset:
        raise InvalidArgument(f"unknown scene preset {args.preset!r}")
    else:
        mix = _parse_mix(args.mix) if args.mix else {}
    spec = SceneSpec(side_m=args.side_m, cell_m=args.cell_m,
                     category_mix=mix, seed=args.seed)
    scene = generate_scene(spec)
    out = _ensure_out(args)
    path = os.path.join(out, "scene.json")
    config_doc = {"command": "scene", "side_m": args.side_m, "cell_m": args.cell_m,
                  "mix": {str(k): v for k, v in sorted(mix.items())},
                  "preset": args.preset, "seed": args.seed}
    prov = _provenance(config_doc, args.seed)
    save_scene(scene, path, extra_meta=prov)
    _write_manifest(out, ["scene.json"], prov)
    print(f"scene written to {path}")
    for code, frac in sorted(scene.category_fractions().items()):
        print(f"  {REGISTRY[code].name:<9} ({code:>2}): {frac:.4f}")
    return EXIT_OK


def cmd_deploy(args) -> int:
    scene = load_scene(args.scene)
    if args.preset:
        preset = DeployPreset.by_name(args.preset, seed=args.seed)
    else:
        if args.k is None:
            raise InvalidArgument("either --preset or --k is required")
        preset = DeployPreset(layer_name=args.layer_name, k_or_sites=args.k,
                              frequency_hz=args.frequency_hz,
                              sectored=args.sectored, seed=args.seed)
    dep = deploy_basestations(scene, preset)
    out = _ensure_out(args)
    path = os.path.join(out, "deployment.json")
    config_doc = {"command": "deploy", "scene": os.path.basename(args.scene),
                  "preset": args.preset, "k": args.k, "sectored": args.sectored,
                  "frequency_hz": args.frequency_hz, "seed": args.seed}
    prov = _provenance(config_doc, args.seed)
    save_deployment(dep, path, extra_meta=prov)
    _write_manifest(out, ["deployment.json"], prov)
    print(f"deployment written to {path}: K={dep.K} at {dep.frequency_hz:g} Hz")
    return EXIT_OK


def cmd_dataset(args) -> int:
    scene = load_scene(args.scene)
    dep = load_deployment(args.deployment)
    params = PropagationParams.from_dict(_load_json_arg(args.propagation))
    drops = sample_ue_drops(scene, args.rows,
                            seed=exp_mod.derive_seed(args.seed, 2))
    N = args.top_n if args.top_n is not None else dep.K
    ds = ds_mod.build_dataset(scene, dep, drops, N=N, params=params,
                              master_seed=exp_mod.derive_seed(args.seed, 3))
    out = _ensure_out(args)
    path = os.path.join(out, "dataset.csv")
    config_doc = {"command": "dataset", "rows": args.rows, "top_n": N,
                  "seed": args.seed}
    ds_mod.save_csv(ds, path, extra_meta=_provenance(config_doc, args.seed))
    _write_manifest(out, ["dataset.csv", "dataset.csv.meta.json"],
                    _provenance(config_doc, args.seed))
    print(f"dataset written to {path}: L={ds.L}, K={ds.K}, N={ds.N}")
    return EXIT_OK


def cmd_train(args) -> int:
    ds = ds_mod.load_csv(args.dataset)
    if args.binarize is not None:
        ds = ds_mod.binarize_labels(ds, args.binarize)
    if args.rebalance:
        ds = ds_mod.rebalance(ds, args.rebalance, exp_mod.derive_seed(args.seed, 5))
    fp = ForestParams(n_trees=args.trees, max_depth=args.max_depth,
                      min_samples_split=args.min_samples_split,
                      features_per_split=_features_arg(args.features_per_split),
                      bootstrap=not args.no_bootstrap,
                      seed=exp_mod.derive_seed(args.seed, 6))
    fp.resolve_features(ds.K)
    model = train_forest(ds, fp)
    out = _ensure_out(args)
    path = os.path.join(out, "model.json")
    config_doc = {"command": "train", "trees": args.trees,
                  "max_depth": args.max_depth, "seed": args.seed}
    save_model(model, path, extra_meta=_provenance(config_doc, args.seed))
    _write_manifest(out, ["model.json"], _provenance(config_doc, args.seed))
    print(f"model written to {path}: {model.n_trees} trees over K={model.K}, "
          f"classes={model.classes}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    ds = ds_mod.load_csv(args.dataset)
    if ds.K != model.K:
        raise InvalidArgument(
            f"dataset width K={ds.K} does not match model K={model.K}")
    if args.binarize is not None:
        ds = ds_mod.binarize_labels(ds, args.binarize)
    if args.rebalance:
        ds = ds_mod.rebalance(ds, args.rebalance, exp_mod.derive_seed(args.seed, 5))
    if args.sigma_db > 0:
        ds = ds_mod.perturb(ds, args.sigma_db, exp_mod.derive_seed(args.seed, 7))
    preds = predict_batch(model, ds.features)
    classes = sorted(set(model.classes) | set(ds.classes()))
    cm = confusion_matrix(ds.labels, preds, classes)
    report = macro_scores(cm)
    config_doc = {"command": "eval", "sigma_db": args.sigma_db,
                  "binarize": args.binarize, "rebalance": args.rebalance,
                  "seed": args.seed}
    doc = {
        "format": 1,
        "confusion": cm.to_dict(),
        "n_eval_rows": cm.total,
        **report.to_dict(),
        **_provenance(config_doc, args.seed),
    }
    out = _ensure_out(args)
    path = os.path.join(out, "report.json")
    _write_json(path, doc)
    _write_manifest(out, ["report.json"], _provenance(config_doc, args.seed))
    print(f"report written to {path}: macro_precision={report.macro_precision:.4f} "
          f"macro_recall={report.macro_recall:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = exp_mod.ExperimentConfig.from_file(args.config)
    n_values = [int(v) for v in args.n_values.split(",") if v.strip()]
    sigma_values = [float(v) for v in args.sigma_values.split(",") if v.strip()]
    sweep = exp_mod.sweep_n(config, n_values, sigma_values, args.replicates)
    out = _ensure_out(args)
    path = os.path.join(out, "sweep.csv")
    exp_mod.save_sweep(sweep, config, path)
    _write_manifest(out, ["sweep.csv", "sweep.csv.meta.json"],
                    _provenance(config.to_dict(), config.master_seed))
    print(f"sweep written to {path}: {len(sweep.rows)} rows")
    for (metric, sigma), values in sorted(sweep.series.items()):
        pts = ", ".join(f"N={n}:{v:.4f}" for n, v in zip(sweep.axis, values))
        print(f"  {metric} @ sigma={sigma:g}: {pts}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = exp_mod.ExperimentConfig.from_file(args.config)
    result = exp_mod.run_experiment(config)
    out = _ensure_out(args)
    prov = _provenance(config.to_dict(), config.master_seed)
    save_scene(result.scene, os.path.join(out, "scene.json"), extra_meta=prov)
    save_deployment(result.deployment, os.path.join(out, "deployment.json"),
                    extra_meta=prov)
    ds_mod.save_csv(result.train, os.path.join(out, "train.csv"), extra_meta=prov)
    ds_mod.save_csv(result.val, os.path.join(out, "val.csv"), extra_meta=prov)
    save_model(result.model, os.path.join(out, "model.json"), extra_meta=prov)
    exp_mod.save_report(result, os.path.join(out, "report.json"))
    _write_manifest(out, ["scene.json", "deployment.json", "train.csv",
                          "train.csv.meta.json", "val.csv", "val.csv.meta.json",
                          "model.json", "report.json"], prov)
    headline = ", ".join(f"{k}={v:.4f}" for k, v in result.headline_metrics().items())
    print(f"pipeline artifacts in {out}: {headline}")
    return EXIT_OK


def _features_arg(text):
    return text if text == "sqrt" else int(text)


def _load_json_arg(path):
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise MissingInput(f"file not found: {path}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landsense",
        description="Landscape sensing from base-station path-gains")
    parser.add_argument("--version", action="version", version=TOOL_VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scene", help="generate a landscape map")
    p.add_argument("--preset", default=None, help="'london-like' for the built-in mix")
    p.add_argument("--side-m", type=float, default=1000.0)
    p.add_argument("--cell-m", type=float, default=5.0)
    p.add_argument("--mix", default=None,
                   help="comma list like street=0.25,building=0.35")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_scene)

    p = sub.add_parser("deploy", help="place a base-station layer on a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--preset", default=None,
                   help="'london-low' (20 omni @800MHz) or 'london-high' (18x3 @5GHz)")
    p.add_argument("--k", type=int, default=None, help="station/site count")
    p.add_argument("--sectored", action="store_true")
    p.add_argument("--frequency-hz", type=float, default=8.0e8)
    p.add_argument("--layer-name", default="custom")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("dataset", help="build a training/validation CSV")
    p.add_argument("--scene", required=True)
    p.add_argument("--deployment", required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--top-n", type=int, default=None, help="default: N = K")
    p.add_argument("--propagation", default=None, help="JSON file of overrides")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train a random forest on a dataset CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--features-per-split", default="sqrt")
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--binarize", default=None, metavar="CAT")
    p.add_argument("--rebalance", choices=["undersample", "oversample"], default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a dataset CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sigma-db", type=float, default=0.0)
    p.add_argument("--binarize", default=None, metavar="CAT")
    p.add_argument("--rebalance", choices=["undersample", "oversample"], default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="N x sigma sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--n-values", required=True, help="comma list, e.g. 2,5,10,20")
    p.add_argument("--sigma-values", default="0", help="comma list of dB values")
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pipeline", help="full experiment from one config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INVALID_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (MissingInput, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (InternalError, AssertionError, LandsenseError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
