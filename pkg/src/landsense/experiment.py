"""End-to-end experiment driver and the N / perturbation sweep.

One config describes scene, deployment, propagation, dataset shaping,
forest hyperparameters and the master seed; every random stage derives its
own stream from (master_seed, role), so a config replays byte-identically
at any worker count. Sweeps reuse the expensive unmasked gain matrix per
replicate and re-mask/train per N, evaluating each trained model across all
perturbation levels.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__ as TOOL_VERSION
from . import dataset as ds_mod
from .dataset import Dataset, binarize_labels, build_dataset, mask_to_n, perturb, split
from .errors import InvalidArgument, InvalidSpec, MissingInput
from .forest import ForestModel, ForestParams, predict_batch, train_forest
from .metrics import ConfusionMatrix, ScoreReport, confusion_matrix, macro_scores
from .propagation import PropagationParams
from .scene import (LONDON_LIKE_MIX, Deployment, DeployPreset, SceneMap, SceneSpec,
                    category_code, deploy_basestations, generate_scene, load_deployment,
                    load_scene, sample_ue_drops)

# seed-derivation roles
_ROLE_SCENE = 1
_ROLE_DROPS = 2
_ROLE_GAINS = 3
_ROLE_SPLIT = 4
_ROLE_REBALANCE = 5
_ROLE_FOREST = 6
_ROLE_PERTURB = 7
_ROLE_DEPLOY = 8
_ROLE_REPLICATE = 100


def derive_seed(*parts: int) -> int:
    """Stable sub-seed from an integer path such as (master, role, index)."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(2)
    return int(state[0]) * (1 << 32) + int(state[1])


def config_hash(doc: dict) -> str:
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()


@dataclass
class ExperimentConfig:
    scene: dict = field(default_factory=lambda: {"preset": "london-like"})
    deployment: dict = field(default_factory=lambda: {"preset": "london-high"})
    propagation: dict = field(default_factory=dict)
    rows_train: int = 20000
    rows_val: int = 20000
    top_n: int | None = None          # None means N = K
    target_category: Any = None       # code or name; None = multi-class
    rebalance: str | None = None
    sigma_db: float = 0.0
    perturb_before_mask: bool = False
    forest: dict = field(default_factory=dict)
    include_other_in_macro: bool = True
    master_seed: int = 0

    def __post_init__(self):
        if self.rows_train < 1 or self.rows_val < 1:
            raise InvalidSpec("rows_train and rows_val must be >= 1")
        if self.top_n is not None and self.top_n < 1:
            raise InvalidSpec("top_n must be >= 1 (or null for N = K)")
        if self.rebalance not in (None, "undersample", "oversample"):
            raise InvalidSpec(f"unknown rebalance mode {self.rebalance!r}")
        if self.sigma_db < 0:
            raise InvalidSpec("sigma_db must be >= 0")
        if self.target_category is not None:
            self.target_category = category_code(self.target_category)

    def to_dict(self) -> dict:
        return {
            "scene": self.scene,
            "deployment": self.deployment,
            "propagation": self.propagation,
            "rows_train": self.rows_train,
            "rows_val": self.rows_val,
            "top_n": self.top_n,
            "target_category": self.target_category,
            "rebalance": self.rebalance,
            "sigma_db": self.sigma_db,
            "perturb_before_mask": self.perturb_before_mask,
            "forest": self.forest,
            "include_other_in_macro": self.include_other_in_macro,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InvalidSpec(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except FileNotFoundError as exc:
            raise MissingInput(f"config file not found: {path}") from exc

    def hash(self) -> str:
        return config_hash(self.to_dict())


def resolve_scene(config: ExperimentConfig) -> SceneMap:
    doc = dict(config.scene)
    if "file" in doc:
        try:
            return load_scene(doc["file"])
        except FileNotFoundError as exc:
            raise MissingInput(f"scene file not found: {doc['file']}") from exc
    seed = doc.get("seed")
    if seed is None:
        seed = derive_seed(config.master_seed, _ROLE_SCENE)
    if doc.get("preset") == "london-like":
        mix = dict(LONDON_LIKE_MIX)
    elif "preset" in doc:
        raise InvalidSpec(f"unknown scene preset {doc['preset']!r}")
    else:
        mix = doc.get("mix", {})
    spec = SceneSpec(side_m=float(doc.get("side_m", 1000.0)),
                     cell_m=float(doc.get("cell_m", 5.0)),
                     category_mix=mix, seed=int(seed))
    return generate_scene(spec)


def resolve_deployment(config: ExperimentConfig, scene: SceneMap) -> Deployment:
    doc = dict(config.deployment)
    if "file" in doc:
        try:
            return load_deployment(doc["file"])
        except FileNotFoundError as exc:
            raise MissingInput(f"deployment file not found: {doc['file']}") from exc
    seed = doc.get("seed")
    if seed is None:
        seed = derive_seed(config.master_seed, _ROLE_DEPLOY)
    if "preset" in doc:
        preset = DeployPreset.by_name(doc["preset"], seed=int(seed))
    else:
        preset = DeployPreset(layer_name=doc.get("layer_name", "custom"),
                              k_or_sites=int(doc["k_or_sites"]),
                              frequency_hz=float(doc["frequency_hz"]),
                              sectored=bool(doc.get("sectored", False)),
                              seed=int(seed))
    return deploy_basestations(scene, preset)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    scene: SceneMap
    deployment: Deployment
    train: Dataset
    val: Dataset
    model: ForestModel
    confusion: ConfusionMatrix
    report: ScoreReport
    seeds: dict[str, int]

    def headline_metrics(self) -> dict[str, float]:
        """Class-1 precision/recall for binary runs, macro scores otherwise."""
        if self.config.target_category is not None:
            s = self.report.per_class.get(1)
            return {"precision": s.precision if s else 0.0,
                    "recall": s.recall if s else 0.0}
        return {"macro_precision": self.report.macro_precision,
                "macro_recall": self.report.macro_recall}

    def report_dict(self) -> dict:
        doc = {
            "format": 1,
            "tool_version": TOOL_VERSION,
            "config": self.config.to_dict(),
            "config_hash": self.config.hash(),
            "master_seed": self.config.master_seed,
            "seeds": self.seeds,
            "classes": self.confusion.classes,
            "confusion": self.confusion.to_dict(),
            "n_eval_rows": self.confusion.total,
            "headline": self.headline_metrics(),
        }
        doc.update(self.report.to_dict())
        return doc


def _shape_train_val(config: ExperimentConfig, scene, deployment, master: int,
                     n_value: int | None = None,
                     sigma_db: float | None = None,
                     prebuilt: tuple[Dataset, Dataset] | None = None):
    """Common dataset shaping for single runs and sweep cells.

    Returns (train, val, seeds). ``prebuilt`` supplies unmasked (train, val)
    halves so sweeps can skip the propagation stage.
    """
    params = PropagationParams.from_dict(config.propagation)
    K = deployment.K
    N = n_value if n_value is not None else (config.top_n or K)
    if not 1 <= N <= K:
        raise InvalidSpec(f"top_n={N} outside [1, K={K}]")
    sigma = config.sigma_db if sigma_db is None else sigma_db
    seeds = {
        "drops": derive_seed(master, _ROLE_DROPS),
        "gains": derive_seed(master, _ROLE_GAINS),
        "split": derive_seed(master, _ROLE_SPLIT),
        "rebalance": derive_seed(master, _ROLE_REBALANCE),
        "forest": derive_seed(master, _ROLE_FOREST),
        "perturb": derive_seed(master, _ROLE_PERTURB),
    }
    if prebuilt is None:
        total = config.rows_train + config.rows_val
        drops = sample_ue_drops(scene, total, seed=seeds["drops"])
        raw = build_dataset(scene, deployment, drops, N=K, params=params,
                            master_seed=seeds["gains"])
        train_raw, val_raw = split(raw, config.rows_train / total, seeds["split"])
    else:
        train_raw, val_raw = prebuilt

    if config.perturb_before_mask and sigma > 0:
        val_raw = perturb(val_raw, sigma, seeds["perturb"])
    train = mask_to_n(train_raw, N)
    val = mask_to_n(val_raw, N)
    if config.target_category is not None:
        train = binarize_labels(train, config.target_category)
        val = binarize_labels(val, config.target_category)
    if config.rebalance:
        train = ds_mod.rebalance(train, config.rebalance, seeds["rebalance"])
    if not config.perturb_before_mask and sigma > 0:
        val = perturb(val, sigma, seeds["perturb"])
    return train, val, seeds


def _evaluate(model: ForestModel, val: Dataset,
              include_other: bool, binarized: bool):
    preds = predict_batch(model, val.features)
    classes = sorted(set(model.classes) | set(val.classes()))
    cm = confusion_matrix(val.labels, preds, classes)
    include = list(classes)
    if not binarized and not include_other and 0 in include and len(include) > 1:
        include.remove(0)
    return cm, macro_scores(cm, include)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Build datasets, train, evaluate; everything derived from master_seed."""
    scene = resolve_scene(config)
    deployment = resolve_deployment(config, scene)
    train, val, seeds = _shape_train_val(config, scene, deployment,
                                         config.master_seed)
    fparams = ForestParams.from_dict(
        {**config.forest, "seed": derive_seed(config.master_seed, _ROLE_FOREST)})
    model = train_forest(train, fparams)
    cm, report = _evaluate(model, val, config.include_other_in_macro,
                           config.target_category is not None)
    return ExperimentResult(config=config, scene=scene, deployment=deployment,
                            train=train, val=val, model=model, confusion=cm,
                            report=report, seeds=seeds)


@dataclass
class SweepResult:
    axis: list[int]                                  # N values
    sigma_values: list[float]
    series: dict[tuple[str, float], list[float]]     # (metric, sigma) -> mean per N
    replicate_seeds: list[int]
    rows: list[tuple]                                # (N, sigma, replicate, metric, value)

    def to_csv_text(self) -> str:
        lines = ["N,sigma_db,replicate,metric,value"]
        for N, sigma, rep, metric, value in self.rows:
            lines.append(f"{N},{sigma:g},{rep},{metric},{value!r}")
        return "\n".join(lines) + "\n"


def sweep_n(config: ExperimentConfig, n_values: list[int],
            sigma_values: list[float], replicates: int) -> SweepResult:
    """Precision/recall over the (N, sigma) grid, averaged across replicates.

    Each replicate redraws drops, shadowing, split and forest streams from
    its own derived seed; the gain matrix is built once per replicate and
    re-masked per N, and each trained model is scored at every sigma.
    """
    if replicates < 1:
        raise InvalidArgument("replicates must be >= 1")
    scene = resolve_scene(config)
    deployment = resolve_deployment(config, scene)
    K = deployment.K
    n_values = [int(n) for n in n_values]
    if any(not 1 <= n <= K for n in n_values):
        raise InvalidArgument(f"n_values must lie in [1, K={K}]: {n_values}")
    sigma_values = [float(s) for s in sigma_values]
    if any(s < 0 for s in sigma_values):
        raise InvalidArgument("sigma values must be >= 0")
    params = PropagationParams.from_dict(config.propagation)
    binarized = config.target_category is not None

    rep_seeds = [derive_seed(config.master_seed, _ROLE_REPLICATE, r)
                 for r in range(replicates)]
    rows = []
    acc: dict[tuple[str, float], np.ndarray] = {}
    for rep, rep_master in enumerate(rep_seeds):
        total = config.rows_train + config.rows_val
        drops = sample_ue_drops(scene, total,
                                seed=derive_seed(rep_master, _ROLE_DROPS))
        raw = build_dataset(scene, deployment, drops, N=K, params=params,
                            master_seed=derive_seed(rep_master, _ROLE_GAINS))
        train_raw, val_raw = split(raw, config.rows_train / total,
                                   derive_seed(rep_master, _ROLE_SPLIT))
        for ni, N in enumerate(n_values):
            cell_master = derive_seed(rep_master, 10, ni)
            train, _, _ = _shape_train_val(
                config, scene, deployment, cell_master, n_value=N, sigma_db=0.0,
                prebuilt=(train_raw, val_raw))
            fparams = ForestParams.from_dict(
                {**config.forest, "seed": derive_seed(cell_master, _ROLE_FOREST)})
            model = train_forest(train, fparams)
            for si, sigma in enumerate(sigma_values):
                _, val, _ = _shape_train_val(
                    config, scene, deployment, derive_seed(cell_master, 20, si),
                    n_value=N, sigma_db=sigma, prebuilt=(train_raw, val_raw))
                _, report = _evaluate(model, val, config.include_other_in_macro,
                                      binarized)
                if binarized:
                    s1 = report.per_class.get(1)
                    metrics = {"precision": s1.precision if s1 else 0.0,
                               "recall": s1.recall if s1 else 0.0}
                else:
                    metrics = {"macro_precision": report.macro_precision,
                               "macro_recall": report.macro_recall}
                for name, value in metrics.items():
                    rows.append((N, sigma, rep, name, value))
                    key = (name, sigma)
                    if key not in acc:
                        acc[key] = np.zeros((replicates, len(n_values)))
                    acc[key][rep, ni] = value

    series = {key: [float(v) for v in grid.mean(axis=0)]
              for key, grid in acc.items()}
    return SweepResult(axis=n_values, sigma_values=sigma_values, series=series,
                       replicate_seeds=rep_seeds, rows=rows)


def save_report(result: ExperimentResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.report_dict(), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def save_sweep(sweep: SweepResult, config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(sweep.to_csv_text())
    meta = {
        "tool_version": TOOL_VERSION,
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "master_seed": config.master_seed,
        "n_values": sweep.axis,
        "sigma_values": sweep.sigma_values,
        "replicate_seeds": sweep.replicate_seeds,
        "series": {f"{m}@sigma={s:g}": v for (m, s), v in sorted(sweep.series.items())},
    }
    with open(str(path) + ".meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
