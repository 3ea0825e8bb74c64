"""Training-set construction: dominant-path selection, labels, resampling.

A dataset row is the K-wide gain vector after keeping only the N strongest
links (everything else set to the sentinel floor) plus the landscape code of
the drop position. "Zeroing out" a path is represented by the sentinel
because 0 dB would be the strongest possible gain, not an absent one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .propagation import PropagationParams, path_gain_matrix
from .scene import Deployment, SceneMap, UEDrop, category_code

SENTINEL_DB = -200.0


@dataclass(frozen=True)
class TrainingRow:
    features_db: np.ndarray
    label: int
    degenerate: bool = False


@dataclass
class Dataset:
    features: np.ndarray          # (L, K) float64
    labels: np.ndarray            # (L,) int64
    K: int
    N: int
    sentinel_db: float = SENTINEL_DB
    layer_name: str = ""
    seed: int = 0
    degenerate: np.ndarray | None = None   # (L,) bool
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape != (len(self.labels), self.K):
            raise InvalidArgument(
                f"features shape {self.features.shape} != (L, K={self.K})")
        if self.degenerate is None:
            self.degenerate = np.zeros(len(self.labels), dtype=bool)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def L(self) -> int:
        return len(self.labels)

    def row(self, i: int) -> TrainingRow:
        return TrainingRow(self.features[i], int(self.labels[i]),
                           bool(self.degenerate[i]))

    def classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.labels))

    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def take(self, idx: np.ndarray, **meta) -> "Dataset":
        new_meta = dict(self.meta)
        new_meta.update(meta)
        return Dataset(features=self.features[idx], labels=self.labels[idx],
                       K=self.K, N=self.N, sentinel_db=self.sentinel_db,
                       layer_name=self.layer_name, seed=self.seed,
                       degenerate=self.degenerate[idx], meta=new_meta)


def select_top_n(gains_db: Sequence[float], N: int,
                 sentinel: float = SENTINEL_DB) -> np.ndarray:
    """Keep the N strongest gains in place, set the rest to the sentinel.

    Ties at the N-th value go to the lower station index. Entries already at
    or below the sentinel never count as usable paths; if fewer than N
    usable paths exist they are all kept (the degenerate-row case).
    """
    gains = np.asarray(gains_db, dtype=np.float64)
    K = gains.shape[-1]
    if not 1 <= N <= K:
        raise InvalidArgument(f"N={N} outside [1, K={K}]")
    matrix = np.atleast_2d(gains)
    masked, _ = _mask_matrix(matrix, N, sentinel)
    return masked[0] if gains.ndim == 1 else masked


def _mask_matrix(G: np.ndarray, N: int, sentinel: float):
    """Vectorized top-N masking; returns (masked, degenerate_flags)."""
    L, K = G.shape
    order = np.argsort(-G, axis=1, kind="stable")  # stable: lower index wins ties
    keep = np.zeros((L, K), dtype=bool)
    np.put_along_axis(keep, order[:, :N], True, axis=1)
    usable = G > sentinel
    keep &= usable
    masked = np.where(keep, G, sentinel)
    degenerate = usable.sum(axis=1) < N
    return masked, degenerate


def build_dataset(scene: SceneMap, deployment: Deployment, drops: list[UEDrop],
                  N: int, params: PropagationParams, master_seed: int) -> Dataset:
    """One row per drop: S_N-masked gain vector plus the drop's true label."""
    if not drops:
        raise InvalidArgument("drops must be non-empty")
    if not 1 <= N <= deployment.K:
        raise InvalidArgument(f"N={N} outside [1, K={deployment.K}]")
    G = path_gain_matrix(scene, deployment, drops, params, master_seed)
    sentinel = params.min_gain_db
    masked, degenerate = _mask_matrix(G, N, sentinel)
    labels = np.array([d.true_category for d in drops], dtype=np.int64)
    return Dataset(features=masked, labels=labels, K=deployment.K, N=N,
                   sentinel_db=sentinel, layer_name=deployment.layer_name,
                   seed=int(master_seed), degenerate=degenerate)


def binarize_labels(ds: Dataset, target) -> Dataset:
    """Map labels to 1 (== target) / 0 (rest); idempotent per target."""
    code = category_code(target)
    if ds.meta.get("binarized_target") == code:
        return ds
    labels = np.where(ds.labels == code, 1, 0).astype(np.int64)
    meta = dict(ds.meta)
    meta["binarized_target"] = code
    return Dataset(features=ds.features, labels=labels, K=ds.K, N=ds.N,
                   sentinel_db=ds.sentinel_db, layer_name=ds.layer_name,
                   seed=ds.seed, degenerate=ds.degenerate, meta=meta)


def rebalance(ds: Dataset, mode: str, seed: int) -> Dataset:
    """Equalize class counts by undersampling or oversampling.

    undersample: every class reduced to the minority count, drawn without
    replacement. oversample: every class topped up to the majority count by
    redrawing its own rows with replacement. Output order is shuffled
    deterministically by the seed.
    """
    if mode not in ("undersample", "oversample"):
        raise InvalidArgument(f"unknown rebalance mode {mode!r}")
    counts = ds.class_counts()
    if len(counts) < 2:
        raise InvalidArgument("nothing to balance: dataset has a single class")
    rng = np.random.default_rng([int(seed), 0])
    pick: list[np.ndarray] = []
    if mode == "undersample":
        n_target = min(counts.values())
        for code in sorted(counts):
            idx = np.flatnonzero(ds.labels == code)
            pick.append(rng.choice(idx, size=n_target, replace=False))
    else:
        n_target = max(counts.values())
        for code in sorted(counts):
            idx = np.flatnonzero(ds.labels == code)
            extra = n_target - idx.size
            if extra > 0:
                pick.append(np.concatenate([idx, rng.choice(idx, size=extra,
                                                            replace=True)]))
            else:
                pick.append(idx)
    all_idx = np.concatenate(pick)
    all_idx = all_idx[rng.permutation(all_idx.size)]
    return ds.take(all_idx, rebalanced=mode)


def perturb(ds: Dataset, sigma_db: float, seed: int) -> Dataset:
    """Add N(0, sigma^2) dB noise to every non-sentinel feature."""
    if sigma_db < 0:
        raise InvalidArgument("sigma_db must be >= 0")
    if sigma_db == 0:
        return ds.take(np.arange(ds.L), sigma_db=0.0)
    rng = np.random.default_rng([int(seed), 1])
    noise = rng.normal(0.0, sigma_db, ds.features.shape)
    keep_mask = ds.features != ds.sentinel_db
    features = np.where(keep_mask, ds.features + noise, ds.features)
    meta = dict(ds.meta)
    meta["sigma_db"] = float(sigma_db)
    return Dataset(features=features, labels=ds.labels.copy(), K=ds.K, N=ds.N,
                   sentinel_db=ds.sentinel_db, layer_name=ds.layer_name,
                   seed=ds.seed, degenerate=ds.degenerate.copy(), meta=meta)


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint shuffled partition into (train, validation)."""
    if not 0.0 < train_fraction < 1.0:
        raise InvalidArgument("train_fraction must lie strictly in (0, 1)")
    n_train = int(round(ds.L * train_fraction))
    if n_train < 1 or ds.L - n_train < 1:
        raise InvalidArgument(
            f"split of {ds.L} rows at {train_fraction} leaves an empty part")
    perm = np.random.default_rng([int(seed), 2]).permutation(ds.L)
    return (ds.take(perm[:n_train], part="train"),
            ds.take(perm[n_train:], part="val"))


def mask_to_n(ds: Dataset, N: int) -> Dataset:
    """Re-apply the dominant-path selector at a (smaller) N.

    Only valid on datasets whose rows still hold at least N usable paths,
    i.e. typically on N=K (unmasked) source datasets.
    """
    if not 1 <= N <= ds.K:
        raise InvalidArgument(f"N={N} outside [1, K={ds.K}]")
    masked, degenerate = _mask_matrix(ds.features, N, ds.sentinel_db)
    return Dataset(features=masked, labels=ds.labels.copy(), K=ds.K, N=N,
                   sentinel_db=ds.sentinel_db, layer_name=ds.layer_name,
                   seed=ds.seed, degenerate=degenerate, meta=dict(ds.meta))


def save_csv(ds: Dataset, path, extra_meta: dict | None = None) -> None:
    """Write `g_1..g_K,label` rows (4 decimals) plus a JSON metadata sidecar."""
    header = ",".join([f"g_{i}" for i in range(1, ds.K + 1)] + ["label"])
    lines = [header]
    for i in range(ds.L):
        feats = ",".join(f"{v:.4f}" for v in ds.features[i])
        lines.append(f"{feats},{int(ds.labels[i])}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    meta = {
        "K": ds.K,
        "N": ds.N,
        "L": ds.L,
        "layer_name": ds.layer_name,
        "seed": ds.seed,
        "sigma_db": ds.meta.get("sigma_db", 0.0),
        "rebalanced": ds.meta.get("rebalanced"),
        "sentinel_db": ds.sentinel_db,
        "binarized_target": ds.meta.get("binarized_target"),
        "degenerate_rows": int(np.asarray(ds.degenerate).sum()),
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(sidecar_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def sidecar_path(csv_path) -> str:
    return str(csv_path) + ".meta.json"


def load_csv(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[-1] != "label" or not header[0].startswith("g_"):
            raise InvalidArgument(f"{path} does not look like a dataset CSV")
        K = len(header) - 1
        feats = []
        labels = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != K + 1:
                raise InvalidArgument(f"row width {len(parts)} != {K + 1}")
            feats.append([float(v) for v in parts[:K]])
            labels.append(int(parts[K]))
    meta = {}
    N = K
    sentinel = SENTINEL_DB
    layer = ""
    seed = 0
    try:
        with open(sidecar_path(path), encoding="utf-8") as fh:
            meta = json.load(fh)
        N = int(meta.get("N", K))
        sentinel = float(meta.get("sentinel_db", SENTINEL_DB))
        layer = meta.get("layer_name", "")
        seed = int(meta.get("seed", 0))
    except FileNotFoundError:
        pass
    ds_meta = {}
    if meta.get("binarized_target") is not None:
        ds_meta["binarized_target"] = int(meta["binarized_target"])
    if meta.get("rebalanced"):
        ds_meta["rebalanced"] = meta["rebalanced"]
    return Dataset(features=np.array(feats, dtype=np.float64),
                   labels=np.array(labels, dtype=np.int64), K=K, N=N,
                   sentinel_db=sentinel, layer_name=layer, seed=seed,
                   meta=ds_meta)
