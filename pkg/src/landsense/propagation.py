"""Surrogate path-gain model.

Gain to each station is -(free-space anchor + log-distance term with the
exponent of the UE's own landscape + per-category obstruction loss summed
along the 2-D ray + sector pattern) plus optional log-normal shadowing, with
a hard floor. The landscape enters twice (exponent and ray obstruction), so
the gain vector carries the signature the detector is meant to learn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidArgument
from .scene import (BARREN, BUILDING, FOREST, MAX_CODE, OTHER, REGISTRY, STREET,
                    UE_HEIGHT_M, BaseStation, Deployment, SceneMap, UEDrop)

SPEED_OF_LIGHT_M_S = 299792458.0

DEFAULT_EXPONENTS = {
    STREET: 2.6,
    BUILDING: 3.2,
    FOREST: 3.0,
    BARREN: 2.0,
    OTHER: 2.0,
}

DEFAULT_EXCESS_DB_PER_M = {
    STREET: 0.0,
    BUILDING: 0.4,
    FOREST: 0.15,
    BARREN: 0.0,
    OTHER: 0.0,
}


@dataclass
class PropagationParams:
    exponent_by_category: dict[int, float] = field(
        default_factory=lambda: dict(DEFAULT_EXPONENTS))
    excess_db_per_m: dict[int, float] = field(
        default_factory=lambda: dict(DEFAULT_EXCESS_DB_PER_M))
    shadow_sigma_db: float = 4.0
    reference_distance_m: float = 1.0
    min_gain_db: float = -200.0

    def __post_init__(self):
        for code in REGISTRY:
            self.exponent_by_category.setdefault(code, 2.0)
            self.excess_db_per_m.setdefault(code, 0.0)
        for code, n in self.exponent_by_category.items():
            if not 1.6 <= n <= 6.0:
                raise InvalidArgument(
                    f"path-loss exponent {n} for category {code} outside [1.6, 6.0]")
        if any(v < 0 for v in self.excess_db_per_m.values()):
            raise InvalidArgument("excess losses must be >= 0")
        if self.shadow_sigma_db < 0:
            raise InvalidArgument("shadow_sigma_db must be >= 0")
        if self.reference_distance_m <= 0:
            raise InvalidArgument("reference_distance_m must be > 0")

    def lookups(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense per-code lookup arrays used by the kernels."""
        exp_l = np.zeros(MAX_CODE + 1, dtype=np.float64)
        exc_l = np.zeros(MAX_CODE + 1, dtype=np.float64)
        for code, n in self.exponent_by_category.items():
            exp_l[code] = n
        for code, v in self.excess_db_per_m.items():
            exc_l[code] = v
        return exp_l, exc_l

    def to_dict(self) -> dict:
        return {
            "exponent_by_category": {str(k): v for k, v in
                                     sorted(self.exponent_by_category.items())},
            "excess_db_per_m": {str(k): v for k, v in
                                sorted(self.excess_db_per_m.items())},
            "shadow_sigma_db": self.shadow_sigma_db,
            "reference_distance_m": self.reference_distance_m,
            "min_gain_db": self.min_gain_db,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PropagationParams":
        kwargs = {}
        if "exponent_by_category" in doc:
            kwargs["exponent_by_category"] = {
                int(k): float(v) for k, v in doc["exponent_by_category"].items()}
        if "excess_db_per_m" in doc:
            kwargs["excess_db_per_m"] = {
                int(k): float(v) for k, v in doc["excess_db_per_m"].items()}
        for key in ("shadow_sigma_db", "reference_distance_m", "min_gain_db"):
            if key in doc:
                kwargs[key] = float(doc[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class PathGainVector:
    gains_db: np.ndarray  # length K, aligned with Deployment.stations
    ue: UEDrop


def free_space_reference(frequency_hz: float, d0_m: float) -> float:
    """Free-space loss 20*log10(4*pi*d0*f/c) in dB at the anchor distance."""
    if frequency_hz <= 0 or d0_m <= 0:
        raise InvalidArgument("frequency_hz and d0_m must be > 0")
    return 20.0 * math.log10(4.0 * math.pi * d0_m * frequency_hz / SPEED_OF_LIGHT_M_S)


def raster_traverse(scene: SceneMap, a, b) -> list[tuple[int, float]]:
    """Cells the segment a->b crosses, as (category_code, chord_m) pairs."""
    for p in (a, b):
        if not (0.0 <= p[0] <= scene.side_m and 0.0 <= p[1] <= scene.side_m):
            raise InvalidArgument(f"segment endpoint {p} outside the footprint")
    codes, lengths = _kernels.traverse_segment(
        scene.grid, scene.cell_m, float(a[0]), float(a[1]), float(b[0]), float(b[1]))
    return [(int(c), float(l)) for c, l in zip(codes, lengths)]


def _station_arrays(deployment: Deployment):
    sx = np.array([s.x for s in deployment.stations], dtype=np.float64)
    sy = np.array([s.y for s in deployment.stations], dtype=np.float64)
    sz = np.array([s.z for s in deployment.stations], dtype=np.float64)
    s_az = np.array([math.nan if s.azimuth_deg is None else s.azimuth_deg
                     for s in deployment.stations], dtype=np.float64)
    return sx, sy, sz, s_az


def path_gain(scene: SceneMap, station: BaseStation, ue: UEDrop,
              params: PropagationParams, shadow_sample: float = 0.0) -> float:
    """Gain (dB) on one UE-station link; shadowing is supplied by the caller."""
    exp_l, exc_l = params.lookups()
    fspl = np.array([free_space_reference(station.frequency_hz,
                                          params.reference_distance_m)])
    az = np.array([math.nan if station.azimuth_deg is None else station.azimuth_deg])
    out = _kernels.gain_matrix(
        scene.grid, scene.cell_m, exp_l, exc_l,
        np.array([station.x]), np.array([station.y]), np.array([station.z]),
        az, fspl,
        np.array([ue.x]), np.array([ue.y]), UE_HEIGHT_M,
        params.reference_distance_m, params.min_gain_db,
        np.ascontiguousarray([[float(shadow_sample)]]))
    return float(out[0, 0])


def path_gain_vector(scene: SceneMap, deployment: Deployment, ue: UEDrop,
                     params: PropagationParams,
                     rng_stream: np.random.Generator) -> PathGainVector:
    """Gains to all K stations with one shadowing draw per link."""
    K = deployment.K
    if params.shadow_sigma_db > 0:
        shadow = rng_stream.normal(0.0, params.shadow_sigma_db, K)
    else:
        shadow = np.zeros(K)
    gains = _gain_rows(scene, deployment, np.array([ue.x]), np.array([ue.y]),
                       params, shadow.reshape(1, K))
    return PathGainVector(gains_db=gains[0], ue=ue)


def _gain_rows(scene, deployment, ue_x, ue_y, params, shadow):
    exp_l, exc_l = params.lookups()
    sx, sy, sz, s_az = _station_arrays(deployment)
    fspl_one = free_space_reference(deployment.frequency_hz,
                                    params.reference_distance_m)
    fspl = np.full(deployment.K, fspl_one, dtype=np.float64)
    return _kernels.gain_matrix(
        scene.grid, scene.cell_m, exp_l, exc_l, sx, sy, sz, s_az, fspl,
        np.ascontiguousarray(ue_x, dtype=np.float64),
        np.ascontiguousarray(ue_y, dtype=np.float64),
        UE_HEIGHT_M, params.reference_distance_m, params.min_gain_db,
        np.ascontiguousarray(shadow, dtype=np.float64))


def path_gain_matrix(scene: SceneMap, deployment: Deployment,
                     drops: list[UEDrop], params: PropagationParams,
                     master_seed: int) -> np.ndarray:
    """(L, K) gain matrix; the shadowing stream for drop l is (master_seed, l).

    Per-drop streams make the result independent of chunking or worker
    count: any subset of rows can be recomputed in isolation.
    """
    L = len(drops)
    K = deployment.K
    ue_x = np.array([d.x for d in drops], dtype=np.float64)
    ue_y = np.array([d.y for d in drops], dtype=np.float64)
    if params.shadow_sigma_db > 0:
        shadow = np.empty((L, K), dtype=np.float64)
        for l in range(L):
            rng = np.random.default_rng([int(master_seed), l])
            shadow[l] = rng.normal(0.0, params.shadow_sigma_db, K)
    else:
        shadow = np.zeros((L, K), dtype=np.float64)
    return _gain_rows(scene, deployment, ue_x, ue_y, params, shadow)
