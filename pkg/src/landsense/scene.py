"""Synthetic landscape scenes, base-station deployments and UE drops.

A scene is a square raster of landscape-category codes plus a per-cell
building height. The generator is procedural with a controllable category
mix so class-ratio experiments can be set up by construction; everything is
a pure function of (arguments, seed).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (InvalidArgument, InvalidSpec, MissingCategory, OutOfBounds,
                     PlacementFailure)

SCENE_FORMAT = 1
DEPLOYMENT_FORMAT = 1

UE_HEIGHT_M = 1.5
DEFAULT_BS_HEIGHT_M = 25.0
ROOFTOP_CLEARANCE_M = 3.0


@dataclass(frozen=True)
class LandscapeCategory:
    code: int
    name: str


STREET = 11
BUILDING = 15
BARREN = 4
FOREST = 7
OTHER = 0

#: Fixed category registry. Codes 11/15/4/0 are the conventional street,
#: building, barren and none-of-the-above classes; 7 is this toolkit's code
#: for forest.
REGISTRY: dict[int, LandscapeCategory] = {
    STREET: LandscapeCategory(STREET, "street"),
    BUILDING: LandscapeCategory(BUILDING, "building"),
    BARREN: LandscapeCategory(BARREN, "barren"),
    FOREST: LandscapeCategory(FOREST, "forest"),
    OTHER: LandscapeCategory(OTHER, "other"),
}

_NAME_TO_CODE = {cat.name: cat.code for cat in REGISTRY.values()}

MAX_CODE = max(REGISTRY)


def category_code(value) -> int:
    """Resolve a category given either its integer code or its name."""
    if isinstance(value, str):
        name = value.strip().lower()
        if name in _NAME_TO_CODE:
            return _NAME_TO_CODE[name]
        if name.isdigit() and int(name) in REGISTRY:
            return int(name)
        raise InvalidArgument(f"unknown landscape category: {value!r}")
    code = int(value)
    if code not in REGISTRY:
        raise InvalidArgument(f"unknown landscape category code: {code}")
    return code


@dataclass
class SceneMap:
    """Rasterized landscape grid over a square region.

    grid[row, col] covers x in [col*cell_m, (col+1)*cell_m) and likewise for
    y, i.e. row index is the y axis. Arrays are locked read-only after
    construction so scenes can be shared freely between workers.
    """
    side_m: float
    cell_m: float
    grid: np.ndarray
    building_height_m: np.ndarray
    seed: int

    def __post_init__(self):
        n = int(round(self.side_m / self.cell_m))
        if abs(n * self.cell_m - self.side_m) > 1e-9:
            raise InvalidSpec(
                f"side_m={self.side_m} is not a multiple of cell_m={self.cell_m}")
        self.grid = np.ascontiguousarray(self.grid, dtype=np.int16)
        if self.grid.shape != (n, n):
            raise InvalidSpec(f"grid shape {self.grid.shape} != ({n}, {n})")
        self.building_height_m = np.ascontiguousarray(
            self.building_height_m, dtype=np.float64)
        if self.building_height_m.shape != (n, n):
            raise InvalidSpec("height grid shape mismatch")
        codes = np.unique(self.grid)
        for c in codes:
            if int(c) not in REGISTRY:
                raise InvalidSpec(f"grid holds unregistered category code {c}")
        is_building = self.grid == BUILDING
        if not np.array_equal(self.building_height_m > 0, is_building):
            raise InvalidSpec("building_height_m must be > 0 exactly on building cells")
        self.grid.setflags(write=False)
        self.building_height_m.setflags(write=False)

    @property
    def n_cells_side(self) -> int:
        return self.grid.shape[0]

    def category_fractions(self) -> dict[int, float]:
        """Exact per-category cell-count fractions."""
        total = self.grid.size
        counts = {}
        for code in sorted(REGISTRY):
            counts[code] = int((self.grid == code).sum()) / total
        return counts

    def categories_present(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.grid))


@dataclass(frozen=True)
class BaseStation:
    id: int
    x: float
    y: float
    z: float
    frequency_hz: float
    azimuth_deg: float | None = None  # None = omnidirectional


@dataclass(frozen=True)
class Deployment:
    layer_name: str
    stations: tuple[BaseStation, ...]
    seed: int
    preset: str = "custom"

    def __post_init__(self):
        freqs = {s.frequency_hz for s in self.stations}
        if len(freqs) > 1:
            raise InvalidSpec("all stations in a layer must share one frequency")
        ids = [s.id for s in self.stations]
        if ids != list(range(1, len(ids) + 1)):
            raise InvalidSpec("station ids must be contiguous from 1")

    @property
    def K(self) -> int:
        return len(self.stations)

    @property
    def frequency_hz(self) -> float:
        return self.stations[0].frequency_hz


@dataclass(frozen=True)
class UEDrop:
    x: float
    y: float
    true_category: int


@dataclass
class SceneSpec:
    side_m: float = 1000.0
    cell_m: float = 5.0
    category_mix: dict = field(default_factory=dict)
    seed: int = 0


#: A city-like default mix: dense blocks cut by street corridors, some
#: parkland and open ground, the rest unclassified.
LONDON_LIKE_MIX = {
    STREET: 0.22,
    BUILDING: 0.38,
    FOREST: 0.12,
    BARREN: 0.18,
}


def generate_scene(spec: SceneSpec) -> SceneMap:
    """Generate a procedural landscape map for the given mix and seed.

    Streets are connected axis-aligned corridors, buildings rectangular
    blocks with one height per block drawn from [8, 40] m, forest and barren
    are blob patches. Painting per category stops once its target cell count
    is reached, so realized fractions track the requested mix; unassigned
    cells become category 0.
    """
    mix = {category_code(k): float(v) for k, v in spec.category_mix.items()}
    if any(f < 0 for f in mix.values()):
        raise InvalidSpec("category mix fractions must be nonnegative")
    if sum(mix.values()) > 1.0 + 1e-9:
        raise InvalidSpec(f"category mix sums to {sum(mix.values()):.4f} > 1")
    n = int(round(spec.side_m / spec.cell_m))
    if n < 1 or abs(n * spec.cell_m - spec.side_m) > 1e-9:
        raise InvalidSpec(
            f"side_m={spec.side_m} is not a positive multiple of cell_m={spec.cell_m}")

    rng = np.random.default_rng(int(spec.seed))
    grid = np.full((n, n), -1, dtype=np.int32)
    heights = np.zeros((n, n), dtype=np.float64)
    total = n * n

    paint_order = [STREET, BUILDING, FOREST, BARREN, OTHER]

    for code in paint_order:
        if code not in mix or mix[code] <= 0:
            continue
        target = int(round(mix[code] * total))
        if code == STREET:
            _paint_lanes(grid, code, target, rng)
        elif code == BUILDING:
            _paint_blocks(grid, heights, code, target, rng)
        else:
            _paint_blobs(grid, code, target, rng)
        # Top up any shortfall (small grids, crowded maps) directly so the
        # realized fraction stays honest; keeps {cat: 1.0} specs exact.
        painted = int((grid == code).sum())
        if painted < target:
            free = np.flatnonzero(grid.ravel() == -1)
            take = free[:target - painted]
            grid.ravel()[take] = code
            if code == BUILDING:
                heights.ravel()[take] = rng.uniform(8.0, 40.0, take.size)

    grid[grid == -1] = OTHER
    return SceneMap(side_m=float(spec.side_m), cell_m=float(spec.cell_m),
                    grid=grid.astype(np.int16), building_height_m=heights,
                    seed=int(spec.seed))


def _paint_lanes(grid, code, target, rng):
    """Street corridors: alternating horizontal/vertical bands."""
    n = grid.shape[0]
    lane_w = max(1, int(round(n / 100.0)))  # ~2 cells (10 m) at the default raster
    rows = rng.permutation(n)
    cols = rng.permutation(n)
    ri = ci = 0
    horizontal = True
    painted = int((grid == code).sum())
    while painted < target and (ri < n or ci < n):
        take_row = (horizontal and ri < n) or ci >= n
        if take_row:
            band = grid[rows[ri]:rows[ri] + lane_w, :]
            ri += 1
        else:
            band = grid[:, cols[ci]:cols[ci] + lane_w]
            ci += 1
        free = band == -1
        band[free] = code
        painted += int(free.sum())
        horizontal = not horizontal


def _paint_blocks(grid, heights, code, target, rng):
    """Rectangular building blocks, one sampled height per block."""
    n = grid.shape[0]
    max_side = max(2, n // 12)
    max_attempts = 200 + 50 * max(1, target // 4)
    attempts = 0
    painted = 0
    while painted < target and attempts < max_attempts:
        attempts += 1
        w = int(rng.integers(2, max_side + 1))
        h = int(rng.integers(2, max_side + 1))
        r = int(rng.integers(0, max(1, n - h + 1)))
        c = int(rng.integers(0, max(1, n - w + 1)))
        block = grid[r:r + h, c:c + w]
        free = block == -1
        if not free.any():
            continue
        height = float(rng.uniform(8.0, 40.0))
        block[free] = code
        heights[r:r + h, c:c + w][free] = height
        painted += int(free.sum())


def _paint_blobs(grid, code, target, rng):
    """Roundish patches (forest, barren, other fill)."""
    n = grid.shape[0]
    max_r = max(1.5, n / 14.0)
    yy, xx = np.mgrid[0:n, 0:n]
    painted = 0
    attempts = 0
    while painted < target and attempts < 400:
        attempts += 1
        cy = rng.uniform(0, n)
        cx = rng.uniform(0, n)
        rx = rng.uniform(1.5, max_r)
        ry = rng.uniform(1.5, max_r)
        mask = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        free = mask & (grid == -1)
        grid[free] = code
        painted += int(free.sum())


def category_at(scene: SceneMap, position: Sequence[float]) -> int:
    """Category code of the raster cell containing (x, y).

    Cells are half-open intervals [x0, x0 + cell_m), so a point on a shared
    edge belongs to the higher cell and side_m itself is out of bounds.
    """
    x, y = float(position[0]), float(position[1])
    if not (0.0 <= x < scene.side_m and 0.0 <= y < scene.side_m):
        raise OutOfBounds(f"position ({x}, {y}) outside [0, {scene.side_m}) square")
    col = int(x // scene.cell_m)
    row = int(y // scene.cell_m)
    return int(scene.grid[row, col])


_PRESETS = {
    # 20 omni macro stations on the low band.
    "london-low": dict(layer_name="800MHz", k_or_sites=20,
                       frequency_hz=8.0e8, sectored=False),
    # 18 sites x 3 sectors on the high band.
    "london-high": dict(layer_name="5GHz", k_or_sites=18,
                        frequency_hz=5.0e9, sectored=True),
}

SECTOR_AZIMUTHS_DEG = (0.0, 120.0, 240.0)


@dataclass
class DeployPreset:
    layer_name: str
    k_or_sites: int
    frequency_hz: float
    sectored: bool = False
    seed: int = 0
    name: str = "custom"

    @classmethod
    def by_name(cls, name: str, seed: int = 0) -> "DeployPreset":
        if name not in _PRESETS:
            raise InvalidArgument(
                f"unknown deployment preset {name!r}; choose from {sorted(_PRESETS)}")
        return cls(seed=seed, name=name, **_PRESETS[name])


def deploy_basestations(scene: SceneMap, preset: DeployPreset) -> Deployment:
    """Place one frequency layer of base stations on a jittered lattice.

    Sectored presets place 3 co-located stations per site with boresights at
    0/120/240 degrees. Station height is rooftop + 3 m on building cells and
    25 m elsewhere (surrogate values; recorded in the deployment metadata).
    """
    if preset.k_or_sites < 1:
        raise InvalidArgument("k_or_sites must be >= 1")
    n_positions = preset.k_or_sites
    if n_positions > scene.grid.size:
        raise PlacementFailure(
            f"cannot place {n_positions} sites on {scene.grid.size} cells")

    rng = np.random.default_rng(int(preset.seed))
    rows = int(math.floor(math.sqrt(n_positions)))
    cols = int(math.ceil(n_positions / rows))
    cell_w = scene.side_m / cols
    cell_h = scene.side_m / rows

    stations = []
    sid = 1
    for idx in range(n_positions):
        r, c = divmod(idx, cols)
        x = (c + float(rng.uniform(0.25, 0.75))) * cell_w
        y = (r + float(rng.uniform(0.25, 0.75))) * cell_h
        col = int(x // scene.cell_m)
        row = int(y // scene.cell_m)
        if scene.grid[row, col] == BUILDING:
            z = float(scene.building_height_m[row, col]) + ROOFTOP_CLEARANCE_M
        else:
            z = DEFAULT_BS_HEIGHT_M
        if preset.sectored:
            for az in SECTOR_AZIMUTHS_DEG:
                stations.append(BaseStation(sid, x, y, z, preset.frequency_hz, az))
                sid += 1
        else:
            stations.append(BaseStation(sid, x, y, z, preset.frequency_hz, None))
            sid += 1
    return Deployment(layer_name=preset.layer_name, stations=tuple(stations),
                      seed=int(preset.seed), preset=preset.name)


def sample_ue_drops(scene: SceneMap, count: int, seed: int,
                    stratify_by_category: bool = False,
                    categories: Iterable[int] | None = None) -> list[UEDrop]:
    """Drop UEs at random positions, labeled by the category under each drop.

    Unstratified drops are uniform over the footprint. Stratified drops are
    uniform within each category's cells, with counts as equal as possible
    across categories (earlier codes absorb any remainder).
    """
    if count < 1:
        raise InvalidArgument("count must be >= 1")
    rng = np.random.default_rng(int(seed))
    if not stratify_by_category:
        xs = rng.uniform(0.0, scene.side_m, count)
        ys = rng.uniform(0.0, scene.side_m, count)
        cols = (xs // scene.cell_m).astype(np.int64)
        rows = (ys // scene.cell_m).astype(np.int64)
        labels = scene.grid[rows, cols]
        return [UEDrop(float(x), float(y), int(c))
                for x, y, c in zip(xs, ys, labels)]

    present = scene.categories_present()
    if categories is None:
        cats = present
    else:
        cats = sorted(category_code(c) for c in categories)
        missing = [c for c in cats if c not in present]
        if missing:
            raise MissingCategory(
                f"categories {missing} absent from scene; present: {present}")
    base = count // len(cats)
    remainder = count - base * len(cats)
    drops: list[UEDrop] = []
    for i, code in enumerate(cats):
        want = base + (1 if i < remainder else 0)
        if want == 0:
            continue
        flat = np.flatnonzero(scene.grid.ravel() == code)
        picks = rng.integers(0, flat.size, want)
        cells = flat[picks]
        rr, cc = np.divmod(cells, scene.n_cells_side)
        xs = (cc + rng.uniform(0.0, 1.0, want)) * scene.cell_m
        ys = (rr + rng.uniform(0.0, 1.0, want)) * scene.cell_m
        drops.extend(UEDrop(float(x), float(y), code) for x, y in zip(xs, ys))
    return drops


def _rle_encode(values: np.ndarray) -> list[list]:
    flat = values.ravel()
    if flat.size == 0:
        return []
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], changes))
    ends = np.concatenate((changes, [flat.size]))
    out = []
    for s, e in zip(starts, ends):
        v = flat[s]
        out.append([int(v) if np.issubdtype(flat.dtype, np.integer) else float(v),
                    int(e - s)])
    return out


def _rle_decode(runs: list, size: int, dtype) -> np.ndarray:
    out = np.empty(size, dtype=dtype)
    pos = 0
    for value, length in runs:
        out[pos:pos + length] = value
        pos += length
    if pos != size:
        raise InvalidSpec(f"run-length data covers {pos} of {size} cells")
    return out


def scene_to_dict(scene: SceneMap) -> dict:
    return {
        "format": SCENE_FORMAT,
        "side_m": scene.side_m,
        "cell_m": scene.cell_m,
        "seed": scene.seed,
        "category_registry": {str(c.code): c.name for c in REGISTRY.values()},
        "grid_rle": _rle_encode(scene.grid),
        "height_rle": _rle_encode(scene.building_height_m),
        "category_fractions": {str(k): v for k, v in scene.category_fractions().items()},
    }


def scene_from_dict(doc: dict) -> SceneMap:
    if doc.get("format") != SCENE_FORMAT:
        raise InvalidSpec(f"unsupported scene format: {doc.get('format')!r}")
    n = int(round(doc["side_m"] / doc["cell_m"]))
    grid = _rle_decode(doc["grid_rle"], n * n, np.int16).reshape(n, n)
    heights = _rle_decode(doc["height_rle"], n * n, np.float64).reshape(n, n)
    return SceneMap(side_m=float(doc["side_m"]), cell_m=float(doc["cell_m"]),
                    grid=grid, building_height_m=heights, seed=int(doc["seed"]))


def deployment_to_dict(dep: Deployment) -> dict:
    return {
        "format": DEPLOYMENT_FORMAT,
        "layer_name": dep.layer_name,
        "preset": dep.preset,
        "seed": dep.seed,
        "K": dep.K,
        "frequency_hz": dep.frequency_hz,
        "height_note": "synthetic preset heights, not calibrated to any real network",
        "stations": [
            {"id": s.id, "x": s.x, "y": s.y, "z": s.z,
             "frequency_hz": s.frequency_hz, "azimuth_deg": s.azimuth_deg}
            for s in dep.stations
        ],
    }


def deployment_from_dict(doc: dict) -> Deployment:
    if doc.get("format") != DEPLOYMENT_FORMAT:
        raise InvalidSpec(f"unsupported deployment format: {doc.get('format')!r}")
    stations = tuple(
        BaseStation(int(s["id"]), float(s["x"]), float(s["y"]), float(s["z"]),
                    float(s["frequency_hz"]),
                    None if s.get("azimuth_deg") is None else float(s["azimuth_deg"]))
        for s in doc["stations"]
    )
    return Deployment(layer_name=doc["layer_name"], stations=stations,
                      seed=int(doc.get("seed", 0)),
                      preset=doc.get("preset", "custom"))


def save_scene(scene: SceneMap, path, extra_meta: dict | None = None) -> None:
    doc = scene_to_dict(scene)
    if extra_meta:
        doc["provenance"] = extra_meta
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_scene(path) -> SceneMap:
    with open(path, encoding="utf-8") as fh:
        return scene_from_dict(json.load(fh))


def save_deployment(dep: Deployment, path, extra_meta: dict | None = None) -> None:
    doc = deployment_to_dict(dep)
    if extra_meta:
        doc["provenance"] = extra_meta
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_deployment(path) -> Deployment:
    with open(path, encoding="utf-8") as fh:
        return deployment_from_dict(json.load(fh))
