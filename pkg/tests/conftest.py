import numpy as np
import pytest

from landsense.scene import (LONDON_LIKE_MIX, BARREN, BUILDING, FOREST, STREET,
                             DeployPreset, SceneMap, SceneSpec,
                             deploy_basestations, generate_scene)


@pytest.fixture(scope="session")
def city_scene():
    """Mixed 1 km scene shared by read-only tests."""
    return generate_scene(SceneSpec(side_m=1000, cell_m=5,
                                    category_mix=LONDON_LIKE_MIX, seed=1))


@pytest.fixture(scope="session")
def small_scene():
    """Small mixed scene for cheap end-to-end runs."""
    return generate_scene(SceneSpec(
        side_m=300, cell_m=5,
        category_mix={STREET: 0.25, BUILDING: 0.3, FOREST: 0.2, BARREN: 0.15},
        seed=7))


@pytest.fixture(scope="session")
def high_layer(small_scene):
    return deploy_basestations(small_scene, DeployPreset.by_name("london-high", seed=2))


@pytest.fixture(scope="session")
def low_layer(small_scene):
    return deploy_basestations(small_scene, DeployPreset.by_name("london-low", seed=2))


def uniform_scene(code: int, side_m=100.0, cell_m=5.0, height=12.0) -> SceneMap:
    """Single-category scene; buildings get a constant height."""
    n = int(round(side_m / cell_m))
    grid = np.full((n, n), code, dtype=np.int16)
    heights = np.full((n, n), height if code == BUILDING else 0.0)
    return SceneMap(side_m=side_m, cell_m=cell_m, grid=grid,
                    building_height_m=heights, seed=0)
