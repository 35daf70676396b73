import numpy as np
import pytest

from ckmplace.ckm import BuildingScene, GridCkm, generate_synthetic_ckm, random_building_scene
from ckmplace.geometry import Area
from ckmplace.network import NetworkScene, dbm_to_watt


def flat_map(area: Area, gain_db: float, spacing: float = 5.0) -> GridCkm:
    nx = int(round(area.width / spacing)) + 1
    ny = int(round(area.height / spacing)) + 1
    return GridCkm((area.xmin, area.ymin), spacing, np.full((nx, ny), gain_db))


def city_scene(seed: int, K: int = 2, area: Area = Area(-100, 100, -100, 100), power_dbm=30.0):
    """Random building scene with K GBSs and their synthetic maps."""
    rng = np.random.default_rng(seed)
    bs = random_building_scene(rng, area, int(rng.integers(3, 9)))
    gbs = area.sample(rng, K)
    maps = [generate_synthetic_ckm(bs, [*w, 2.0], 50.0, 5.0) for w in gbs]
    return NetworkScene(gbs, maps, dbm_to_watt(power_dbm), dbm_to_watt(-100.0), 1.0, area)


@pytest.fixture
def small_area():
    return Area(0.0, 40.0, 0.0, 40.0)


@pytest.fixture
def empty_scene(small_area):
    return BuildingScene(small_area)
