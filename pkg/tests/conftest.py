import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from calmedns.model import ModelParams, preset_field  # noqa: E402
from calmedns.spectral import WaveGrid, sobolev_norm  # noqa: E402


@pytest.fixture(scope="session")
def grid8():
    return WaveGrid(8)


@pytest.fixture(scope="session")
def grid16():
    return WaveGrid(16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unit_h(grid, name="taylor_green"):
    h = preset_field(grid, name)
    return h * (1.0 / float(sobolev_norm(h, 1.0)))


@pytest.fixture(scope="session")
def tg_model16(grid16):
    """nu = 1, Z1 with eps = 2, Taylor-Green h with ||grad h|| = 1, no forcing."""
    return ModelParams(grid=grid16, h=unit_h(grid16))


@pytest.fixture(scope="session")
def tg_model8(grid8):
    return ModelParams(grid=grid8, h=unit_h(grid8))
