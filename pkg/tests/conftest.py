import numpy as np
import pytest

from hydrofix.raster import Grid, make_grid


@pytest.fixture
def rng_np():
    return np.random.default_rng(20240911)


def random_grid(rng, h=16, w=16, cell_size=1.0, origin=(0.0, 0.0)) -> Grid:
    return make_grid(rng.random((h, w)).astype(np.float32) * 10.0,
                     cell_size=cell_size, origin=origin)
