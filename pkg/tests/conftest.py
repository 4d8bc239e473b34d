import numpy as np
import pytest

from calderon.faddeev import default_lambda_grid, scattering_grid
from calderon.forward import dtn_schrodinger
from calderon.phantom import make_radial_bump, potential_from_conductivity


@pytest.fixture(scope="session")
def bump():
    return make_radial_bump(0.5, 0j, 0.5)


@pytest.fixture(scope="session")
def bump_v(bump):
    return potential_from_conductivity(bump)


@pytest.fixture(scope="session")
def bump_h(bump_v):
    """h on the default 64² λ-grid, |λ| ≤ 8."""
    return scattering_grid(bump_v, default_lambda_grid(8.0, 64))


@pytest.fixture(scope="session")
def phi_bump(bump_v):
    return dtn_schrodinger(bump_v, 16)


@pytest.fixture(scope="session")
def phi_zero():
    return dtn_schrodinger(None, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def bump_h80_timed(bump_v):
    """(h, seconds): the bump on a 512² λ-grid truncated at |λ| ≤ 80 (radial path)."""
    import time

    from calderon.grid import GridSpec

    t0 = time.perf_counter()
    h = scattering_grid(bump_v, GridSpec(0j, 82.0, 512, True), lambda_max=80.0,
                        radial_step=0.2)
    return h, time.perf_counter() - t0


@pytest.fixture(scope="session")
def bump_h80(bump_h80_timed):
    return bump_h80_timed[0]
