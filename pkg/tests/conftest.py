import pytest

from rwdelab.envs.boolean import BooleanConfig, RadiusLaw
from rwdelab.envs.renewal import InterarrivalLaw, RenewalConfig


@pytest.fixture(scope="session")
def geom_half():
    return InterarrivalLaw.geometric(0.5, moment_order=5.0)


@pytest.fixture(scope="session")
def renewal_small(geom_half):
    """Small-window renewal config for cheap unit tests."""
    return RenewalConfig(mu=geom_half, trunc_s=8)


@pytest.fixture(scope="session")
def boolean_small():
    """Light Boolean config with a coherent radius cap (trunc >= 2 rho_max)."""
    return BooleanConfig(d=1, cone_slope=1, lam=0.1,
                         radius_law=RadiusLaw.pareto(1.0, 4.0),
                         trunc_s=16, rho_max=8.0)
