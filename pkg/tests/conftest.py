import numpy as np
import pytest

from rtinverse.geometry import DiscDomain, boundary_grid
from rtinverse.fields import make_sigma, make_phantom, make_hg_kernel
from rtinverse.transport import TransportConfig


@pytest.fixture(scope="session")
def disc():
    return DiscDomain()


@pytest.fixture(scope="session")
def tcfg_small():
    # coarse ray step keeps unit tests fast; accuracy-sensitive tests
    # override locally
    return TransportConfig(ray_step=1.0 / 128)


@pytest.fixture(scope="session")
def sigma_small(disc):
    return make_sigma(disc, 49, 24, kind="constant", params={"value": 0.5})


@pytest.fixture(scope="session")
def sigma_zero_small(disc):
    return make_sigma(disc, 49, 24, kind="zero")


@pytest.fixture(scope="session")
def grid_small(disc):
    return boundary_grid(disc, n_beta=128, n_alpha=24, on="omega1")


@pytest.fixture(scope="session")
def kernel_iso():
    return make_hg_kernel(g=0.0, albedo_scale=0.3, n_modes=1)


@pytest.fixture(scope="session")
def phantom_small(disc):
    return make_phantom(disc, 49, kind="gaussian",
                        params={"center": (0.2, -0.1), "width": 0.3, "amp": 1.0})


ACCEPTANCE_REPORT = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)
