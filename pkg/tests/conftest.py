import numpy as np
import pytest

from lensbellman.geometry import ConvexBody, LensDomain

CHEESE_RADIUS = np.sqrt(3.0) / 4.0 - 1.0 / 239.0
CHANNEL_RADIUS = 1.0 / 2.9


@pytest.fixture(scope="session")
def unit_disk():
    return ConvexBody.disk((0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def disk_lens(unit_disk):
    """Unit disk minus the disk of radius 0.4 at the origin."""
    return LensDomain(unit_disk, ConvexBody.disk((0.0, 0.0), 0.4))


@pytest.fixture(scope="session")
def half_disk_lens(unit_disk):
    return LensDomain(unit_disk, ConvexBody.disk((0.0, 0.0), 0.5))


@pytest.fixture(scope="session")
def channel_lens(unit_disk):
    holes = [ConvexBody.disk((-0.5, 0.0), CHANNEL_RADIUS),
             ConvexBody.disk((0.5, 0.0), CHANNEL_RADIUS)]
    return LensDomain(unit_disk, holes)


@pytest.fixture(scope="session")
def cheese_lens(unit_disk):
    holes = [ConvexBody.disk((0.5 * np.cos(2 * np.pi * j / 3),
                              0.5 * np.sin(2 * np.pi * j / 3)), CHEESE_RADIUS)
             for j in range(3)]
    return LensDomain(unit_disk, holes)


@pytest.fixture(scope="session")
def sphere_bmo_lens(unit_disk):
    """Planar sphere-oscillation lens at eps = 0.5."""
    return LensDomain(unit_disk, ConvexBody.disk((0.0, 0.0), np.sqrt(0.75)))


@pytest.fixture(scope="session")
def bmo_lens():
    outer = ConvexBody.paraboloid(2, 1.0, 0.0)
    hole = ConvexBody.paraboloid(2, 1.0, 1.0)
    return LensDomain(outer, hole)


@pytest.fixture(scope="session")
def a2_lens():
    return LensDomain(ConvexBody.hyperbola(1.0), ConvexBody.hyperbola(4.0))
