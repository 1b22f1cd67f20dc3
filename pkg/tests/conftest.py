import numpy as np
import pytest

from rectex.network import AffineUnit, ReluNetwork, ThresholdNetwork


def random_relu(rng, n1, n2, d, scale=1.0):
    unit = lambda: AffineUnit(scale * rng.normal(size=d), scale * rng.normal())
    return ReluNetwork(d, [unit() for _ in range(n1)], [unit() for _ in range(n2)], rng.normal())


def random_threshold2(rng, m, d):
    units = [AffineUnit(rng.normal(size=d), rng.normal()) for _ in range(m)]
    return ThresholdNetwork.from_units(units, rng.normal(size=m), rng.normal(), d)


def running_example(w0=0.0):
    """Shape of the three-unit example: P = {1}, N = {2, 3}, all in two dimensions."""
    return ReluNetwork(
        2,
        [AffineUnit([1.0, 0.5], 0.2)],
        [AffineUnit([-0.3, 1.0], -0.1), AffineUnit([0.7, -0.4], 0.5)],
        w0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20160614)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
