"""Shared fixtures and closed-form oracles."""
from __future__ import annotations

import numpy as np
import pytest

from toalab.repspace import SpatialGrid, WaveFunction

_ACCEPTANCE: list[str] = []


def gaussian_x(x, a, sigma, p0, t=0.0):
    """Freely evolved normalized Gaussian packet, closed form."""
    c = 1 + 1j * t / (2 * sigma * sigma)
    return ((2 * np.pi * sigma * sigma) ** -0.25 / np.sqrt(c)
            * np.exp(-((x - a - p0 * t) ** 2) / (4 * sigma * sigma * c)
                     + 1j * p0 * x - 0.5j * p0 * p0 * t))


def gaussian_p(p, a, sigma, p0):
    """Momentum amplitude of the t = 0 packet above."""
    return ((2 * sigma * sigma / np.pi) ** 0.25 * np.exp(-sigma * sigma * (p - p0) ** 2)
            * np.exp(-1j * (p - p0) * a))


@pytest.fixture(scope="session")
def grid():
    return SpatialGrid()


@pytest.fixture(scope="session")
def small_grid():
    return SpatialGrid(n=1024, x_min=-40.0, dx=80.0 / 1024)


@pytest.fixture
def make_gauss():
    def build(g, a=-10.0, sigma=1.0, p0=3.0):
        return WaveFunction(g, "position", gaussian_x(g.x, a, sigma, p0))
    return build


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
