import math

import numpy as np
import pytest

from shrinker_spectra import geometry as geo
from shrinker_spectra.discretization import build_space
from shrinker_spectra.operator import assemble_pair
from shrinker_spectra.spectrum import solve_spectrum


class Problem:
    """A built space, its operator pair and the lowest eigenpairs."""

    def __init__(self, geometry, resolution, r=0, tensor="newton", bc="closed", count=12):
        self.geometry = geometry
        self.space = build_space(geometry, resolution, r)
        self.pair = assemble_pair(self.space, tensor, bc)
        self.spectrum = solve_spectrum(self.pair, count)


@pytest.fixture(scope="session")
def circle256():
    return Problem(geo.circle(), 256, count=12)


@pytest.fixture(scope="session")
def sphere16():
    return Problem(geo.sphere(2), 16, count=12)


@pytest.fixture(scope="session")
def cap32():
    return Problem(geo.spherical_cap(math.pi / 3), 32, bc="dirichlet", count=12)


@pytest.fixture(scope="session")
def cap16():
    return Problem(geo.spherical_cap(math.pi / 3), 16, bc="dirichlet", count=12)


@pytest.fixture(scope="session")
def disk_aniso():
    return Problem(geo.flat_disk(weight="gaussian"), 24, tensor=np.diag([2.0, 1.0]), bc="dirichlet", count=10)


@pytest.fixture(scope="session")
def disk_identity():
    return Problem(geo.flat_disk(weight="gaussian"), 16, tensor="identity", bc="dirichlet", count=8)


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "ran": 0})
    entry["ran"] += 1
    if call.excinfo is not None:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if e['passed'] else 'FAIL'}  {e['title']}")
