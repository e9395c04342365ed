import numpy as np
import pytest

from radarcal.datacube import RadarConfig, RadarCube

_acceptance_results = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = _acceptance_markers.get(report.nodeid)
    if marker is None:
        return
    number, title = marker
    passed, _ = _acceptance_results.get(number, (True, title))
    _acceptance_results[number] = (passed and report.passed, title)


_acceptance_markers = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _acceptance_markers[item.nodeid] = m.args


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance_results):
        passed, title = _acceptance_results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_cube(rng):
    cfg = RadarConfig(num_antennas=2, num_chirps=3, num_samples=8)
    shape = (5, 2, 3, 8)
    # float32-representable so file round-trips are exact
    re = rng.standard_normal(shape).astype(np.float32)
    im = rng.standard_normal(shape).astype(np.float32)
    return RadarCube(cfg, re.astype(np.float64) + 1j * im.astype(np.float64))
