import numpy as np
import pytest

from gridhop.model import SceneGeometry, WaveformConfig


@pytest.fixture
def small_cfg():
    return WaveformConfig(Mc=16, Ms=32)


@pytest.fixture
def geom3():
    return SceneGeometry((0.0, 0.0), [(-12.0, 8.0), (12.0, 10.0), (0.0, 26.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, title = marker.args
    _ACCEPTANCE[number] = (title, report.passed, dict(report.user_properties))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, props = _ACCEPTANCE[number]
        detail = ", ".join(f"{k}={v}" for k, v in props.items())
        terminalreporter.write_line(f"A{number} {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else ""))
