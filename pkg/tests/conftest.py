import numpy as np
import pytest

from plumetrace import CovModel, PlumeParams, build_grid, delta_profile, reference_layout


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        name, outcome = RESULTS[num]
        terminalreporter.write_line(f"ACCEPTANCE {num:02d} [{name}]: {outcome}")


@pytest.fixture
def layout():
    return reference_layout()


@pytest.fixture
def small_layout():
    return reference_layout(n=60, d=3)


@pytest.fixture
def identity_cov(layout):
    return CovModel("diagonal", np.ones(layout.d), "known")


@pytest.fixture
def direction(layout):
    return delta_profile(layout.d)


@pytest.fixture
def fixed_angle_grid(layout):
    return build_grid((-1.0, 1.0, 0.5), (-2.0, 0.0, 0.5), [20.0], layout)


@pytest.fixture
def truth():
    return PlumeParams(x=0.0, y=0.0, angle=20.0)
