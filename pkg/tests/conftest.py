import math

import pytest

from delaysde.measure import SignedMeasure
from delaysde.spectral import CharacteristicModel


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


_criteria: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _criteria[num] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, status = _criteria[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}")


@pytest.fixture
def oscillatory():
    """a = delta_{-1}, theta = -pi/2: simple roots at +-i pi/2."""
    return CharacteristicModel(SignedMeasure.dirac(-1.0, 1.0), -math.pi / 2)


@pytest.fixture
def double_root():
    """a = delta_{-1}, theta = -1/e: double root at -1."""
    return CharacteristicModel(SignedMeasure.dirac(-1.0, 1.0), -math.exp(-1.0))


@pytest.fixture
def two_atoms():
    """Mass-one measure used by the Monte Carlo checks."""
    return CharacteristicModel(SignedMeasure(r=1.0, atoms=[(0.0, 0.6), (-1.0, 0.4)]), 0.0)


def resonant_model(phi: float = 1.0) -> CharacteristicModel:
    """Atoms at 0, -1, -2, -3 tuned (theta = 1) so that +-i*phi is a double root.

    h(i phi) = 0 and h'(i phi) = 0 are four real linear equations in the four
    weights.  For phi = 1 the model is unstable with m* = 1.
    """
    import numpy as np

    e = [complex(math.cos(phi * k), -math.sin(phi * k)) for k in range(4)]
    A = np.array([[z.real for z in e], [z.imag for z in e],
                  [-k * z.real for k, z in enumerate(e)], [-k * z.imag for k, z in enumerate(e)]])
    w = np.linalg.solve(A, [0.0, phi, 1.0, 0.0])
    return CharacteristicModel(SignedMeasure(r=3.0, atoms=[(-float(k), float(w[k])) for k in range(4)]), 1.0)


def model_suite() -> dict:
    """Five models covering atoms, densities, both signs of theta and a double root."""
    return {
        "oscillatory": CharacteristicModel(SignedMeasure.dirac(-1.0), -math.pi / 2),
        "two-atoms": CharacteristicModel(SignedMeasure(r=1.0, atoms=[(0.0, 0.6), (-1.0, 0.4)]), -2.0),
        "uniform": CharacteristicModel(SignedMeasure.uniform(-1.0, 0.0), -3.0),
        "mixed": CharacteristicModel(SignedMeasure(r=1.5, atoms=[(0.0, 1.0)],
                                                   density=[(-1.5, -0.5, (1.0, 1.0))]), 1.5),
        "double": CharacteristicModel(SignedMeasure.dirac(-1.0), -math.exp(-1.0)),
    }


@pytest.fixture
def resonant():
    return resonant_model(1.0)
