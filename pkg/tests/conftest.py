import numpy as np
import pytest

from dmsoliton.energy import Problem
from dmsoliton.field import LatticeField
from dmsoliton.profile import (DiffractionMeasure, NonlinearitySpec,
                               PiecewiseProfile, measure_from_profile)


def pytest_terminal_summary(terminalreporter):
    """One visible pass/fail line per acceptance criterion, in order."""
    try:
        from tests.test_acceptance import _LINES
    except ImportError:
        return
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, text in sorted(_LINES):
            terminalreporter.write_line(text)


@pytest.fixture(scope="session")
def model_measure():
    return measure_from_profile(PiecewiseProfile.model_case(), 32)


@pytest.fixture(scope="session")
def kerr():
    return NonlinearitySpec.kerr()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_complex_field(rng, box_radius, nu=0.4, scale=1.0):
    x = np.abs(np.arange(-box_radius, box_radius + 1))
    env = np.exp(-nu * x)
    vals = scale * (rng.standard_normal(2 * box_radius + 1)
                    + 1j * rng.standard_normal(2 * box_radius + 1)) * env
    return LatticeField(box_radius, vals)


@pytest.fixture(scope="session")
def model_problem(model_measure, kerr):
    return Problem(1.0, model_measure, kerr, 4.0)


@pytest.fixture(scope="session")
def dirac_kerr():
    return Problem(0.0, DiffractionMeasure.dirac(), NonlinearitySpec.kerr(), 2.0)
