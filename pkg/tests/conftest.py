import sys

import numpy as np
import pytest
from hypothesis import settings

from momentlyap import build_model
from momentlyap.rng import RngPolicy

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

CATALOG_SPECS = [
    {"model": "ou_quadratic", "a": 1.0, "sigma": 1.0},
    {"model": "ou_linear_degenerate", "a": 1.0, "sigma": 1.0},
    {"model": "pitchfork_q2", "a": 0.0, "b": 1.0, "sigma": 1.0},
    {"model": "pitchfork_q4", "a": 0.5, "b": 1.0, "sigma": 1.0},
    {"model": "pitchfork_corr", "a": 0.0, "b": 1.0, "sigma": 1.0, "rho": 0.5},
    {"model": "linear2d_projected", "sigma": 1.0},
]


@pytest.fixture
def ou():
    return build_model({"model": "ou_quadratic", "a": 1.0, "sigma": 1.0})


@pytest.fixture
def degenerate():
    return build_model({"model": "ou_linear_degenerate", "a": 1.0, "sigma": 1.0})


@pytest.fixture
def pitchfork():
    return build_model({"model": "pitchfork_q2", "a": 0.0, "b": 1.0, "sigma": 1.0})


@pytest.fixture
def policy():
    return RngPolicy(12345)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in mod.REPORT:
            terminalreporter.write_line(line)
