import numpy as np
import pytest

from distimator.bellvec import NoiseModel, PartyNoise


def random_party(rng, scale=1.0):
    return PartyNoise(
        lam=rng.uniform(0, 0.3 * scale),
        zeta=rng.uniform(0, 0.2 * scale),
        m=rng.uniform(0, 0.1 * scale),
        y=rng.uniform(0, 0.1 * scale),
        eta_z=rng.uniform(1 - 0.2 * scale, 1),
        eta_x=rng.uniform(1 - 0.2 * scale, 1),
    )


def random_model(rng, scale=1.0):
    """A validated noise model with every channel switched on."""
    return NoiseModel(
        random_party(rng, scale),
        random_party(rng, scale),
        *rng.uniform(0.5, 5.0, size=4),
    )


def random_bell(rng, size=None):
    return rng.dirichlet(np.ones(4), size=size)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


# --- acceptance summary ------------------------------------------------------

_acceptance = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        _acceptance[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda n: int(n.split("_")[2])):
        status, detail = _acceptance[name]
        terminalreporter.write_line(f"{status}  {name}  {detail}")
