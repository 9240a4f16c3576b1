import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sambe_floquet import models
from sambe_floquet.spectral import oracle_spectrum

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_hermitian(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2


@pytest.fixture(scope="session")
def rabi():
    return models.rabi()


@pytest.fixture(scope="session")
def static():
    return models.static_sz()


@pytest.fixture(scope="session")
def circ():
    return models.circular_drive()


@pytest.fixture(scope="session")
def decay():
    return models.decaying_drive()


@pytest.fixture(scope="session")
def rabi_oracle(rabi):
    return oracle_spectrum(rabi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when == "teardown":
        return
    n, title = mark.args
    if rep.when == "call" or rep.failed:
        _ACCEPTANCE[n] = (title, rep.passed, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok, dt = _ACCEPTANCE[n]
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({dt:.1f} s)")
