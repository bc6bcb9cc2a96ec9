import numpy as np
import pytest

from antenna_heom.bath import BathConfig, SpectralDensityParams
from antenna_heom.network import NetworkSpec, build_operators, eigenanalyze


@pytest.fixture(scope="session")
def ops():
    return build_operators(NetworkSpec())


@pytest.fixture(scope="session")
def eig(ops):
    return eigenanalyze(ops)


@pytest.fixture(scope="session")
def classical_bath():
    return BathConfig(SpectralDensityParams.classical(), 298.0, 1)


@pytest.fixture(scope="session")
def quantum_bath():
    return BathConfig(SpectralDensityParams.quantum(), 0.01, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density_matrix(rng, dim=8):
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


#: (name, passed, detail) lines collected by the acceptance checks
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
