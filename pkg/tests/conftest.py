import math

import numpy as np
import pytest

from robustgates.model import US, default_transmon
from robustgates.pulses import builtin_pulse, default_drag_beta, drag_for_rotation


@pytest.fixture(scope="session")
def params():
    """Device parameters without coherence times (unitary work)."""
    return default_transmon(with_coherence=False)


@pytest.fixture(scope="session")
def noisy_params():
    return default_transmon()


@pytest.fixture(scope="session")
def t1_only_params(params):
    return params.with_coherence(45.5 * US, math.inf)


@pytest.fixture(scope="session")
def frog():
    return builtin_pulse("FROG")


@pytest.fixture(scope="session")
def arog():
    return builtin_pulse("AROG")


@pytest.fixture(scope="session")
def drag(params):
    return drag_for_rotation(128e-9, beta=default_drag_beta(params.anharmonicity_alpha))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(rng, scale=1.0):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    return scale * (a + a.conj().T) / 2


# criterion number -> list of (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[num]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {num:>2}: {verdict}  " + "; ".join(d for _, d in parts))
