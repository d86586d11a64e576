import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustgates.model import (
    NUMBER,
    SIGMA_X,
    ControlSample,
    ErrorPoint,
    TransmonParams,
    build_hamiltonian,
    default_transmon,
    hamiltonian_batch,
    ladder_operators,
    mhz,
    to_mhz,
    tphi_from_t2star,
)

finite = st.floats(-1e9, 1e9, allow_nan=False)


def test_sigma_x_elements():
    sx, _, _, _ = ladder_operators()
    assert sx[0, 1] == 1
    assert np.isclose(sx[1, 2], np.sqrt(2))
    assert np.all(np.diag(sx) == 0)


def test_sigma_y_pattern():
    _, sy, _, _ = ladder_operators()
    assert sy[1, 0] == 1j
    assert sy[0, 1] == -1j
    assert np.isclose(sy[2, 1], 1j * np.sqrt(2))
    assert np.allclose(sy, sy.conj().T)


def test_number_and_leakage():
    _, _, n, leak = ladder_operators()
    assert np.array_equal(n, np.diag([0, 1, 2]))
    assert np.array_equal(leak, np.diag([0, 0, 1]))


def test_module_operators_are_read_only():
    with pytest.raises(ValueError):
        SIGMA_X[0, 0] = 1.0
    copy = ladder_operators()[0]
    copy[0, 0] = 5.0
    assert SIGMA_X[0, 0] == 0


def test_drive_free_hamiltonian_is_anharmonic_diag(params):
    h = build_hamiltonian(params, ErrorPoint(), ControlSample(0.0, 0.0))
    assert np.allclose(h, np.diag([0, 0, params.anharmonicity_alpha]))


def test_measured_anharmonicity():
    p = default_transmon()
    h = build_hamiltonian(p, ErrorPoint(), ControlSample(0.0, 0.0))
    assert np.isclose(h[2, 2].real, -2 * np.pi * 295.1e6)


@pytest.mark.parametrize("delta_mhz", [-1.0, 0.3, 2.5])
def test_detuning_enters_as_number_operator(params, delta_mhz):
    h = build_hamiltonian(params, ErrorPoint.from_mhz(delta_mhz), ControlSample(0.0, 0.0))
    assert np.allclose(np.diag(h).real, [0, mhz(delta_mhz), 2 * mhz(delta_mhz) + params.anharmonicity_alpha])


def test_hermitian_random_draws(params, rng):
    for _ in range(1000):
        d, g, ox, oy = rng.normal(scale=1e8, size=4)
        h = build_hamiltonian(params, ErrorPoint(d, g), ControlSample(ox, oy))
        assert np.linalg.norm(h - h.conj().T) <= 1e-12 * np.linalg.norm(h)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, finite, finite, finite)
def test_linear_in_controls(d, g, x1, y1, x2, y2):
    p = default_transmon(False)
    err = ErrorPoint(d, g)
    h0 = build_hamiltonian(p, err, ControlSample(0, 0))
    h1 = build_hamiltonian(p, err, ControlSample(x1, y1)) - h0
    h2 = build_hamiltonian(p, err, ControlSample(x2, y2)) - h0
    h12 = build_hamiltonian(p, err, ControlSample(x1 + x2, y1 + y2)) - h0
    scale = max(np.linalg.norm(h12), np.linalg.norm(h1) + np.linalg.norm(h2), 1.0)
    assert np.linalg.norm(h12 - h1 - h2) <= 1e-12 * scale


def test_gamma_minus_omega0_kills_drive(params):
    err = ErrorPoint(mhz(0.2), -params.rabi_max_omega0)
    h = build_hamiltonian(params, err, ControlSample(3e7, -2e7))
    h0 = build_hamiltonian(params, err, ControlSample(0, 0))
    assert np.array_equal(h, h0)


def test_batch_matches_single(params, rng):
    deltas = rng.normal(scale=1e6, size=3)
    gammas = rng.normal(scale=1e6, size=3)
    ox, oy = rng.normal(scale=5e7, size=(2, 4))
    hb = hamiltonian_batch(params, deltas, gammas, ox, oy)
    assert hb.shape == (3, 4, 3, 3)
    for m in range(3):
        for n in range(4):
            h = build_hamiltonian(params, ErrorPoint(deltas[m], gammas[m]), ControlSample(ox[n], oy[n]))
            assert np.allclose(hb[m, n], h, rtol=0, atol=1e-6)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_rejects_nonpositive_omega0(bad):
    with pytest.raises(ValueError):
        TransmonParams(mhz(-300), bad)


@pytest.mark.parametrize("field", ["t1", "tphi"])
def test_rejects_nonpositive_coherence(field):
    kw = {field: -1e-6}
    with pytest.raises(ValueError):
        TransmonParams(mhz(-300), mhz(20), **kw)


@pytest.mark.parametrize("value", [math.nan, math.inf])
def test_error_point_must_be_finite(value):
    with pytest.raises(ValueError):
        ErrorPoint(value, 0.0)
    with pytest.raises(ValueError):
        ControlSample(0.0, value)


def test_infinite_coherence_means_zero_rate():
    p = TransmonParams(mhz(-300), mhz(20), math.inf, math.inf)
    assert p.gamma_1 == 0 and p.gamma_phi == 0


def test_missing_coherence_raises(params):
    with pytest.raises(ValueError):
        params.gamma_1


def test_tphi_from_measured_t2star():
    # 1/Tphi = 1/T2* - 1/(2 T1)
    tphi = tphi_from_t2star(16.81e-6, 45.5e-6)
    assert np.isclose(1 / tphi, 1 / 16.81e-6 - 1 / 91e-6)
    assert tphi_from_t2star(2e-6, 1e-6) == math.inf
    with pytest.raises(ValueError):
        tphi_from_t2star(3e-6, 1e-6)


@settings(max_examples=100)
@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_unit_round_trip(f):
    assert math.isclose(to_mhz(mhz(f)), f, rel_tol=1e-12, abs_tol=1e-12)


def test_from_mhz_converts():
    p = TransmonParams.from_mhz(-295.1, 17.7, 45.5, 20.0)
    assert np.isclose(p.rabi_max_omega0, 2 * np.pi * 17.7e6)
    assert np.isclose(p.t1, 45.5e-6)
