"""Time evolution: piecewise-constant propagators, gate error, Lindblad channel."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .model import NUMBER, SIGMA_X, ErrorPoint, TransmonParams, hamiltonian_batch
from .pulses import SampledPulse

QUBIT_PROJ = np.diag([1.0, 1.0, 0.0]).astype(complex)

# X_{pi/2} on the qubit, identity on |2>.
X_PI2 = np.array(
    [[1, -1j, 0], [-1j, 1, 0], [0, 0, np.sqrt(2)]], dtype=complex
) / np.sqrt(2)

LOWERING_01 = np.zeros((3, 3), dtype=complex)
LOWERING_01[0, 1] = 1.0
EXCITED_01 = np.diag([0.0, 1.0, 0.0]).astype(complex)


def rotation_about_axis(angle, phi=0.0):
    """Qubit rotation by ``angle`` about the equatorial axis at azimuth ``phi``,
    embedded with identity on |2>."""
    u = np.eye(3, dtype=complex)
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    u[0, 0] = u[1, 1] = c
    u[0, 1] = -1j * s * np.exp(-1j * phi)
    u[1, 0] = -1j * s * np.exp(1j * phi)
    return u


def frame_rotation(phi):
    """``exp(i phi n)``: conjugating by it shifts the drive phase by ``phi``
    and acts as a virtual Z rotation on the qubit."""
    return np.diag(np.exp(1j * phi * np.arange(3)))


def is_unitary(u, tol=1e-10):
    u = np.asarray(u)
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[-1])) < tol


def expm_hermitian(h, dt):
    """``exp(-i h dt)`` for a stack of Hermitian matrices via ``eigh``."""
    w, v = np.linalg.eigh(h)
    phase = np.exp(-1j * w * dt)
    return (v * phase[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def step_propagator(h, dt):
    """Exact single-step propagator ``exp(-i H dt)`` of a Hermitian 3x3 ``H``."""
    h = np.asarray(h, dtype=complex)
    if not dt > 0:
        raise ValueError("dt must be > 0")
    scale = max(np.linalg.norm(h), 1.0)
    if np.linalg.norm(h - h.conj().T) > 1e-12 * scale:
        raise ValueError("Hamiltonian is not Hermitian")
    return expm_hermitian(h, dt)


def _sequential_products(props):
    """Left-partial products ``U_n = P_n ... P_1`` along axis -3."""
    out = np.empty_like(props)
    acc = props[..., 0, :, :]
    out[..., 0, :, :] = acc
    for n in range(1, props.shape[-3]):
        acc = props[..., n, :, :] @ acc
        out[..., n, :, :] = acc
    return out


def ensemble_propagators(sampled: SampledPulse, params: TransmonParams, deltas, gammas):
    """Hamiltonians, step propagators and forward products for many error points.

    Returns ``(H, P, U)``, each of shape ``(M, N, 3, 3)``.
    """
    h = hamiltonian_batch(params, deltas, gammas, sampled.omega_x, sampled.omega_y)
    props = expm_hermitian(h, sampled.dt)
    return h, props, _sequential_products(props)


def evolve(sampled: SampledPulse, params: TransmonParams, err: ErrorPoint = ErrorPoint()):
    """Propagate through the sampled pulse.

    Returns ``(final, intermediates)`` where ``intermediates[n] = P_{n+1}...P_1``
    (latest step leftmost) and ``final is intermediates[-1]``.
    """
    _, _, u = ensemble_propagators(sampled, params, [err.detuning_delta], [err.amplitude_gamma])
    inter = u[0]
    return inter[-1], inter


def gate_overlap(u, target=X_PI2):
    """``sum_{k=0,1} <k|U_T^dag U|k>``; works on stacks of ``u``."""
    m = np.swapaxes(target.conj(), -1, -2) @ u
    return m[..., 0, 0] + m[..., 1, 1]


def gate_error(u, target=X_PI2):
    """``1 - |tr_qubit(U_T^dag U)|^2 / 4``."""
    g = gate_overlap(u, target)
    err = 1.0 - 0.25 * np.abs(g) ** 2
    return np.clip(err, 0.0, 1.0) if np.ndim(err) else float(min(max(err, 0.0), 1.0))


def leakage(u):
    """Population left in |2> after starting in |0> or |1>, averaged."""
    return 0.5 * (abs(u[2, 0]) ** 2 + abs(u[2, 1]) ** 2)


# -- open-system path -------------------------------------------------------
#
# Row-major vectorization: vec(A rho B) = kron(A, B.T) vec(rho).

_I3 = np.eye(3, dtype=complex)


def _dissipator(op):
    ldl = op.conj().T @ op
    return np.kron(op, op.conj()) - 0.5 * np.kron(ldl, _I3) - 0.5 * np.kron(_I3, ldl.T)


_D_RELAX = _dissipator(LOWERING_01)
_D_DEPHASE = _dissipator(EXCITED_01)


def _rates(params: TransmonParams):
    if params.t1 is None or params.tphi is None:
        raise ValueError("Lindblad evolution needs t1 and tphi (use math.inf for no decay)")
    return params.gamma_1, params.gamma_phi


def liouvillian(h, params: TransmonParams):
    """Superoperator(s) for ``-i[H, rho] + G1 D[|0><1|] + 2 Gphi D[|1><1|]``.

    Relaxation and pure dephasing act on the qubit subspace only; the
    dephasing term damps the 0-1 coherence at ``Gphi``.
    """
    g1, gphi = _rates(params)
    h = np.asarray(h, dtype=complex)
    ham = -1j * (np.einsum("...ij,kl->...ikjl", h, _I3) - np.einsum("ij,...lk->...ikjl", _I3, h))
    ham = ham.reshape(h.shape[:-2] + (9, 9))
    return ham + g1 * _D_RELAX + 2.0 * gphi * _D_DEPHASE


def unitary_superop(u):
    u = np.asarray(u)
    return np.einsum("...ij,...kl->...ikjl", u, u.conj()).reshape(u.shape[:-2] + (9, 9))


def apply_superop(s, rho):
    return (s @ np.asarray(rho).reshape(9)).reshape(3, 3)


_VEC_I = np.eye(3, dtype=complex).reshape(9)


def _rk4_map(lv, h, m):
    """RK4 map for ``m`` substeps of size ``h/m`` under constant generator(s)."""
    a = lv * (h / m)
    eye = np.eye(9, dtype=complex)
    a2 = a @ a
    a3 = a2 @ a
    t = eye + a + a2 / 2 + a3 / 6 + (a3 @ a) / 24
    return np.linalg.matrix_power(t, m) if t.ndim == 2 else np.stack([np.linalg.matrix_power(x, m) for x in t])


def _chain(maps):
    out = np.eye(9, dtype=complex)
    for s in maps:
        out = s @ out
    return out


def pulse_channel(sampled: SampledPulse, params: TransmonParams, err: ErrorPoint = ErrorPoint(),
                  method="expm", rk4_tol=1e-10):
    """9x9 superoperator of the whole pulse under the Lindblad equation.

    ``method='expm'`` exponentiates each piecewise-constant step exactly.
    ``method='rk4'`` uses fixed-step RK4 with substep doubling until two
    successive refinements agree to ``rk4_tol``.
    """
    h = hamiltonian_batch(params, [err.detuning_delta], [err.amplitude_gamma],
                          sampled.omega_x, sampled.omega_y)[0]
    lv = liouvillian(h, params)
    if method == "expm":
        s = _chain(sla.expm(lv * sampled.dt))
    elif method == "rk4":
        m = 1
        s = _chain(_rk4_map(lv, sampled.dt, m))
        while True:
            m *= 2
            finer = _chain(_rk4_map(lv, sampled.dt, m))
            done = np.max(np.abs(finer - s)) < rk4_tol
            s = finer
            if done or m >= 1024:
                break
    else:
        raise ValueError(f"unknown method {method!r}")
    _check_trace_preserving(s)
    return s


def idle_channel(duration, params: TransmonParams, err: ErrorPoint = ErrorPoint()):
    """Free evolution (no drive) for ``duration`` seconds."""
    h = np.diag([0.0, 0.0, params.anharmonicity_alpha]).astype(complex) + err.detuning_delta * NUMBER
    if duration == 0:
        return np.eye(9, dtype=complex)
    s = sla.expm(liouvillian(h, params) * duration)
    _check_trace_preserving(s)
    return s


def _check_trace_preserving(s, tol=1e-8):
    drift = np.max(np.abs(_VEC_I @ s - _VEC_I))
    if drift > tol:
        raise FloatingPointError(f"trace drift {drift:.2e} exceeds {tol:g}")


def lindblad_evolve(sampled: SampledPulse, params: TransmonParams, err: ErrorPoint,
                    rho0, method="expm"):
    """Evolve a density matrix through the pulse; checks trace at every step."""
    rho = np.asarray(rho0, dtype=complex).reshape(9)
    h = hamiltonian_batch(params, [err.detuning_delta], [err.amplitude_gamma],
                          sampled.omega_x, sampled.omega_y)[0]
    lv = liouvillian(h, params)
    if method == "expm":
        steps = sla.expm(lv * sampled.dt)
    elif method == "rk4":
        full = pulse_channel(sampled, params, err, method="rk4")
        return apply_superop(full, rho0)
    else:
        raise ValueError(f"unknown method {method!r}")
    for s in steps:
        rho = s @ rho
        tr = rho[0] + rho[4] + rho[8]
        if abs(tr - 1.0) > 1e-8:
            raise FloatingPointError(f"trace drift {abs(tr - 1):.2e}")
    out = rho.reshape(3, 3)
    return 0.5 * (out + out.conj().T)


def ket(k):
    v = np.zeros(3, dtype=complex)
    v[k] = 1.0
    return v


def pure(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


__all__ = [
    "X_PI2", "QUBIT_PROJ", "SIGMA_X", "step_propagator", "expm_hermitian", "evolve",
    "ensemble_propagators", "gate_error", "gate_overlap", "leakage", "liouvillian",
    "pulse_channel", "idle_channel", "lindblad_evolve", "unitary_superop", "apply_superop",
    "frame_rotation", "rotation_about_axis", "is_unitary", "ket", "pure",
]
