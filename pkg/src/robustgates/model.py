"""Three-level transmon model in the frame rotating at the qubit frequency.

All quantities are stored in SI units internally: angular frequencies in
rad/s and durations in seconds. User-facing helpers (``from_mhz``, the
config loader, file formats) take ordinary frequencies in MHz and times in
ns or us and convert at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

TWO_PI = 2.0 * np.pi
NS = 1e-9
US = 1e-6


def mhz(f_mhz):
    """Ordinary frequency in MHz -> angular frequency in rad/s."""
    out = TWO_PI * 1e6 * np.asarray(f_mhz, dtype=float)
    return float(out) if out.ndim == 0 else out


def to_mhz(omega):
    """Angular frequency in rad/s -> ordinary frequency in MHz."""
    out = np.asarray(omega, dtype=float) / (TWO_PI * 1e6)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TransmonParams:
    """Physical constants of the simulated qubit.

    Parameters
    ----------
    anharmonicity_alpha : float
        Anharmonicity in rad/s (negative for a transmon).
    rabi_max_omega0 : float
        Maximum Rabi rate in rad/s. Also sets the scale of the amplitude
        error: the drive is multiplied by ``1 + gamma / omega0``.
    t1, tphi : float, optional
        Relaxation and pure-dephasing times in seconds. ``math.inf`` is
        allowed and means the corresponding rate is zero. ``None`` means
        the parameter is unknown, which the Lindblad path rejects.
    """

    anharmonicity_alpha: float
    rabi_max_omega0: float
    t1: Optional[float] = None
    tphi: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.anharmonicity_alpha):
            raise ValueError("anharmonicity must be finite")
        if not self.rabi_max_omega0 > 0:
            raise ValueError("rabi_max_omega0 must be > 0")
        for name in ("t1", "tphi"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be > 0 when given")

    @classmethod
    def from_mhz(cls, alpha_mhz, omega0_mhz, t1_us=None, tphi_us=None):
        return cls(
            anharmonicity_alpha=mhz(alpha_mhz),
            rabi_max_omega0=mhz(omega0_mhz),
            t1=None if t1_us is None else t1_us * US,
            tphi=None if tphi_us is None else tphi_us * US,
        )

    @property
    def gamma_1(self):
        """Relaxation rate 1/T1 in 1/s (0 for infinite T1)."""
        if self.t1 is None:
            raise ValueError("t1 is not set")
        return 0.0 if math.isinf(self.t1) else 1.0 / self.t1

    @property
    def gamma_phi(self):
        """Pure dephasing rate 1/T_phi in 1/s (0 for infinite T_phi)."""
        if self.tphi is None:
            raise ValueError("tphi is not set")
        return 0.0 if math.isinf(self.tphi) else 1.0 / self.tphi

    def with_coherence(self, t1=None, tphi=None):
        return TransmonParams(self.anharmonicity_alpha, self.rabi_max_omega0, t1, tphi)


def tphi_from_t2star(t2star, t1):
    """Pure dephasing time from ``1/T_phi = 1/T2* - 1/(2 T1)``."""
    rate = 1.0 / t2star - 0.5 / t1
    if rate < 0:
        raise ValueError("T2* exceeds 2*T1; no physical T_phi")
    return math.inf if rate == 0 else 1.0 / rate


def default_transmon(with_coherence=True):
    """The measured device: alpha/2pi = -295.1 MHz, Omega0/2pi = 17.7 MHz,
    T1 = 45.5 us, T2* = 16.81 us."""
    t1 = 45.5 * US
    if not with_coherence:
        return TransmonParams(mhz(-295.1), mhz(17.7))
    return TransmonParams(mhz(-295.1), mhz(17.7), t1, tphi_from_t2star(16.81 * US, t1))


@dataclass(frozen=True)
class ErrorPoint:
    """Static detuning ``delta`` and amplitude error ``gamma`` (both rad/s)."""

    detuning_delta: float = 0.0
    amplitude_gamma: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.detuning_delta) and np.isfinite(self.amplitude_gamma)):
            raise ValueError("error point must be finite")

    @classmethod
    def from_mhz(cls, delta_mhz=0.0, gamma_mhz=0.0):
        return cls(mhz(delta_mhz), mhz(gamma_mhz))


@dataclass(frozen=True)
class ControlSample:
    omega_x: float
    omega_y: float

    def __post_init__(self):
        if not (np.isfinite(self.omega_x) and np.isfinite(self.omega_y)):
            raise ValueError("control sample must be finite")


def _build_operators():
    lower = np.zeros((3, 3), dtype=complex)
    for k in (1, 2):
        lower[k - 1, k] = np.sqrt(k)
    raise_ = lower.T.copy()
    sx = raise_ + lower
    sy = 1j * (raise_ - lower)
    number = np.diag([0.0, 1.0, 2.0]).astype(complex)
    leak = np.diag([0.0, 0.0, 1.0]).astype(complex)
    for op in (sx, sy, number, leak):
        op.setflags(write=False)
    return sx, sy, number, leak


SIGMA_X, SIGMA_Y, NUMBER, LEAKAGE = _build_operators()


def ladder_operators():
    """Return ``(sigma_x_sum, sigma_y_sum, number_like, leakage_proj)``.

    The sigma sums run over the 0-1 and 1-2 transitions with the sqrt(k)
    matrix elements of a harmonic-like ladder.
    """
    return SIGMA_X.copy(), SIGMA_Y.copy(), NUMBER.copy(), LEAKAGE.copy()


def drift_hamiltonian(params: TransmonParams, delta):
    """Control-free part ``alpha|2><2| + delta * n``; ``delta`` may be an array."""
    delta = np.asarray(delta, dtype=float)
    return params.anharmonicity_alpha * LEAKAGE + delta[..., None, None] * NUMBER


def amplitude_scale(params: TransmonParams, gamma):
    return 1.0 + np.asarray(gamma, dtype=float) / params.rabi_max_omega0


def build_hamiltonian(params: TransmonParams, err: ErrorPoint, ctrl: ControlSample):
    """Rotating-frame Hamiltonian (rad/s) at one control sample and error point."""
    s = 1.0 + err.amplitude_gamma / params.rabi_max_omega0
    return (
        drift_hamiltonian(params, err.detuning_delta)
        + s * (0.5 * ctrl.omega_x * SIGMA_X + 0.5 * ctrl.omega_y * SIGMA_Y)
    )


def hamiltonian_batch(params: TransmonParams, deltas, gammas, omega_x, omega_y):
    """Vectorized Hamiltonians.

    ``deltas`` and ``gammas`` have shape ``(M,)`` (ensemble points), the
    controls have shape ``(N,)`` (time steps). Returns ``(M, N, 3, 3)``.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    ox = np.asarray(omega_x, dtype=float)
    oy = np.asarray(omega_y, dtype=float)
    drive = 0.5 * (ox[:, None, None] * SIGMA_X + oy[:, None, None] * SIGMA_Y)
    s = amplitude_scale(params, gammas)
    h0 = drift_hamiltonian(params, deltas)
    return h0[:, None] + s[:, None, None, None] * drive[None]
