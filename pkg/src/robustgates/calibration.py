"""Simulated calibration experiments.

Amplitude sweeps, error amplification of the amplitude error, Ramsey and T1
measurements. All simulations return exact populations unless ``shots`` is
given, in which case binomial sampling with a seeded generator is applied.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, brentq, curve_fit

from .model import ErrorPoint, TransmonParams, mhz, tphi_from_t2star
from .propagation import (
    X_PI2,
    evolve,
    frame_rotation,
    idle_channel,
    pulse_channel,
    rotation_about_axis,
    unitary_superop,
)
from .pulses import SampledPulse, sample_pulse


class FitError(RuntimeError):
    """A calibration fit diverged or its input was degenerate."""


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of an amplitude calibration.

    ``amplitude_scale`` multiplies the drive to undo the fitted amplitude
    error; ``residual_gamma`` is that error in rad/s.
    """

    amplitude_scale: float
    residual_gamma: float
    fitted_offset_a: float

    def __post_init__(self):
        if not self.amplitude_scale > 0:
            raise ValueError("amplitude_scale must be > 0")


@dataclass(frozen=True)
class AmplitudeSweep:
    scale: float
    slope: float
    scales: np.ndarray
    populations: np.ndarray


@dataclass(frozen=True)
class CoherenceEstimate:
    frequency_offset: float
    t2_star: float
    t1: Optional[float] = None
    tphi: Optional[float] = None
    fit_ok: bool = True
    message: str = ""

    def with_t1(self, t1):
        """Attach a T1 value and derive T_phi from it."""
        return CoherenceEstimate(self.frequency_offset, self.t2_star, t1,
                                 tphi_from_t2star(self.t2_star, t1), self.fit_ok, self.message)


@dataclass(frozen=True)
class T1Fit:
    t1: float
    unbounded: bool
    amplitude: float
    offset: float


def _sampled(pulse, dt):
    return pulse if isinstance(pulse, SampledPulse) else sample_pulse(pulse, dt)


def _measure(pop, shots, rng):
    pop = np.clip(np.asarray(pop, dtype=float), 0.0, 1.0)
    if shots is None:
        return pop
    return rng.binomial(shots, pop) / shots


# -- amplitude ----------------------------------------------------------

def excited_population(pulse, params: TransmonParams, scale, err: ErrorPoint = ErrorPoint(), dt=0.5e-9):
    """|1> population after one pulse from |0> with the drive scaled by ``scale``."""
    u = evolve(_sampled(pulse, dt).scaled(scale), params, err)[0]
    return float(abs(u[1, 0]) ** 2)


def amplitude_sweep(pulse, params: TransmonParams, scales: Sequence[float], err: ErrorPoint = ErrorPoint(),
                    dt=0.5e-9, target=0.5):
    """Find the drive scale where one pulse leaves ``target`` excited population.

    A coarse sweep over ``scales`` locates the sign changes; the one closest
    to unit scale is refined by bisection. The local slope dP/dscale there is
    also returned: robust pulses sit on a plateau and show a small slope.

    Raises
    ------
    ValueError
        If no crossing lies in the swept range.
    """
    scales = np.sort(np.asarray(scales, dtype=float))
    pops = np.array([excited_population(pulse, params, s, err, dt) for s in scales])
    diff = pops - target
    idx = np.where(np.sign(diff[:-1]) * np.sign(diff[1:]) <= 0)[0]
    if idx.size == 0:
        raise ValueError("no 0.5-population crossing in the swept range")
    k = idx[np.argmin(np.abs(0.5 * (scales[idx] + scales[idx + 1]) - 1.0))]
    f = lambda s: excited_population(pulse, params, s, err, dt) - target
    lo, hi = scales[k], scales[k + 1]
    s0 = lo if diff[k] == 0 else (hi if diff[k + 1] == 0 else brentq(f, lo, hi, xtol=1e-12, rtol=1e-12))
    h = 1e-5
    slope = (f(s0 + h) - f(s0 - h)) / (2 * h)
    return AmplitudeSweep(float(s0), float(slope), scales, pops)


def error_amp_populations(pulse, params: TransmonParams, err: ErrorPoint, n_values, dt=0.5e-9,
                          shots=None, rng_seed=0):
    """Ground-state population after ``2n+1`` repetitions of the pulse."""
    u = evolve(_sampled(pulse, dt), params, err)[0]
    pops = []
    for n in n_values:
        v = np.linalg.matrix_power(u, 2 * int(n) + 1)
        pops.append(abs(v[0, 0]) ** 2)
    return _measure(pops, shots, np.random.default_rng(rng_seed))


def _ea_model(half):
    off = 0.5 if half else 0.0

    def f(n, a, g):
        return a + 0.5 * (-1.0) ** n * np.cos(np.pi / 2 + (n + off) * np.pi * g)

    return f


def fit_error_amp(n_values, populations, model="exact"):
    """Fit ``(a, gamma/Omega0)`` to error-amplification data.

    ``model='exact'`` uses the rotation-angle phase ``(n + 1/2) pi gamma/Omega0``
    of ``2n+1`` quarter turns; ``model='short'`` drops the half step, which
    biases gamma upward by about 2% over n = 0..34.
    """
    if model not in ("exact", "short"):
        raise ValueError(f"unknown model {model!r}")
    n = np.asarray(n_values, dtype=float)
    y = np.asarray(populations, dtype=float)
    if n.size < 10:
        raise ValueError("need at least 10 repetition counts")
    f = _ea_model(model == "exact")
    # coarse grid start avoids the aliased minima at large |gamma|
    span = 1.0 / max(n.max(), 1.0)
    grid = np.linspace(-span, span, 401)
    sse = [np.sum((y - np.mean(y) - (f(n, 0.0, g) - np.mean(f(n, 0.0, g)))) ** 2) for g in grid]
    g0 = grid[int(np.argmin(sse))]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(f, n, y, p0=[0.5, g0], maxfev=10000)
    except RuntimeError as exc:
        raise FitError(f"error-amplification fit diverged: {exc}") from exc
    if not np.all(np.isfinite(popt)):
        raise FitError("error-amplification fit returned non-finite parameters")
    return float(popt[0]), float(popt[1])


def error_amp_extract(pulse, params: TransmonParams, err: ErrorPoint = ErrorPoint(), n_values=range(35),
                      dt=0.5e-9, model="exact", shots=None, rng_seed=0):
    """Amplitude error from a repeated-pulse sequence; returns a CalibrationResult."""
    pops = error_amp_populations(pulse, params, err, n_values, dt, shots, rng_seed)
    a, g = fit_error_amp(n_values, pops, model)
    if not 1.0 + g > 0:
        raise FitError("fitted amplitude error implies a non-positive drive")
    return CalibrationResult(1.0 / (1.0 + g), g * params.rabi_max_omega0, a)


# -- DRAG fine sequence ---------------------------------------------------

def drag_fine_sequence(pulse, params: TransmonParams, m_values, err: ErrorPoint = ErrorPoint(), dt=0.5e-9):
    """|1> population after ``(X90 Zpi X90 Zpi)^m Y90`` for each ``m``.

    The virtual Z(pi) flips the drive phase of the following pulse; two of
    them restore the frame, so each block is ``(-X90)(X90)`` and ideally the
    identity. Residual phase or detuning errors accumulate with ``m``.
    """
    u = evolve(_sampled(pulse, dt), params, err)[0]
    flip = frame_rotation(np.pi)
    block = (flip @ u @ flip.conj().T) @ u
    y90 = frame_rotation(np.pi / 2) @ u @ frame_rotation(np.pi / 2).conj().T
    out = []
    for m in m_values:
        psi = y90 @ np.linalg.matrix_power(block, int(m)) @ np.array([1.0, 0.0, 0.0])
        out.append(abs(psi[1]) ** 2)
    return np.array(out)


# -- coherence ----------------------------------------------------------

def _instant_channel(angle, phi=0.0):
    return unitary_superop(rotation_about_axis(angle, phi))


def _pop(rho_vec, k):
    return float(rho_vec[4 * k].real)


def ramsey_populations(params: TransmonParams, err: ErrorPoint, delays, artificial_detuning=mhz(0.5), pulse=None,
                       dt=0.5e-9, shots=None, rng_seed=0):
    """|1> population for pi/2 - wait - pi/2 with an advancing second-pulse phase.

    ``pulse`` is the pi/2 pulse; by default an instantaneous ideal rotation.
    The second pulse has phase ``artificial_detuning * tau``, so the fringe
    frequency is ``delta + artificial_detuning``.
    """
    base = _instant_channel(np.pi / 2) if pulse is None else pulse_channel(_sampled(pulse, dt), params, err)
    rho0 = np.zeros(9, dtype=complex)
    rho0[0] = 1.0
    after_first = base @ rho0
    pops = []
    for tau in np.asarray(delays, dtype=float):
        if tau < 0:
            raise ValueError("delays must be >= 0")
        r = frame_rotation(artificial_detuning * tau)
        rs = unitary_superop(r)
        second = rs @ base @ rs.conj().T
        rho = second @ (idle_channel(tau, params, err) @ after_first)
        pops.append(_pop(rho, 1))
    return _measure(pops, shots, np.random.default_rng(rng_seed))


def _damped_cos(t, amp, rate, w, phi, c):
    return amp * np.exp(-t * rate) * np.cos(w * t + phi) + c


def fit_ramsey(delays, populations, artificial_detuning=mhz(0.5)):
    """Fit a damped cosine; returns a CoherenceEstimate (offset, T2*).

    Assumes ``delta > -artificial_detuning`` so the fringe frequency is
    positive. A failed fit is flagged rather than raised.
    """
    t = np.asarray(delays, dtype=float)
    y = np.asarray(populations, dtype=float)
    span = t.max() - t.min()
    if span * artificial_detuning / (2 * np.pi) < 3:
        raise ValueError("delays must span at least 3 periods of the artificial detuning")
    # frequency start from a zero-padded FFT of the detrended trace
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-6):
        grid = np.linspace(t.min(), t.max(), len(t))
        yy = np.interp(grid, t, y)
    else:
        grid, yy = t, y
    spec = np.abs(np.fft.rfft(yy - yy.mean(), n=8 * len(yy)))
    freqs = np.fft.rfftfreq(8 * len(yy), grid[1] - grid[0]) * 2 * np.pi
    w0 = freqs[1 + int(np.argmax(spec[1:]))]
    amp0 = 0.5 * (y.max() - y.min())
    phi0 = 0.0 if y[0] > y.mean() else np.pi
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(_damped_cos, t, y, p0=[amp0, 1.0 / span, w0, phi0, y.mean()],
                                   bounds=([0, 0, 0, -2 * np.pi, -1], [1, 1e3 / span, np.inf, 2 * np.pi, 2]),
                                   maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        return CoherenceEstimate(float("nan"), float("nan"), fit_ok=False, message=str(exc))
    amp, rate, w, _, _ = popt
    ok = bool(np.all(np.isfinite(np.diag(pcov)))) and amp > 1e-3
    # decay below 1e-4 over the window is unresolvable
    t2 = math.inf if rate * span < 1e-4 else float(1.0 / rate)
    return CoherenceEstimate(float(w - artificial_detuning), t2, fit_ok=ok,
                             message="" if ok else "ill-conditioned Ramsey fit")


def ramsey_estimate(params: TransmonParams, err: ErrorPoint = ErrorPoint(), delays=None,
                    artificial_detuning=mhz(0.5), pulse=None, shots=None, rng_seed=0):
    """Simulate and fit a Ramsey experiment.

    Default delays: 1001 points over 50 us.
    """
    delays = np.linspace(0.0, 50e-6, 1001) if delays is None else np.asarray(delays, dtype=float)
    pops = ramsey_populations(params, err, delays, artificial_detuning, pulse, shots=shots, rng_seed=rng_seed)
    return fit_ramsey(delays, pops, artificial_detuning)


def t1_populations(params: TransmonParams, delays, err: ErrorPoint = ErrorPoint(), shots=None, rng_seed=0):
    """|1> population after an ideal pi pulse and a wait."""
    rho0 = np.zeros(9, dtype=complex)
    rho0[0] = 1.0
    excited = _instant_channel(np.pi) @ rho0
    pops = [_pop(idle_channel(float(tau), params, err) @ excited, 1) for tau in delays]
    return _measure(pops, shots, np.random.default_rng(rng_seed))


def fit_t1(delays, populations):
    """Fit ``a exp(-t/T1) + c``.

    A flat trace over a non-degenerate delay range returns ``t1 = inf`` with
    ``unbounded=True``.

    Raises
    ------
    FitError
        Degenerate delays or a diverging fit.
    """
    t = np.asarray(delays, dtype=float)
    y = np.asarray(populations, dtype=float)
    if t.size < 3 or np.ptp(t) == 0:
        raise FitError("T1 fit needs at least three distinct delays")
    if np.ptp(y) < 1e-9:
        return T1Fit(math.inf, True, float(y.mean()), 0.0)
    span = np.ptp(t)
    try:
        popt, _ = curve_fit(lambda x, a, t1, c: a * np.exp(-x / t1) + c, t, y, p0=[np.ptp(y), span / 3, y.min()],
                            bounds=([0, span * 1e-4, -1], [2, np.inf, 1]), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"T1 fit diverged: {exc}") from exc
    a, t1, c = popt
    if t1 > 1e3 * span:
        return T1Fit(math.inf, True, float(a), float(c))
    return T1Fit(float(t1), False, float(a), float(c))


def t1_estimate(params: TransmonParams, delays=None, err: ErrorPoint = ErrorPoint(), shots=None, rng_seed=0):
    """Simulate and fit a T1 decay. Default delays: 201 points up to 5 T1 (or 200 us)."""
    if delays is None:
        top = 5 * params.t1 if params.t1 is not None and math.isfinite(params.t1) else 200e-6
        delays = np.linspace(0.0, top, 201)
    delays = np.asarray(delays, dtype=float)
    if params.t1 is not None and math.isfinite(params.t1) and np.ptp(delays) > 0 and delays.max() < 2 * params.t1:
        raise ValueError("delays must reach at least 2 T1")
    pops = t1_populations(params, delays, err, shots, rng_seed)
    return fit_t1(delays, pops)


def write_trace_csv(path, x, populations, x_name="x"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([x_name, "population"])
        for a, b in zip(x, populations):
            w.writerow([f"{a:.10g}", f"{b:.10g}"])


__all__ = [
    "CalibrationResult", "AmplitudeSweep", "CoherenceEstimate", "T1Fit", "FitError",
    "amplitude_sweep", "excited_population", "error_amp_populations", "fit_error_amp",
    "error_amp_extract", "drag_fine_sequence", "ramsey_populations", "fit_ramsey",
    "ramsey_estimate", "t1_populations", "fit_t1", "t1_estimate", "write_trace_csv", "X_PI2",
]
