"""Ensemble-robust GRAPE for Fourier-parametrized pulses.

The cost is the gate error averaged over a grid of static detuning and
amplitude errors. Per-step gradients use the second-order expansion of the
step-propagator derivative,

    dP_n/dOmega_x,n ~ s * (-i dt/2 Sx - dt^2/4 [H_n, Sx]) P_n,

with ``s = 1 + gamma/omega0``, and are mapped onto the Fourier
coefficients by the chain rule. A quasi-Newton (BFGS) loop with Armijo
backtracking minimizes cost plus a quadratic penalty that keeps both
quadratures within ``eta * omega0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import SIGMA_X, SIGMA_Y, TransmonParams, amplitude_scale, mhz
from .propagation import QUBIT_PROJ, X_PI2, ensemble_propagators, gate_error, gate_overlap
from .pulses import (
    N_COEFFS,
    FourierPulse,
    SampledPulse,
    check_constraints,
    fourier_basis,
    half_sine_start,
    random_start,
    sample_pulse,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErrorEnsemble:
    """Grid of detunings and amplitude errors (rad/s); the cost averages over
    all ``len(deltas) * len(gammas)`` combinations."""

    deltas: tuple
    gammas: tuple

    def __post_init__(self):
        d = tuple(sorted(float(v) for v in np.atleast_1d(self.deltas)))
        g = tuple(sorted(float(v) for v in np.atleast_1d(self.gammas)))
        if not d or not g:
            raise ValueError("ensemble needs at least one delta and one gamma")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(g))):
            raise ValueError("ensemble values must be finite")
        object.__setattr__(self, "deltas", d)
        object.__setattr__(self, "gammas", g)

    @classmethod
    def from_mhz(cls, delta_range=(0.0, 0.0), n_delta=1, gamma_range=(0.0, 0.0), n_gamma=1):
        return cls(tuple(mhz(np.linspace(*delta_range, n_delta))),
                   tuple(mhz(np.linspace(*gamma_range, n_gamma))))

    @property
    def size(self):
        return len(self.deltas) * len(self.gammas)

    def points(self):
        """Flattened ``(deltas, gammas)`` arrays, delta-major order."""
        d, g = np.meshgrid(self.deltas, self.gammas, indexing="ij")
        return d.ravel(), g.ravel()


FROG_ENSEMBLE = ErrorEnsemble.from_mhz((-0.5, 0.5), 21)
AROG_ENSEMBLE = ErrorEnsemble.from_mhz((-0.25, 0.25), 21, (-1.2, 1.2), 21)


@dataclass(frozen=True)
class GrapeConfig:
    target: np.ndarray = field(default_factory=lambda: X_PI2.copy(), repr=False)
    dt: float = 0.5e-9
    eta: float = 0.55
    max_iters: int = 300
    grad_tolerance: float = 1e-7
    seed: int = 0
    penalty_weight: float = 100.0
    penalty_margin: float = 2e-3
    max_penalty_doublings: int = 10
    stall_window: int = 20
    stall_rtol: float = 1e-10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class GrapeResult:
    pulse: FourierPulse
    final_cost: float
    cost_history: List[float]
    grad_norm_history: List[float]
    feasible: bool
    ensemble_cost: float = float("nan")
    max_violation: float = 0.0
    n_iters: int = 0
    stop_reason: str = ""
    stage_starts: List[int] = field(default_factory=list)
    seed: Optional[int] = None


# -- cost and gradients -----------------------------------------------------

def _point_errors(sampled, params, ens, target):
    d, g = ens.points()
    _, _, u = ensemble_propagators(sampled, params, d, g)
    return gate_error(u[:, -1], target)


def point_errors(pulse: FourierPulse, params: TransmonParams, ens: ErrorEnsemble, cfg: GrapeConfig):
    """Gate error at every ensemble point, shape ``(N_delta, N_gamma)``."""
    e = _point_errors(sample_pulse(pulse, cfg.dt), params, ens, cfg.target)
    return e.reshape(len(ens.deltas), len(ens.gammas))


def sampled_cost(sampled: SampledPulse, params, ens, target=X_PI2):
    return float(np.mean(_point_errors(sampled, params, ens, target)))


def ensemble_cost(pulse: FourierPulse, params: TransmonParams, ens: ErrorEnsemble, cfg: GrapeConfig):
    """Mean gate error over the ensemble."""
    return sampled_cost(sample_pulse(pulse, cfg.dt), params, ens, cfg.target)


def _cost_and_step_grads(sampled: SampledPulse, params, ens, target):
    d, g = ens.points()
    h, props, u = ensemble_propagators(sampled, params, d, g)
    m, n = props.shape[:2]
    overlap = gate_overlap(u[:, -1], target)
    cost = float(np.mean(1.0 - 0.25 * np.abs(overlap) ** 2))

    # back[:, k] = V^dag P_{N} ... P_{k+2} (0-based), i.e. everything after step k
    back = np.empty_like(props)
    acc = -0.5 * np.conj(overlap)[:, None, None] * (QUBIT_PROJ @ target.conj().T)[None]
    back[:, n - 1] = acc
    for k in range(n - 2, -1, -1):
        acc = acc @ props[:, k + 1]
        back[:, k] = acc
    c = u @ back  # Tr(B X U) = Tr(X U B)

    dt = sampled.dt
    scale = amplitude_scale(params, g)[:, None]
    grads = []
    for sigma in (SIGMA_X, SIGMA_Y):
        comm = h @ sigma - sigma @ h
        first = np.einsum("ab,mnba->mn", sigma, c)
        second = np.einsum("mnab,mnba->mn", comm, c)
        tr = -0.5j * dt * first - 0.25 * dt**2 * second
        grads.append(np.mean(scale * tr.real, axis=0))
    return cost, grads[0], grads[1]


def grad_controls(pulse: SampledPulse, params: TransmonParams, ens: ErrorEnsemble, cfg: GrapeConfig):
    """Per-step gradients ``(dJ/dOmega_x,n, dJ/dOmega_y,n)`` in 1/(rad/s)."""
    _, gx, gy = _cost_and_step_grads(pulse, params, ens, cfg.target)
    return gx, gy


def grad_fourier(pulse: FourierPulse, per_step_grads):
    """Chain rule from per-step gradients to ``(dJ/da_1..5, dJ/db_1..5)``."""
    gx, gy = (np.asarray(v, dtype=float) for v in per_step_grads)
    if gx.shape != gy.shape or gx.ndim != 1:
        raise ValueError("per-step gradients must be two 1-D arrays of equal length")
    n = len(gx)
    dt = pulse.gate_time_tg / n
    bx, by = fourier_basis((np.arange(n) + 0.5) * dt, pulse.gate_time_tg)
    return np.concatenate([pulse.omega0 * (bx @ gx), pulse.omega0 * (by @ gy)])


def cost_and_fourier_grad(pulse: FourierPulse, params, ens, cfg):
    sp = sample_pulse(pulse, cfg.dt)
    cost, gx, gy = _cost_and_step_grads(sp, params, ens, cfg.target)
    return cost, grad_fourier(pulse, (gx, gy))


# -- finite-difference oracles ------------------------------------------------

def fd_fourier_grad(pulse: FourierPulse, params, ens, cfg, step=1e-6):
    """Central differences of the exact ensemble cost in the 10 coefficients."""
    x0 = pulse.vector
    out = np.empty_like(x0)
    for i in range(len(x0)):
        e = np.zeros_like(x0)
        e[i] = step
        fp = ensemble_cost(FourierPulse.from_vector(x0 + e, pulse.gate_time_tg, pulse.omega0), params, ens, cfg)
        fm = ensemble_cost(FourierPulse.from_vector(x0 - e, pulse.gate_time_tg, pulse.omega0), params, ens, cfg)
        out[i] = (fp - fm) / (2 * step)
    return out


def fd_control_grad(sampled: SampledPulse, params, ens, cfg, indices, step=None):
    """Central differences in selected sampled controls.

    ``step`` defaults to ``1e-7 * omega0``. Returns arrays for the x and y
    quadratures at ``indices``.
    """
    step = 1e-7 * params.rabi_max_omega0 if step is None else step
    out = np.empty((2, len(indices)))
    for q, name in enumerate(("omega_x", "omega_y")):
        for j, idx in enumerate(indices):
            vals = []
            for sgn in (1, -1):
                arr = getattr(sampled, name).copy()
                arr[idx] += sgn * step
                kw = {"omega_x": sampled.omega_x, "omega_y": sampled.omega_y, name: arr}
                vals.append(sampled_cost(sampled.with_controls(**kw), params, ens, cfg.target))
            out[q, j] = (vals[0] - vals[1]) / (2 * step)
    return out[0], out[1]


# -- amplitude penalty --------------------------------------------------------

def _penalty(pulse: FourierPulse, cfg: GrapeConfig, weight):
    n = int(round(pulse.gate_time_tg / cfg.dt))
    bx, by = fourier_basis((np.arange(n) + 0.5) * cfg.dt, pulse.gate_time_tg)
    bound = cfg.eta * (1.0 - cfg.penalty_margin)
    x = np.array(pulse.coeffs_a) @ bx
    y = np.array(pulse.coeffs_b) @ by
    vx = np.maximum(np.abs(x) - bound, 0.0)
    vy = np.maximum(np.abs(y) - bound, 0.0)
    val = weight * (np.sum(vx**2) + np.sum(vy**2))
    grad = 2.0 * weight * np.concatenate([bx @ (vx * np.sign(x)), by @ (vy * np.sign(y))])
    return val, grad


# -- optimizer ----------------------------------------------------------------

def _bfgs(fun, grad_fun, x0, max_iters, gtol, stall_window, stall_rtol, history, gnorms):
    """Inverse-Hessian BFGS with Armijo backtracking. Appends accepted
    objective values to ``history``. Returns ``(x, f, n_iter, reason)``."""
    x = np.array(x0, dtype=float)
    f, g = grad_fun(x)
    history.append(f)
    gnorms.append(float(np.linalg.norm(g)))
    hinv = np.eye(len(x)) * min(1.0, 0.05 / max(np.linalg.norm(g), 1e-300))
    c1 = 1e-4
    for it in range(1, max_iters + 1):
        if np.linalg.norm(g) < gtol:
            return x, f, it - 1, "gradient tolerance"
        d = -hinv @ g
        if g @ d >= 0:
            hinv = np.eye(len(x)) * 0.05 / np.linalg.norm(g)
            d = -hinv @ g
        cap = 0.2 / max(np.max(np.abs(d)), 1e-300)
        alpha = min(1.0, cap)
        accepted = False
        for _ in range(40):
            xn = x + alpha * d
            fn = fun(xn)
            if fn <= f + c1 * alpha * (g @ d):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if np.allclose(hinv, np.diag(np.diag(hinv))):
                return x, f, it - 1, "line search failed"
            hinv = np.eye(len(x)) * 0.05 / np.linalg.norm(g)
            continue
        fn, gn = grad_fun(xn)
        s, y = xn - x, gn - g
        sy = s @ y
        if sy > 1e-14 * np.linalg.norm(s) * np.linalg.norm(y):
            if it == 1:
                hinv = np.eye(len(x)) * sy / (y @ y)
            rho = 1.0 / sy
            eye = np.eye(len(x))
            hinv = (eye - rho * np.outer(s, y)) @ hinv @ (eye - rho * np.outer(y, s)) + rho * np.outer(s, s)
        x, f, g = xn, fn, gn
        history.append(f)
        gnorms.append(float(np.linalg.norm(g)))
        if len(history) > stall_window:
            old = history[-stall_window - 1]
            if old - f <= stall_rtol * abs(old):
                return x, f, it, "stalled"
    return x, f, max_iters, "max iterations"


def optimize(init: FourierPulse, params: TransmonParams, ens: ErrorEnsemble, cfg: GrapeConfig) -> GrapeResult:
    """Minimize the ensemble cost over the 10 Fourier coefficients.

    The amplitude bound enters as a quadratic penalty on a slightly
    tightened bound; if the result still violates ``eta`` the penalty weight
    is doubled and the search resumes from the current point.
    """
    tg, omega0 = init.gate_time_tg, init.omega0
    weight = cfg.penalty_weight
    history: List[float] = []
    gnorms: List[float] = []
    stages: List[int] = []
    x = init.vector
    total_iters = 0
    reason = ""
    for _ in range(cfg.max_penalty_doublings + 1):
        def fun(v, w=weight):
            p = FourierPulse.from_vector(v, tg, omega0)
            return ensemble_cost(p, params, ens, cfg) + _penalty(p, cfg, w)[0]

        def grad_fun(v, w=weight):
            p = FourierPulse.from_vector(v, tg, omega0)
            c, gc = cost_and_fourier_grad(p, params, ens, cfg)
            pv, pg = _penalty(p, cfg, w)
            return c + pv, gc + pg

        stages.append(len(history))
        x, f, n_it, reason = _bfgs(fun, grad_fun, x, cfg.max_iters - total_iters, cfg.grad_tolerance,
                                   cfg.stall_window, cfg.stall_rtol, history, gnorms)
        total_iters += n_it
        pulse = FourierPulse.from_vector(x, tg, omega0)
        violation = check_constraints(pulse, cfg.eta, cfg.dt)
        log.debug("stage weight=%g cost=%.3e violation=%.3e (%s)", weight, f, violation, reason)
        if violation == 0.0 or total_iters >= cfg.max_iters:
            break
        weight *= 2.0
    pulse = FourierPulse.from_vector(x, tg, omega0)
    violation = check_constraints(pulse, cfg.eta, cfg.dt)
    return GrapeResult(
        pulse=pulse,
        final_cost=history[-1],
        cost_history=history,
        grad_norm_history=gnorms,
        feasible=violation == 0.0,
        ensemble_cost=ensemble_cost(pulse, params, ens, cfg),
        max_violation=violation,
        n_iters=total_iters,
        stop_reason=reason,
        stage_starts=stages,
        seed=cfg.seed,
    )


def initial_pulse(gate_time, cfg: GrapeConfig, omega0, kind="random", start_index=0):
    """Random coefficients in [-0.3, 0.3] (seeded) or a half-sine pi/2 start."""
    if kind == "half_sine":
        return half_sine_start(gate_time, omega0)
    rng = np.random.default_rng([cfg.seed, start_index])
    return random_start(gate_time, rng, omega0)


def optimize_multistart(gate_time, params, ens, cfg, n_starts=5, kinds=None, target_cost=None):
    """Run several seeded starts and keep the best feasible result.

    Stops early once a feasible result reaches ``target_cost``.
    """
    kinds = kinds or ["half_sine"] + ["random"] * (n_starts - 1)
    best = None
    for i, kind in enumerate(kinds[:n_starts]):
        init = initial_pulse(gate_time, cfg, params.rabi_max_omega0, kind, i)
        res = optimize(init, params, ens, cfg)
        log.info("start %d (%s): J=%.3e feasible=%s", i, kind, res.ensemble_cost, res.feasible)
        key = (not res.feasible, res.ensemble_cost)
        if best is None or key < (not best.feasible, best.ensemble_cost):
            best = res
        if target_cost is not None and best.feasible and best.ensemble_cost < target_cost:
            break
    return best


__all__ = [
    "ErrorEnsemble", "GrapeConfig", "GrapeResult", "FROG_ENSEMBLE", "AROG_ENSEMBLE",
    "ensemble_cost", "point_errors", "grad_controls", "grad_fourier", "cost_and_fourier_grad",
    "fd_fourier_grad", "fd_control_grad", "optimize", "optimize_multistart", "initial_pulse",
    "N_COEFFS",
]
