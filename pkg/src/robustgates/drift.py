"""Synthetic drift campaigns and ridge-regression sensitivity analysis.

A campaign is a sequence of samples of the slowly drifting parameters
``x = (gamma, Gamma_phi, Gamma_1)`` and the RB gate error of each gate at
those parameters. Sensitivities ``w`` are fitted per gate by ridge
regression on standardized features and reported in physical units:
gamma in MHz (ordinary frequency), rates in 1/us, so every weight is in
1/MHz.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .benchmarking import simulate_rb
from .model import ErrorPoint, TransmonParams, US, default_transmon, mhz, to_mhz
from .pulses import builtin_pulse, default_drag_beta, drag_for_rotation

FEATURES = ("gamma", "gamma_phi", "gamma_1")
FEATURE_UNITS = ("MHz", "1/us", "1/us")
SCENARIOS = ("constant", "day10-amplitude-ramp", "day6-dephasing-dip", "t1-only", "mixed")
RAMP_PEAK_MHZ = 0.88
DIP_FLOOR_TPHI = 1.0 * US
LAMBDA_GRID = np.concatenate([[0.0], np.logspace(-3, 0, 13)])


@dataclass(frozen=True)
class DriftSample:
    timestamp: int
    gamma: float
    gamma_phi_rate: float
    gamma_1_rate: float
    gate_errors: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.gamma_phi_rate < 0 or self.gamma_1_rate < 0:
            raise ValueError("rates must be >= 0")

    def features(self):
        """Feature vector in regression units (MHz, 1/us, 1/us)."""
        return np.array([to_mhz(self.gamma), self.gamma_phi_rate * US, self.gamma_1_rate * US])


def default_gate_set(params: Optional[TransmonParams] = None):
    """DRAG (128 ns), FROG (112 ns) and AROG (128 ns) X90 pulses."""
    params = default_transmon() if params is None else params
    return {
        "DRAG": drag_for_rotation(128e-9, beta=default_drag_beta(params.anharmonicity_alpha)),
        "FROG": builtin_pulse("FROG", params.rabi_max_omega0),
        "AROG": builtin_pulse("AROG", params.rabi_max_omega0),
    }


def analytical_t1_sensitivity(t_g):
    """``dE/dGamma_1 = t_g/3`` in 1/MHz (t_g in seconds, Gamma_1 in 1/us)."""
    if t_g < 0:
        raise ValueError("gate time must be >= 0")
    return t_g / US / 3.0


# -- campaign processes --------------------------------------------------

def ou_process(rng, n, tau, sigma, x0=0.0):
    """Discrete Ornstein-Uhlenbeck path with unit time step."""
    a = math.exp(-1.0 / tau)
    s = sigma * math.sqrt(1.0 - a * a)
    out = np.empty(n)
    x = x0
    for k in range(n):
        out[k] = x
        x = a * x + s * rng.standard_normal()
    return out


def square_dips(rng, n, n_dips, width):
    """0/1 indicator with ``n_dips`` non-overlapping episodes of ``width`` samples."""
    ind = np.zeros(n)
    if n_dips == 0:
        return ind
    slots = np.sort(rng.choice(max(n // width, n_dips), size=n_dips, replace=False))
    for s in slots:
        ind[s * width:min(n, (s + 1) * width)] = 1.0
    return ind


def campaign_parameters(seed, n_samples, scenario, base: Optional[TransmonParams] = None):
    """Trajectories ``(gamma, Gamma_phi, Gamma_1)`` in rad/s and 1/s."""
    if n_samples < 10:
        raise ValueError("n_samples must be >= 10")
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    base = default_transmon() if base is None else base
    g1 = base.gamma_1 * np.ones(n_samples)
    gphi = base.gamma_phi * np.ones(n_samples)
    gam = np.zeros(n_samples)
    rng = np.random.default_rng(seed)
    n = n_samples
    if scenario == "constant":
        pass
    elif scenario == "day10-amplitude-ramp":
        k = np.arange(n)
        ramp = np.interp(k, [0, 0.7 * (n - 1), n - 1], [0.0, 1.0, 0.6])
        path = ramp + 0.08 * ou_process(rng, n, tau=8.0, sigma=1.0)
        gam = mhz(RAMP_PEAK_MHZ) * path / np.max(np.abs(path))
        gphi = gphi * (1 + 0.05 * ou_process(rng, n, 10.0, 1.0))
        g1 = g1 * (1 + 0.05 * ou_process(rng, n, 10.0, 1.0))
    elif scenario == "day6-dephasing-dip":
        dip = square_dips(rng, n, n_dips=2, width=max(2, n // 10))
        tphi = base.tphi * (1 + 0.1 * ou_process(rng, n, 6.0, 1.0))
        depth = 0.5 + 0.5 * rng.random(n)
        tphi = np.where(dip > 0, DIP_FLOOR_TPHI + (base.tphi - DIP_FLOOR_TPHI) * (1 - depth) ** 2, tphi)
        tphi[np.flatnonzero(dip)[0] if dip.any() else int(np.argmin(tphi))] = DIP_FLOOR_TPHI
        gphi = 1.0 / np.maximum(tphi, DIP_FLOOR_TPHI)
        gam = mhz(0.2) * ou_process(rng, n, 8.0, 1.0)
        g1 = g1 * (1 + 0.05 * ou_process(rng, n, 10.0, 1.0))
    elif scenario == "t1-only":
        t1 = base.t1 * np.exp(0.3 * ou_process(rng, n, 5.0, 1.0))
        g1 = 1.0 / t1
        # tiny jitter keeps the other features non-degenerate
        gam = mhz(1e-3) * rng.standard_normal(n)
        gphi = gphi * (1 + 1e-3 * rng.standard_normal(n))
    elif scenario == "mixed":
        gam = mhz(0.4) * ou_process(rng, n, 8.0, 1.0)
        gphi = gphi * np.exp(0.4 * ou_process(rng, n, 6.0, 1.0))
        g1 = g1 * np.exp(0.25 * ou_process(rng, n, 6.0, 1.0))
    return gam, np.maximum(gphi, 0.0), np.maximum(g1, 0.0)


def _sample_errors(args):
    k, gam, gphi, g1, base, gates, lengths, n_random, seed = args
    t1 = math.inf if g1 == 0 else 1.0 / g1
    tphi = math.inf if gphi == 0 else 1.0 / gphi
    params = base.with_coherence(t1, tphi)
    errs = {}
    for gi, (name, pulse) in enumerate(gates.items()):
        out = simulate_rb(pulse, params, ErrorPoint(0.0, gam), lengths, n_random, noise="lindblad",
                          rng_seed=[seed, gi])
        errs[name] = out.fitted_gate_error
    return DriftSample(k, float(gam), float(gphi), float(g1), errs)


def generate_campaign(seed, n_samples=110, scenario="mixed", base: Optional[TransmonParams] = None, gates=None,
                      lengths=(1, 5, 10, 25, 50, 100, 200, 400), n_random=20, threads=None) -> List[DriftSample]:
    """Simulate a drift campaign.

    Each sample's gate errors come from Lindblad RB at that sample's rates
    and amplitude error. RB randomizations are seeded per gate only, so
    identical parameters give identical errors.
    """
    base = default_transmon() if base is None else base
    gates = default_gate_set(base) if gates is None else gates
    gam, gphi, g1 = campaign_parameters(seed, n_samples, scenario, base)
    jobs = [(k, gam[k], gphi[k], g1[k], base, gates, lengths, n_random, seed) for k in range(n_samples)]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_sample_errors, jobs))
    return [_sample_errors(j) for j in jobs]


# -- regression ----------------------------------------------------------

@dataclass
class RegressionFit:
    """Per-gate ridge fit. Rows of the weight matrices follow ``gates``,
    columns follow ``FEATURES``."""

    gates: tuple
    weights_physical: np.ndarray
    weights_normalized: np.ndarray
    lam: np.ndarray
    r_squared: np.ndarray
    feature_means: np.ndarray
    feature_stds: np.ndarray
    intercepts: np.ndarray

    def weight(self, gate, feature):
        return float(self.weights_physical[self.gates.index(gate), FEATURES.index(feature)])

    def predict(self, x):
        """Gate errors (n, n_gates) for raw features ``x`` (n, 3)."""
        xt = (np.atleast_2d(x) - self.feature_means) / self.feature_stds
        return self.intercepts + xt @ self.weights_normalized.T

    def to_dict(self):
        return {
            "gates": list(self.gates),
            "features": list(FEATURES),
            "units": "1/MHz",
            "weights_physical": self.weights_physical.tolist(),
            "weights_normalized": self.weights_normalized.tolist(),
            "lambda": self.lam.tolist(),
            "r_squared": self.r_squared.tolist(),
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
            "intercepts": self.intercepts.tolist(),
        }


def _standardize(x):
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    if np.any(sd <= 1e-12 * np.maximum(np.abs(mu), 1e-300)):
        raise ValueError("feature with zero variance; the design is degenerate")
    return (x - mu) / sd, mu, sd


def _ridge_solve(xt, y, lam):
    """Minimize ``mean((y - xt w)^2) + lam |w|^2`` for centred ``y``."""
    m, d = xt.shape
    gram = xt.T @ xt / m + lam * np.eye(d)
    if np.linalg.cond(gram) > 1e12:
        raise np.linalg.LinAlgError("singular ridge system (collinear features at lambda = 0?)")
    return np.linalg.solve(gram, xt.T @ y / m)


def _fit_one(x, y, lam):
    xt, mu, sd = _standardize(x)
    ybar = y.mean()
    wt = _ridge_solve(xt, y - ybar, lam)
    return wt, mu, sd, ybar


def loo_error(x, y, lam):
    """Leave-one-out mean squared prediction error (features re-standardized per fold)."""
    m = len(y)
    errs = np.empty(m)
    for i in range(m):
        keep = np.arange(m) != i
        wt, mu, sd, ybar = _fit_one(x[keep], y[keep], lam)
        errs[i] = y[i] - (ybar + ((x[i] - mu) / sd) @ wt)
    return float(np.mean(errs**2))


def select_lambda(x, y, grid=LAMBDA_GRID):
    scores = []
    for lam in grid:
        try:
            scores.append(loo_error(x, y, lam))
        except np.linalg.LinAlgError:
            scores.append(np.inf)
    return float(grid[int(np.argmin(scores))])


def ridge_fit_arrays(x, y, lam=None, gates=None):
    """Ridge regression on raw arrays.

    Parameters
    ----------
    x : array, shape (m, d)
        Features in physical units.
    y : array, shape (m, g)
        Gate errors, one column per gate.
    lam : float, sequence of float or None
        Regularization; scalar, one per gate, or None for leave-one-out
        selection per gate over ``LAMBDA_GRID``.

    Raises
    ------
    ValueError
        Fewer than 4 samples or a zero-variance feature.
    numpy.linalg.LinAlgError
        Singular design (collinear features at lambda = 0).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] < 4:
        raise ValueError("need at least 4 samples")
    ng = y.shape[1]
    gates = tuple(gates) if gates is not None else tuple(f"g{i}" for i in range(ng))
    if lam is None:
        lams = np.array([select_lambda(x, y[:, i]) for i in range(ng)])
    else:
        lams = np.broadcast_to(np.asarray(lam, dtype=float), (ng,)).copy()
    if np.any(lams < 0):
        raise ValueError("lambda must be >= 0")
    wts, icpt, r2 = [], [], []
    for i in range(ng):
        wt, mu, sd, ybar = _fit_one(x, y[:, i], lams[i])
        pred = ybar + ((x - mu) / sd) @ wt
        ss_tot = np.sum((y[:, i] - ybar) ** 2)
        r2.append(1.0 - np.sum((y[:, i] - pred) ** 2) / ss_tot if ss_tot > 0 else 1.0)
        wts.append(wt)
        icpt.append(ybar)
    wts = np.array(wts)
    return RegressionFit(gates, wts / sd, wts, lams, np.array(r2), mu, sd, np.array(icpt))


def ridge_fit(samples: Sequence[DriftSample], lam=None, gates=None) -> RegressionFit:
    """Fit per-gate sensitivities from campaign samples.

    ``lam`` may be a scalar, a mapping gate -> lambda, or None (LOO choice).
    """
    gates = tuple(samples[0].gate_errors) if gates is None else tuple(gates)
    x = np.array([s.features() for s in samples])
    y = np.array([[s.gate_errors[g] for g in gates] for s in samples])
    if isinstance(lam, dict):
        lam = [lam[g] for g in gates]
    return ridge_fit_arrays(x, y, lam, gates)


# -- reporting ------------------------------------------------------------

def sensitivity_report(fit: RegressionFit, gate_times: Optional[Dict[str, float]] = None):
    """Aligned text table: one row per sensitivity, one column per gate."""
    labels = {"gamma": "w_gamma", "gamma_phi": "w_Gamma_phi", "gamma_1": "w_Gamma_1"}
    width = 12
    lines = ["sensitivity [1/MHz]".ljust(24) + "".join(g.rjust(width) for g in fit.gates)]
    for j, f in enumerate(FEATURES):
        lines.append(labels[f].ljust(24) + "".join(f"{fit.weights_physical[i, j]:{width}.3e}"
                                                  for i in range(len(fit.gates))))
    if gate_times:
        lines.append("w_Gamma_1 (t_g/3)".ljust(24) + "".join(
            f"{analytical_t1_sensitivity(gate_times[g]):{width}.3e}" if g in gate_times else " " * width
            for g in fit.gates))
    lines.append("R^2".ljust(24) + "".join(f"{r:{width}.4f}" for r in fit.r_squared))
    lines.append("lambda".ljust(24) + "".join(f"{v:{width}.3g}" for v in fit.lam))
    return "\n".join(lines)


def write_campaign_csv(samples: Sequence[DriftSample], path):
    gates = list(samples[0].gate_errors)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "gamma_mhz", "gamma_phi_per_us", "gamma_1_per_us"] + [f"error_{g}" for g in gates])
        for s in samples:
            f = s.features()
            w.writerow([s.timestamp] + [f"{v:.8e}" for v in f] + [f"{s.gate_errors[g]:.8e}" for g in gates])


def write_fit_json(fit: RegressionFit, path):
    with open(path, "w") as fh:
        json.dump(fit.to_dict(), fh, indent=2)
