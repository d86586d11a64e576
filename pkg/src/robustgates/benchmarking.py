"""Simulated single-qubit randomized benchmarking.

Cliffords are decomposed into the physical gates {X90, -X90, Y90, -Y90}, all
realized by one X90 pulse envelope with the drive phase shifted in quarter
turns. A virtual Z may precede each physical pulse; it is folded into the
drive phase of that and all later pulses (a running frame), so it costs no
time and no physical gate. Under this rule the minimal decompositions of the
24 Cliffords use 0, 1 or 2 pulses, 1.25 on average.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .model import ErrorPoint, TransmonParams, mhz, to_mhz
from .propagation import (
    apply_superop,
    evolve,
    frame_rotation,
    pulse_channel,
    rotation_about_axis,
    unitary_superop,
)
from .pulses import DragPulse, FourierPulse, SampledPulse, sample_pulse

log = logging.getLogger(__name__)

# drive phase of each physical gate, in quarter turns
PHYSICAL_OPS = {"X90": 0, "Y90": 1, "-X90": 2, "-Y90": 3}
PAPER_A = 0.435
PAPER_B = 0.507


@dataclass(frozen=True)
class CliffordElement:
    """One Clifford: ``physical_ops[k]`` is preceded by a virtual Z of angle
    ``virtual_z_phases[k]``; the element's unitary is
    ``O_L Z(theta_L) ... O_1 Z(theta_1)``."""

    index: int
    physical_ops: Tuple[str, ...]
    virtual_z_phases: Tuple[float, ...]

    @property
    def n_physical(self):
        return len(self.physical_ops)

    @property
    def z_quarters(self):
        return tuple(int(round(t / (np.pi / 2))) % 4 for t in self.virtual_z_phases)

    def unitary(self):
        """Ideal qubit unitary (2x2)."""
        u = np.eye(2, dtype=complex)
        for op, theta in zip(self.physical_ops, self.virtual_z_phases):
            u = _ideal_op(op) @ _z2(theta) @ u
        return u


def _z2(theta):
    return np.diag([1.0, np.exp(1j * theta)])


def _ideal_op(name):
    return rotation_about_axis(np.pi / 2, PHYSICAL_OPS[name] * np.pi / 2)[:2, :2]


def same_up_to_phase(u, v, tol=1e-10):
    d = u.shape[0]
    return abs(abs(np.trace(u.conj().T @ v)) - d) < tol


def _generate_group():
    gens = [_ideal_op("X90"), _z2(np.pi / 2)]
    group = [np.eye(2, dtype=complex)]
    frontier = list(group)
    while frontier:
        new = []
        for g in frontier:
            for h in gens:
                m = h @ g
                if not any(same_up_to_phase(m, x) for x in group):
                    group.append(m)
                    new.append(m)
        frontier = new
    return group


def _build_table():
    group = _generate_group()
    if len(group) != 24:
        raise RuntimeError("Clifford group generation failed")
    found: Dict[int, Tuple] = {}
    ops = list(PHYSICAL_OPS)
    angles = [0.0, np.pi / 2, np.pi, 3 * np.pi / 2]
    for length in range(0, 3):
        for word in itertools.product(ops, repeat=length):
            for zs in itertools.product(angles, repeat=length):
                el = CliffordElement(-1, tuple(word), tuple(zs))
                u = el.unitary()
                for gi, g in enumerate(group):
                    if gi not in found and same_up_to_phase(u, g):
                        found[gi] = (word, zs)
                        break
        if len(found) == 24:
            break
    # order: by physical-op count, then by discovery
    order = sorted(found, key=lambda gi: (len(found[gi][0]), list(found).index(gi)))
    return tuple(CliffordElement(i, tuple(found[gi][0]), tuple(found[gi][1])) for i, gi in enumerate(order))


_TABLE = None


def clifford_table():
    """The 24 single-qubit Cliffords with minimal pulse counts (cached)."""
    global _TABLE
    if _TABLE is None:
        _TABLE = _build_table()
    return _TABLE


def mean_physical_ops():
    return float(np.mean([c.n_physical for c in clifford_table()]))


def _lookup(u):
    for c in clifford_table():
        if same_up_to_phase(c.unitary(), u):
            return c.index
    raise ValueError("matrix is not a Clifford")


_MULT = None
_INV = None


def _group_tables():
    global _MULT, _INV
    if _MULT is None:
        tab = clifford_table()
        us = [c.unitary() for c in tab]
        mult = np.empty((24, 24), dtype=int)
        for i, j in itertools.product(range(24), repeat=2):
            mult[i, j] = _lookup(us[i] @ us[j])  # apply j first, then i
        inv = np.array([int(np.where(mult[i] == 0)[0][0]) for i in range(24)])
        _MULT, _INV = mult, inv
    return _MULT, _INV


def rb_sequence(n_cliffords, rng_seed):
    """``n_cliffords`` uniform random Cliffords plus the recovery element."""
    if n_cliffords < 1:
        raise ValueError("n_cliffords must be >= 1")
    rng = np.random.default_rng(rng_seed)
    idx = rng.integers(0, 24, size=n_cliffords)
    return [clifford_table()[i] for i in idx], clifford_table()[_recovery_index(idx)]


def _recovery_index(indices):
    mult, inv = _group_tables()
    total = 0
    for i in indices:
        total = mult[i, total]
    return int(inv[total])


# -- simulation engine ----------------------------------------------------

def _phase_maps(base, superop):
    """The X90 action at each drive phase (quarter turns)."""
    out = []
    for q in range(4):
        r = frame_rotation(q * np.pi / 2)
        if superop:
            rs = unitary_superop(r)
            out.append(rs @ base @ rs.conj().T)
        else:
            out.append(r @ base @ r.conj().T)
    return out


def _clifford_maps(phase_maps):
    """Per (clifford, incoming frame) matrix and outgoing frame."""
    dim = phase_maps[0].shape[0]
    mats = np.empty((24, 4, dim, dim), dtype=complex)
    frame_out = np.empty((24, 4), dtype=int)
    for c in clifford_table():
        for f in range(4):
            m = np.eye(dim, dtype=complex)
            frame = f
            for op, zq in zip(c.physical_ops, c.z_quarters):
                frame = (frame + zq) % 4
                m = phase_maps[(PHYSICAL_OPS[op] - frame) % 4] @ m
            mats[c.index, f] = m
            frame_out[c.index, f] = frame
    return mats, frame_out


def _run_sequences(mats, frame_out, seqs, state0, clifford_noise=None):
    """Apply batches of Clifford index sequences (R, m) to ``state0``."""
    r, m = seqs.shape
    state = np.tile(state0, (r, 1))
    frame = np.zeros(r, dtype=int)
    for k in range(m):
        c = seqs[:, k]
        state = np.einsum("rij,rj->ri", mats[c, frame], state)
        frame = frame_out[c, frame]
        if clifford_noise is not None:
            state = state @ clifford_noise.T
    return state


def survival_probabilities(op_map, lengths, n_random, rng, clifford_noise=None):
    """Ground-state survival for ``n_random`` sequences at each length.

    ``op_map`` is the X90 action: a 3x3 unitary or a 9x9 superoperator.
    Returns an array of shape ``(len(lengths), n_random)``.
    """
    op_map = np.asarray(op_map, dtype=complex)
    superop = op_map.shape == (9, 9)
    if clifford_noise is not None and not superop:
        op_map = unitary_superop(op_map)
        superop = True
    mats, frame_out = _clifford_maps(_phase_maps(op_map, superop))
    if superop:
        state0 = np.zeros(9, dtype=complex)
        state0[0] = 1.0
    else:
        state0 = np.array([1.0, 0.0, 0.0], dtype=complex)
    out = np.empty((len(lengths), n_random))
    for li, length in enumerate(lengths):
        seqs = rng.integers(0, 24, size=(n_random, int(length)))
        rec = np.array([_recovery_index(s) for s in seqs])
        full = np.concatenate([seqs, rec[:, None]], axis=1)
        final = _run_sequences(mats, frame_out, full, state0, clifford_noise)
        out[li] = final[:, 0].real if superop else np.abs(final[:, 0]) ** 2
    return np.clip(out, 0.0, 1.0)


def spam_errors(a=PAPER_A, b=PAPER_B):
    """Assignment errors ``(e0, e1)`` that map ideal RB decay ``p^m/2 + 1/2``
    onto ``a p^m + b``. ``e0``: |0> read as 1; ``e1``: |1> read as 0."""
    return 1.0 - a - b, b - a


def apply_spam(survival, a=PAPER_A, b=PAPER_B):
    e0, e1 = spam_errors(a, b)
    survival = np.asarray(survival)
    return (1.0 - e0) * survival + e1 * (1.0 - survival)


# -- results and fitting --------------------------------------------------

@dataclass
class RbOutcome:
    lengths: List[int]
    seq_fidelity_mean: List[float]
    seq_fidelity_std: List[float]
    fitted_gate_error: float
    fit_A: float
    fit_B: float
    fit_p: float
    mean_std_over_lengths: float
    fit_ok: bool = True
    fit_message: str = ""
    n_g: float = 1.25

    def to_json(self):
        d = asdict(self)
        return json.dumps(d, indent=2)


def _rb_model(m, a, p, b):
    return a * p**m + b


def fit_rb(lengths, means, n_g=None, d=2):
    """Fit ``A p^m + B`` and convert to a per-physical-gate error.

    Returns ``(A, B, p, gate_error, ok, message)``; never raises.
    """
    n_g = mean_physical_ops() if n_g is None else n_g
    m = np.asarray(lengths, dtype=float)
    y = np.asarray(means, dtype=float)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(m))):
        return float("nan"), float("nan"), float("nan"), float("nan"), False, "non-finite input"
    if np.all(y >= 1.0 - 1e-12):
        return 1.0 - 1.0 / d, 1.0 / d, 1.0, 0.0, True, "no decay"
    b0 = 1.0 / d
    a0 = max(y[0] - b0, 1e-3)
    ratio = np.clip((y - b0) / a0, 1e-6, 1.0)
    p0 = float(np.clip(np.exp(np.polyfit(m, np.log(ratio), 1)[0]), 0.5, 1.0 - 1e-9))
    msg = ""
    # least_squares rather than curve_fit: no covariance warnings, which are not thread-safe to silence
    free = least_squares(lambda q: _rb_model(m, *q) - y, [a0, p0, b0], bounds=([0, 0, 0], [1, 1, 1]),
                         x_scale="jac", max_nfev=20000)
    jac = free.jac
    ok = bool(free.success and np.all(np.isfinite(free.x)) and np.linalg.cond(jac.T @ jac) < 1e14)
    if ok:
        a, p, b = free.x
    else:
        msg = f"free fit unstable ({free.message}); B fixed at {b0}"
        fixed = least_squares(lambda q: _rb_model(m, q[0], q[1], b0) - y, [a0, p0], bounds=([0, 0], [1, 1]),
                              x_scale="jac", max_nfev=20000)
        if not (fixed.success and np.all(np.isfinite(fixed.x))):
            return float("nan"), float("nan"), float("nan"), float("nan"), False, f"{msg}; {fixed.message}"
        (a, p), b = fixed.x, b0
        ok = True
    err = (1.0 - p) * (1.0 - 1.0 / d) / n_g
    return float(a), float(b), float(p), float(max(err, 0.0)), ok, msg


def _op_map_for(pulse, params, err, noise, dt):
    if isinstance(pulse, np.ndarray):
        return pulse
    sp = pulse if isinstance(pulse, SampledPulse) else sample_pulse(pulse, dt)
    if noise == "unitary":
        return evolve(sp, params, err)[0]
    if noise == "lindblad":
        return pulse_channel(sp, params, err)
    raise ValueError(f"unknown noise model {noise!r}")


def simulate_rb(pulse, params: TransmonParams, err: ErrorPoint = ErrorPoint(), lengths=(1, 10, 25, 50, 100, 200),
                n_random=30, noise="unitary", rng_seed=0, spam=False, a=PAPER_A, b=PAPER_B, dt=0.5e-9):
    """Full RB curve for an X90 pulse at one error point.

    ``pulse`` may be a Fourier/DRAG/sampled pulse, or directly the X90
    action (3x3 unitary or 9x9 superoperator).
    """
    op_map = _op_map_for(pulse, params, err, noise, dt)
    rng = np.random.default_rng(rng_seed)
    surv = survival_probabilities(op_map, lengths, n_random, rng)
    if spam:
        surv = apply_spam(surv, a, b)
    means = surv.mean(axis=1)
    stds = surv.std(axis=1)
    n_g = mean_physical_ops()
    fa, fb, fp, ferr, ok, msg = fit_rb(lengths, means, n_g)
    if not ok:
        log.warning("RB fit did not converge: %s", msg)
    return RbOutcome(
        lengths=[int(x) for x in lengths],
        seq_fidelity_mean=means.tolist(),
        seq_fidelity_std=stds.tolist(),
        fitted_gate_error=ferr,
        fit_A=fa,
        fit_B=fb,
        fit_p=fp,
        mean_std_over_lengths=float(np.mean(stds)),
        fit_ok=ok,
        fit_message=msg,
        n_g=n_g,
    )


def proxy_fidelity(gate_error, n_c, a=PAPER_A, b=PAPER_B, n_g=1.25):
    """Single-length sequence fidelity ``a (1 - E)^(n_c n_g) + b``."""
    return a * (1.0 - np.asarray(gate_error, dtype=float)) ** (n_c * n_g) + b


def invert_proxy(seq_fidelity, n_c, a=PAPER_A, b=PAPER_B, n_g=1.25):
    """Gate error implied by a single-length sequence fidelity."""
    ratio = np.clip((np.asarray(seq_fidelity, dtype=float) - b) / a, 1e-300, 1.0)
    return 1.0 - ratio ** (1.0 / (n_c * n_g))


# -- landscape ----------------------------------------------------------

@dataclass
class Landscape:
    deltas: np.ndarray
    gammas: np.ndarray
    seq_error_mean: np.ndarray
    seq_error_std: np.ndarray
    derived_gate_error: np.ndarray
    thresholds: Tuple[float, ...] = (5e-3, 1e-2)
    n_c: int = 60
    masks: Dict[float, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.masks:
            self.masks = {t: self.derived_gate_error <= t for t in self.thresholds}

    def fraction_below(self, threshold, cells=None):
        mask = self.derived_gate_error <= threshold
        return float(np.mean(mask if cells is None else mask[cells]))

    def rows(self):
        for i, d in enumerate(self.deltas):
            for j, g in enumerate(self.gammas):
                yield i, j, d, g

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta_mhz", "gamma_mhz", "seq_error_mean", "seq_error_std", "derived_gate_error"])
            for i, j, d, g in self.rows():
                w.writerow([f"{to_mhz(d):.6g}", f"{to_mhz(g):.6g}", f"{self.seq_error_mean[i, j]:.8e}",
                            f"{self.seq_error_std[i, j]:.8e}", f"{self.derived_gate_error[i, j]:.8e}"])

    def write_mask_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta_mhz", "gamma_mhz"] + [f"mask_{t:g}" for t in self.thresholds])
            for i, j, d, g in self.rows():
                w.writerow([f"{to_mhz(d):.6g}", f"{to_mhz(g):.6g}"] + [int(self.masks[t][i, j]) for t in self.thresholds])


def _cell(args):
    pulse_sp, params, d, g, n_c, n_random, seed, cell, spam, a, b, n_g = args
    u = evolve(pulse_sp, params, ErrorPoint(d, g))[0]
    rng = np.random.default_rng([seed, cell])
    surv = survival_probabilities(u, [n_c], n_random, rng)[0]
    fseq = apply_spam(surv, a, b) if spam else surv
    derived = invert_proxy(np.mean(apply_spam(surv, a, b)), n_c, a, b, n_g)
    return 1.0 - fseq.mean(), fseq.std(), derived


def landscape_scan(pulse, params: TransmonParams, delta_range, gamma_range, grid=(21, 21), n_c=60, n_random=10,
                   rng_seed=0, spam=False, a=PAPER_A, b=PAPER_B, n_g=1.25, dt=0.5e-9, threads=None):
    """Single-length RB sequence error on a (delta, gamma) grid (unitary dynamics).

    ``delta_range`` and ``gamma_range`` are ``(min, max)`` in rad/s. The
    derived gate error inverts ``a (1-E)^(n_c n_g) + b`` after passing the
    survival through the assignment-error channel that reproduces ``a, b``,
    so it is the same whether ``spam`` is on or off; ``spam`` only changes
    the reported sequence error.
    """
    n1, n2 = grid
    if n1 < 1 or n2 < 1:
        raise ValueError("grid dimensions must be >= 1")
    deltas = np.linspace(*delta_range, n1) if n1 > 1 else np.array([0.5 * (delta_range[0] + delta_range[1])])
    gammas = np.linspace(*gamma_range, n2) if n2 > 1 else np.array([0.5 * (gamma_range[0] + gamma_range[1])])
    sp = pulse if isinstance(pulse, SampledPulse) else sample_pulse(pulse, dt)
    jobs = [(sp, params, d, g, n_c, n_random, rng_seed, i * n2 + j, spam, a, b, n_g)
            for i, d in enumerate(deltas) for j, g in enumerate(gammas)]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(_cell, jobs))
    else:
        res = [_cell(j) for j in jobs]
    arr = np.array(res).reshape(n1, n2, 3)
    return Landscape(deltas, gammas, arr[..., 0], arr[..., 1], arr[..., 2], n_c=n_c)


def write_rb_csv(outcome: RbOutcome, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["length", "seq_fidelity_mean", "seq_fidelity_std"])
        for m, mu, sd in zip(outcome.lengths, outcome.seq_fidelity_mean, outcome.seq_fidelity_std):
            w.writerow([m, f"{mu:.10g}", f"{sd:.10g}"])


def clifford_table_text():
    lines = ["idx  n  decomposition (Z(theta) applied before each pulse)"]
    for c in clifford_table():
        parts = [f"Z({int(round(np.degrees(t)))}) {op}" for op, t in zip(c.physical_ops, c.virtual_z_phases)]
        lines.append(f"{c.index:>3d}  {c.n_physical}  " + (" ; ".join(parts) if parts else "I"))
    return "\n".join(lines)
