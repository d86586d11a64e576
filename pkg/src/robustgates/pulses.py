"""Pulse parametrizations: Fourier ansatz, DRAG reference and sampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .model import NS, ControlSample, mhz, to_mhz

N_COEFFS = 5

# Fourier coefficients of the two robust pulses; t_g in ns.
_BUILTIN = {
    "FROG": dict(
        a=(-0.6137, -0.0247, 0.0742, 0.0507, 0.0149),
        b=(-0.0106, 0.0334, 0.0579, 0.0140, -0.0416),
        tg_ns=112.0,
        eta=0.55,
    ),
    "AROG": dict(
        a=(0.3492, -0.2470, -0.2474, -0.0773, 0.0352),
        b=(0.0859, -0.4581, -0.0206, 0.0213, 0.0614),
        tg_ns=128.0,
        eta=0.46,
    ),
}
BUILTIN_ETA = {name: spec["eta"] for name, spec in _BUILTIN.items()}
DEFAULT_OMEGA0 = mhz(17.7)


def fourier_basis(t, gate_time):
    """Sine bases of shape ``(5, len(t))`` for the x and y quadratures.

    x uses odd harmonics ``sin((2n-1) pi t / t_g)``, y even harmonics
    ``sin(2n pi t / t_g)``; n = 1..5.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = np.arange(1, N_COEFFS + 1)[:, None]
    phase = np.pi * t[None, :] / gate_time
    return np.sin((2 * n - 1) * phase), np.sin(2 * n * phase)


@dataclass(frozen=True)
class FourierPulse:
    """Pulse ``Omega_x = omega0 sum a_n sin((2n-1) pi t/t_g)``,
    ``Omega_y = omega0 sum b_n sin(2n pi t/t_g)``."""

    coeffs_a: tuple
    coeffs_b: tuple
    gate_time_tg: float
    omega0: float = DEFAULT_OMEGA0

    def __post_init__(self):
        a = tuple(float(v) for v in self.coeffs_a)
        b = tuple(float(v) for v in self.coeffs_b)
        if len(a) != N_COEFFS or len(b) != N_COEFFS:
            raise ValueError(f"need exactly {N_COEFFS} coefficients per quadrature")
        if not self.gate_time_tg > 0:
            raise ValueError("gate time must be > 0")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be > 0")
        object.__setattr__(self, "coeffs_a", a)
        object.__setattr__(self, "coeffs_b", b)

    @property
    def vector(self):
        """The 10 coefficients ``(a1..a5, b1..b5)`` as an array."""
        return np.array(self.coeffs_a + self.coeffs_b)

    @classmethod
    def from_vector(cls, x, gate_time_tg, omega0=DEFAULT_OMEGA0):
        x = np.asarray(x, dtype=float)
        return cls(tuple(x[:N_COEFFS]), tuple(x[N_COEFFS:]), gate_time_tg, omega0)

    def scaled(self, factor):
        return FourierPulse.from_vector(factor * self.vector, self.gate_time_tg, self.omega0)

    def values(self, t):
        """Vectorized ``(omega_x, omega_y)`` arrays at times ``t``."""
        bx, by = fourier_basis(t, self.gate_time_tg)
        return self.omega0 * (np.array(self.coeffs_a) @ bx), self.omega0 * (np.array(self.coeffs_b) @ by)


@dataclass(frozen=True)
class DragPulse:
    """Gaussian with a derivative (DRAG) quadrature ``Omega_y = beta dOmega_x/dt``.

    The Gaussian is centred at ``t_g/2`` and baseline-subtracted so both
    end points are exactly zero; ``peak_amplitude`` is the value at the
    centre. ``sigma`` defaults to ``t_g/6``.
    """

    peak_amplitude: float
    gate_time_tg: float
    beta: float = 0.0
    sigma: float = None

    def __post_init__(self):
        if not self.gate_time_tg > 0:
            raise ValueError("gate time must be > 0")
        if self.sigma is None:
            object.__setattr__(self, "sigma", self.gate_time_tg / 6.0)
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    @property
    def _baseline(self):
        return np.exp(-0.5 * (0.5 * self.gate_time_tg / self.sigma) ** 2)

    def area(self):
        """Closed-form integral of Omega_x over the gate."""
        from scipy.special import erf

        half = 0.5 * self.gate_time_tg
        b = self._baseline
        gauss = self.sigma * np.sqrt(2 * np.pi) * erf(half / (np.sqrt(2) * self.sigma))
        return self.peak_amplitude * (gauss - b * self.gate_time_tg) / (1 - b)

    def values(self, t):
        t = np.asarray(t, dtype=float)
        u = t - 0.5 * self.gate_time_tg
        b = self._baseline
        g = np.exp(-0.5 * (u / self.sigma) ** 2)
        ox = self.peak_amplitude * (g - b) / (1 - b)
        dox = -self.peak_amplitude * u / self.sigma**2 * g / (1 - b)
        return ox, self.beta * dox


def drag_for_rotation(gate_time, angle=np.pi / 2, beta=0.0, sigma=None):
    """DRAG pulse whose x-quadrature area equals ``angle``."""
    unit = DragPulse(1.0, gate_time, beta, sigma)
    return DragPulse(angle / unit.area(), gate_time, beta, unit.sigma)


def default_drag_beta(alpha):
    """First-order DRAG coefficient ``-1/(2 alpha)`` (seconds)."""
    return -0.5 / alpha


Pulse = Union[FourierPulse, DragPulse]


def _check_time(pulse, t):
    if not (0.0 <= t <= pulse.gate_time_tg):
        raise ValueError(f"t={t!r} outside [0, t_g]")


def eval_fourier(pulse: FourierPulse, t) -> ControlSample:
    _check_time(pulse, t)
    ox, oy = pulse.values(t)
    return ControlSample(float(ox[0]), float(oy[0]))


def eval_drag(pulse: DragPulse, t) -> ControlSample:
    _check_time(pulse, t)
    ox, oy = pulse.values(t)
    return ControlSample(float(ox), float(oy))


@dataclass(frozen=True)
class SampledPulse:
    """Piecewise-constant controls on a uniform grid of step ``dt``."""

    dt: float
    omega_x: np.ndarray = field(repr=False)
    omega_y: np.ndarray = field(repr=False)

    def __post_init__(self):
        ox = np.array(self.omega_x, dtype=float)
        oy = np.array(self.omega_y, dtype=float)
        if ox.shape != oy.shape or ox.ndim != 1:
            raise ValueError("omega_x and omega_y must be 1-D of equal length")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        ox.setflags(write=False)
        oy.setflags(write=False)
        object.__setattr__(self, "omega_x", ox)
        object.__setattr__(self, "omega_y", oy)

    def __len__(self):
        return len(self.omega_x)

    @property
    def n_steps(self):
        return len(self.omega_x)

    @property
    def duration(self):
        return self.n_steps * self.dt

    @property
    def times(self):
        """Midpoints of the sampling intervals."""
        return (np.arange(self.n_steps) + 0.5) * self.dt

    @property
    def samples(self):
        return [ControlSample(float(x), float(y)) for x, y in zip(self.omega_x, self.omega_y)]

    def with_controls(self, omega_x, omega_y):
        return SampledPulse(self.dt, omega_x, omega_y)

    def phase_shifted(self, phi):
        """Drive phase rotated by ``phi``: ``Omega -> exp(i phi) Omega``."""
        c, s = np.cos(phi), np.sin(phi)
        return SampledPulse(self.dt, c * self.omega_x - s * self.omega_y, s * self.omega_x + c * self.omega_y)

    def scaled(self, factor):
        return SampledPulse(self.dt, factor * self.omega_x, factor * self.omega_y)


def n_steps_for(gate_time, dt):
    ratio = gate_time / dt
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * ratio:
        raise ValueError(f"dt={dt!r} does not divide t_g={gate_time!r}")
    return n


def sample_pulse(pulse: Pulse, dt) -> SampledPulse:
    """Midpoint sampling on ``N = t_g/dt`` intervals."""
    n = n_steps_for(pulse.gate_time_tg, dt)
    t = (np.arange(n) + 0.5) * dt
    ox, oy = pulse.values(t)
    return SampledPulse(dt, ox, oy)


def check_constraints(pulse: FourierPulse, eta, dt):
    """Largest amount (rad/s) by which a sampled quadrature exceeds ``eta * omega0``.

    Zero means the pulse is feasible.
    """
    if not eta > 0:
        raise ValueError("eta must be > 0")
    sp = sample_pulse(pulse, dt)
    bound = eta * pulse.omega0
    excess = max(np.max(np.abs(sp.omega_x)), np.max(np.abs(sp.omega_y))) - bound
    return max(float(excess), 0.0)


def builtin_pulse(name, omega0=DEFAULT_OMEGA0) -> FourierPulse:
    """The FROG (112 ns) or AROG (128 ns) pulse from its stored coefficients."""
    key = name.upper()
    if key == "AFROG":
        key = "AROG"
    if key not in _BUILTIN:
        raise KeyError(f"unknown builtin pulse {name!r}; choose from {sorted(_BUILTIN)}")
    spec = _BUILTIN[key]
    return FourierPulse(spec["a"], spec["b"], spec["tg_ns"] * NS, omega0)


def half_sine_start(gate_time, omega0=DEFAULT_OMEGA0, angle=np.pi / 2):
    """a1 set for a rotation of ``angle`` by pulse area, everything else zero."""
    a1 = angle * np.pi / (2.0 * omega0 * gate_time)
    return FourierPulse((a1, 0, 0, 0, 0), (0,) * N_COEFFS, gate_time, omega0)


def random_start(gate_time, rng, omega0=DEFAULT_OMEGA0, spread=0.3):
    x = rng.uniform(-spread, spread, size=2 * N_COEFFS)
    return FourierPulse.from_vector(x, gate_time, omega0)


# -- file formats -----------------------------------------------------------

def format_pulse(pulse: FourierPulse) -> str:
    lines = [f"gate_time_ns = {pulse.gate_time_tg / NS!r}", f"omega0_mhz = {to_mhz(pulse.omega0)!r}"]
    lines += [f"a{i + 1} = {v!r}" for i, v in enumerate(pulse.coeffs_a)]
    lines += [f"b{i + 1} = {v!r}" for i, v in enumerate(pulse.coeffs_b)]
    return "\n".join(lines) + "\n"


def parse_pulse(text: str) -> FourierPulse:
    values = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"malformed pulse line: {raw!r}")
        values[key.strip().lower()] = float(val)
    try:
        a = [values[f"a{i}"] for i in range(1, N_COEFFS + 1)]
        b = [values[f"b{i}"] for i in range(1, N_COEFFS + 1)]
        tg = values["gate_time_ns"] * NS
        omega0 = mhz(values["omega0_mhz"])
    except KeyError as exc:
        raise ValueError(f"pulse file missing key {exc.args[0]!r}") from None
    return FourierPulse(a, b, tg, omega0)


def save_pulse(pulse: FourierPulse, path):
    Path(path).write_text(format_pulse(pulse))


def load_pulse(path) -> FourierPulse:
    return parse_pulse(Path(path).read_text())


def write_sampled_csv(sp: SampledPulse, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# dt_ns={sp.dt / NS!r}\n")
        w = csv.writer(fh)
        w.writerow(["omega_x_mhz", "omega_y_mhz"])
        for x, y in zip(to_mhz(sp.omega_x), to_mhz(sp.omega_y)):
            w.writerow([repr(float(x)), repr(float(y))])


def read_sampled_csv(path) -> SampledPulse:
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("# dt_ns="):
            raise ValueError("missing '# dt_ns=' header")
        dt = float(header.split("=", 1)[1]) * NS
        rows = list(csv.DictReader(fh))
    ox = mhz([float(r["omega_x_mhz"]) for r in rows])
    oy = mhz([float(r["omega_y_mhz"]) for r in rows])
    return SampledPulse(dt, ox, oy)


def coefficient_table(pulses: Sequence[FourierPulse], names: Sequence[str]) -> str:
    head = "      " + "".join(f"{n:>10s}" for n in names)
    rows = [head]
    for label, idx in [(f"a{i + 1}", i) for i in range(N_COEFFS)] + [(f"b{i + 1}", N_COEFFS + i) for i in range(N_COEFFS)]:
        rows.append(f"{label:<6s}" + "".join(f"{p.vector[idx]:>10.4f}" for p in pulses))
    return "\n".join(rows)
