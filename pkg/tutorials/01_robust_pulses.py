"""
Robust pulses on a three-level transmon
=======================================

How the two stored robust X90 pulses behave under detuning and amplitude
errors, compared with a plain DRAG pulse.
"""

# %%
# The device: anharmonicity and maximum Rabi rate are given in MHz and
# converted to angular frequency internally.
import numpy as np

from robustgates import ErrorPoint, builtin_pulse, default_transmon, drag_for_rotation, evolve, gate_error, mhz
from robustgates import sample_pulse
from robustgates.pulses import default_drag_beta
from robustgates.propagation import leakage

params = default_transmon(with_coherence=False)
print(params)

# %%
# Three X90 pulses. FROG targets detuning, AROG targets detuning and
# amplitude together; DRAG is the reference.
pulses = {
    "DRAG": drag_for_rotation(128e-9, beta=default_drag_beta(params.anharmonicity_alpha)),
    "FROG": builtin_pulse("FROG"),
    "AROG": builtin_pulse("AROG"),
}
dt = 0.5e-9
for name, p in pulses.items():
    u = evolve(sample_pulse(p, dt), params)[0]
    print(f"{name}: gate error {gate_error(u):.2e}, leakage {leakage(u):.1e}")

# %%
# Gate error across a detuning sweep. The robust pulses stay low over a
# much wider band.
deltas = np.linspace(-0.7, 0.7, 8)
print("delta [MHz] " + "".join(f"{n:>10s}" for n in pulses))
for d in deltas:
    row = [gate_error(evolve(sample_pulse(p, dt), params, ErrorPoint(mhz(d), 0.0))[0]) for p in pulses.values()]
    print(f"{d:+10.2f}  " + "".join(f"{e:10.1e}" for e in row))

# %%
# The same for amplitude errors: only AROG was built for this axis.
gammas = np.linspace(-3.5, 3.5, 8)
print("gamma [MHz] " + "".join(f"{n:>10s}" for n in pulses))
for g in gammas:
    row = [gate_error(evolve(sample_pulse(p, dt), params, ErrorPoint(0.0, mhz(g)))[0]) for p in pulses.values()]
    print(f"{g:+10.2f}  " + "".join(f"{e:10.1e}" for e in row))

# %%
# A coarse landscape in the benchmarking picture: each cell is a
# single-length RB sequence error converted to a gate error. ``#`` marks
# cells below 5e-3, ``+`` below 1e-2.
from robustgates import landscape_scan

land = landscape_scan(pulses["AROG"], params, (mhz(-0.7), mhz(0.7)), (mhz(-3.5), mhz(3.5)), grid=(15, 15),
                      n_c=60, n_random=10, threads=4)
for row in land.derived_gate_error:
    print("".join("#" if e <= 5e-3 else "+" if e <= 1e-2 else "." for e in row))
