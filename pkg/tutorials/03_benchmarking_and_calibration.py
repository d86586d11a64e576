"""
Benchmarking and calibration
============================

Clifford decompositions with virtual Z, simulated randomized
benchmarking, and the calibration sequences used to keep a pulse tuned.
"""

# %%
import numpy as np

from robustgates import ErrorPoint, default_transmon, drag_for_rotation, mhz, simulate_rb
from robustgates.benchmarking import clifford_table_text, mean_physical_ops, proxy_fidelity
from robustgates.calibration import amplitude_sweep, error_amp_extract, ramsey_estimate, t1_estimate
from robustgates.pulses import default_drag_beta

params = default_transmon()
drag = drag_for_rotation(128e-9, beta=default_drag_beta(params.anharmonicity_alpha))

# %%
# The decomposition table: every Clifford needs at most two physical
# pulses, 1.25 on average.
print(clifford_table_text())
print("mean physical ops:", mean_physical_ops())

# %%
# RB with unitary dynamics and then with relaxation and dephasing.
for noise in ("unitary", "lindblad"):
    out = simulate_rb(drag, params, lengths=(1, 10, 25, 50, 100, 200), n_random=20, noise=noise)
    print(f"{noise:9s} E_g = {out.fitted_gate_error:.2e}  (p = {out.fit_p:.5f})")

# %%
# The single-length proxy with the readout constants used for contours.
for e in (0.0, 1e-3, 5e-3, 1e-2):
    print(f"E = {e:.0e}  F_seq(60) = {proxy_fidelity(e, 60):.4f}")

# %%
# Amplitude sweep: the scale at which one pulse leaves half the population
# excited, and the local slope there.
sweep = amplitude_sweep(drag, params, np.linspace(0.8, 1.2, 9))
print(f"scale {sweep.scale:.5f}, slope {sweep.slope:.3f}")

# %%
# Error amplification recovers an injected amplitude error.
om = params.rabi_max_omega0
res = error_amp_extract(drag, params, ErrorPoint(0.0, 0.01 * om))
print(f"injected gamma/Omega0 = 0.0100, fitted {res.residual_gamma / om:.4f}, correction {res.amplitude_scale:.5f}")

# %%
# Ramsey and T1 give the coherence times back, and with them T_phi.
est = ramsey_estimate(params, ErrorPoint(mhz(0.1), 0.0))
t1 = t1_estimate(params)
est = est.with_t1(t1.t1)
print(f"offset {est.frequency_offset / mhz(1):.4f} MHz, T2* {est.t2_star * 1e6:.2f} us, "
      f"T1 {est.t1 * 1e6:.2f} us, T_phi {est.tphi * 1e6:.2f} us")
