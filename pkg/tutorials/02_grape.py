"""
Ensemble GRAPE
==============

Optimizing the ten Fourier coefficients of an X90 pulse against an
ensemble of detunings, with an amplitude bound.
"""

# %%
import numpy as np

from robustgates import ErrorEnsemble, GrapeConfig, default_transmon, optimize
from robustgates.grape import cost_and_fourier_grad, fd_fourier_grad, point_errors
from robustgates.pulses import check_constraints, format_pulse, half_sine_start

params = default_transmon(with_coherence=False)

# %%
# The analytic gradient against central differences of the exact cost.
ens = ErrorEnsemble.from_mhz((-0.5, 0.5), 5)
cfg = GrapeConfig(eta=0.55, max_iters=80)
start = half_sine_start(112e-9)
cost, grad = cost_and_fourier_grad(start, params, ens, cfg)
fd = fd_fourier_grad(start, params, ens, cfg)
print(f"start cost {cost:.3e}")
print("largest gradient mismatch relative to the largest component:",
      f"{np.max(np.abs(grad - fd)) / np.max(np.abs(fd)):.1e}")

# %%
# A short optimization. The amplitude bound is a penalty that tightens
# until the sampled pulse respects it.
res = optimize(start, params, ens, cfg)
print(f"{res.stop_reason} after {res.n_iters} iterations: J = {res.ensemble_cost:.3e}, feasible = {res.feasible}")
print(format_pulse(res.pulse))
print(f"bound excess: {check_constraints(res.pulse, cfg.eta, cfg.dt):.1f} rad/s")

# %%
# Error at each ensemble point before and after.
before = point_errors(start, params, ens, cfg).ravel()
after = point_errors(res.pulse, params, ens, cfg).ravel()
for d, b, a in zip(ens.deltas, before, after):
    print(f"delta/2pi = {d / 2 / np.pi / 1e6:+.2f} MHz   {b:.2e} -> {a:.2e}")
