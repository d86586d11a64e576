"""
Drift campaigns and sensitivities
=================================

Simulate a campaign in which the device parameters wander, then regress
gate errors on the parameters to get per-gate sensitivities.
"""

# %%
import numpy as np

from robustgates import analytical_t1_sensitivity, default_transmon, generate_campaign, ridge_fit
from robustgates.drift import campaign_parameters, sensitivity_report
from robustgates.model import to_mhz

params = default_transmon()

# %%
# The parameter trajectories of the amplitude-ramp scenario.
gam, gphi, g1 = campaign_parameters(0, 110, "day10-amplitude-ramp")
print(f"gamma/2pi peaks at {np.max(np.abs(to_mhz(gam))):.2f} MHz")
print(f"T_phi ranges {1e6 / gphi.max():.1f} to {1e6 / gphi.min():.1f} us")

# %%
# A campaign where only T1 varies. Each sample runs Lindblad RB for all
# three gates, so this takes a few seconds.
samples = generate_campaign(0, 110, "t1-only", params, threads=4)
fit = ridge_fit(samples)
print(sensitivity_report(fit, {"DRAG": 128e-9, "FROG": 112e-9, "AROG": 128e-9}))

# %%
# The fitted relaxation sensitivity against t_g / 3.
for gate, tg in (("DRAG", 128e-9), ("FROG", 112e-9), ("AROG", 128e-9)):
    print(f"{gate}: fitted {fit.weight(gate, 'gamma_1'):.3e}, t_g/3 = {analytical_t1_sensitivity(tg):.3e} per MHz")
