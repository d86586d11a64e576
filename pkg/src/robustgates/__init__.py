"""Ensemble-robust single-qubit gates for a three-level transmon.

Modules
-------
model        Hamiltonian, parameters and units.
pulses       Fourier and DRAG pulse shapes, sampling, file formats.
propagation  Unitary and Lindblad time evolution, gate error.
grape        Ensemble-averaged GRAPE with analytic gradients.
benchmarking Simulated randomized benchmarking and robustness landscapes.
calibration  Amplitude, error-amplification, Ramsey and T1 experiments.
drift        Drift campaigns and ridge-regression sensitivities.
"""

__version__ = "0.1.0"

from .model import ErrorPoint, TransmonParams, default_transmon, mhz, to_mhz
from .pulses import DragPulse, FourierPulse, SampledPulse, builtin_pulse, drag_for_rotation, sample_pulse
from .propagation import X_PI2, evolve, gate_error, pulse_channel
from .grape import ErrorEnsemble, GrapeConfig, optimize, optimize_multistart
from .benchmarking import clifford_table, landscape_scan, proxy_fidelity, simulate_rb
from .drift import analytical_t1_sensitivity, generate_campaign, ridge_fit
