"""Command-line interface.

Usage::

    python -m robustgates {optimize,scan,rb,calibrate,drift} [--config PATH] [--out DIR]
                          [--seed N] [--threads N] [--strict]

The config is an INI file (sections ``qubit``, ``pulse``, ``optimize``,
``scan``, ``rb``, ``calibrate``, ``drift``, ``run``) or a JSON object with
the same nesting; a previous run's ``manifest.json`` is accepted too.
Frequencies are in MHz, times in ns or us as suffixed in the key names. Every run writes ``manifest.json`` next to its artifacts.

Exit codes: 0 ok, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np
import scipy

from . import __version__
from .benchmarking import PAPER_A, PAPER_B, landscape_scan, simulate_rb, write_rb_csv
from .calibration import (
    FitError,
    amplitude_sweep,
    error_amp_extract,
    error_amp_populations,
    ramsey_estimate,
    ramsey_populations,
    t1_estimate,
    t1_populations,
    write_trace_csv,
)
from .drift import (
    SCENARIOS,
    default_gate_set,
    generate_campaign,
    ridge_fit,
    sensitivity_report,
    write_campaign_csv,
    write_fit_json,
)
from .grape import ErrorEnsemble, GrapeConfig, optimize_multistart
from .model import NS, US, ErrorPoint, TransmonParams, mhz, tphi_from_t2star
from .propagation import X_PI2
from .pulses import builtin_pulse, default_drag_beta, drag_for_rotation, load_pulse, save_pulse

log = logging.getLogger("robustgates")

DEFAULTS: Dict[str, Dict[str, str]] = {
    "qubit": {"alpha_mhz": "-295.1", "omega0_mhz": "17.7", "t1_us": "45.5", "t2star_us": "16.81", "tphi_us": ""},
    "pulse": {"builtin": "FROG", "file": "", "drag_ns": ""},
    "optimize": {"gate_time_ns": "112", "dt_ns": "0.5", "eta": "0.55", "delta_range_mhz": "-0.5, 0.5",
                 "n_delta": "21", "gamma_range_mhz": "0, 0", "n_gamma": "1", "max_iters": "300", "n_starts": "1",
                 "target_cost": "5e-3"},
    "scan": {"delta_range_mhz": "-0.7, 0.7", "gamma_range_mhz": "-3.5, 3.5", "grid": "21, 21", "n_c": "60",
             "n_random": "10", "a": str(PAPER_A), "b": str(PAPER_B), "n_g": "1.25", "spam": "false", "dt_ns": "0.5"},
    "rb": {"lengths": "1, 10, 25, 50, 100, 200", "n_random": "30", "noise": "unitary", "delta_mhz": "0",
           "gamma_mhz": "0", "spam": "false", "dt_ns": "0.5"},
    "calibrate": {"delta_mhz": "0", "gamma_mhz": "0", "n_max": "34", "ramsey_detuning_mhz": "0.5",
                  "ramsey_max_us": "50", "ramsey_points": "1001", "t1_points": "201", "scale_min": "0.5",
                  "scale_max": "1.5", "scale_points": "21", "dt_ns": "0.5"},
    "drift": {"scenario": "day10-amplitude-ramp", "n_samples": "110", "lambda": "auto", "n_random": "20",
              "lengths": "1, 5, 10, 25, 50, 100, 200, 400"},
    "run": {"seed": "0", "out": "results"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Resolved configuration: every section with defaults filled in (strings)."""

    sections: Dict[str, Dict[str, str]] = field(default_factory=dict)
    source: str = ""

    @classmethod
    def from_mapping(cls, data, source=""):
        merged = {k: dict(v) for k, v in DEFAULTS.items()}
        for sec, values in data.items():
            if sec not in merged:
                raise ConfigError(f"unknown config section [{sec}]")
            if not isinstance(values, dict):
                raise ConfigError(f"section [{sec}] must be a mapping")
            for key, val in values.items():
                if key not in merged[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                if isinstance(val, (list, tuple)):
                    val = ", ".join(str(v) for v in val)
                merged[sec][key] = str(val).lower() if isinstance(val, bool) else str(val)
        return cls(merged, source)

    @classmethod
    def load(cls, path):
        if path is None:
            return cls.from_mapping({}, "<defaults>")
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        text = p.read_text()
        if p.suffix.lower() == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON config: {exc}") from None
            if isinstance(data, dict) and "config" in data and "command" in data:
                data = data["config"]  # a run manifest
        else:
            cp = configparser.ConfigParser()
            try:
                cp.read_string(text, source=str(p))
            except configparser.Error as exc:
                raise ConfigError(f"invalid config: {exc}") from None
            data = {s: dict(cp[s]) for s in cp.sections()}
        return cls.from_mapping(data, str(p))

    def get(self, sec, key):
        return self.sections[sec][key]

    def float(self, sec, key):
        try:
            return float(self.get(sec, key))
        except ValueError:
            raise ConfigError(f"[{sec}] {key} must be a number, got {self.get(sec, key)!r}") from None

    def int(self, sec, key, minimum=None):
        try:
            v = int(self.get(sec, key))
        except ValueError:
            raise ConfigError(f"[{sec}] {key} must be an integer, got {self.get(sec, key)!r}") from None
        if minimum is not None and v < minimum:
            raise ConfigError(f"[{sec}] {key} must be >= {minimum}")
        return v

    def bool(self, sec, key):
        v = self.get(sec, key).strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{sec}] {key} must be a boolean")

    def floats(self, sec, key, n=None):
        try:
            vals = [float(v) for v in self.get(sec, key).split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"[{sec}] {key} must be a comma-separated list of numbers") from None
        if n is not None and len(vals) != n:
            raise ConfigError(f"[{sec}] {key} needs {n} values")
        return vals

    def ints(self, sec, key, n=None):
        vals = self.floats(sec, key, n)
        if any(v != int(v) for v in vals):
            raise ConfigError(f"[{sec}] {key} must be integers")
        return [int(v) for v in vals]

    def set(self, sec, key, value):
        self.sections[sec][key] = str(value)

    # -- typed views --

    def qubit(self) -> TransmonParams:
        alpha = self.float("qubit", "alpha_mhz")
        omega0 = self.float("qubit", "omega0_mhz")
        if omega0 <= 0:
            raise ConfigError("[qubit] omega0_mhz must be > 0")
        t1 = self.float("qubit", "t1_us")
        if t1 <= 0:
            raise ConfigError("[qubit] t1_us must be > 0")
        if self.get("qubit", "tphi_us"):
            tphi = self.float("qubit", "tphi_us")
        else:
            try:
                tphi = tphi_from_t2star(self.float("qubit", "t2star_us"), t1)
            except ValueError as exc:
                raise ConfigError(f"[qubit] {exc}") from None
        if tphi <= 0:
            raise ConfigError("[qubit] tphi must be > 0")
        return TransmonParams.from_mhz(alpha, omega0, t1, tphi)

    def pulse(self, params: TransmonParams, allow_ideal=False):
        f = self.get("pulse", "file")
        drag = self.get("pulse", "drag_ns")
        if f:
            if not Path(f).is_file():
                raise ConfigError(f"pulse file not found: {f}")
            try:
                return load_pulse(f)
            except ValueError as exc:
                raise ConfigError(f"bad pulse file: {exc}") from None
        if drag:
            return drag_for_rotation(self.float("pulse", "drag_ns") * NS,
                                     beta=default_drag_beta(params.anharmonicity_alpha))
        name = self.get("pulse", "builtin")
        if name.lower() == "ideal":
            if not allow_ideal:
                raise ConfigError("the ideal pulse is only available for rb")
            return X_PI2.copy()
        try:
            return builtin_pulse(name, params.rabi_max_omega0)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None

    def seed(self):
        return self.int("run", "seed", minimum=0)


def _manifest(cfg: RunConfig, command, out: Path, artifacts, status, failures, extra=None):
    data = {
        "command": command,
        "status": status,
        "failures": failures,
        "seed": cfg.seed(),
        "config": cfg.sections,
        "config_source": cfg.source,
        "artifacts": sorted(artifacts),
        "software": {"robustgates": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "platform": platform.platform()},
    }
    if extra:
        data.update(extra)
    (out / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _error_point(cfg, sec):
    return ErrorPoint.from_mhz(cfg.float(sec, "delta_mhz"), cfg.float(sec, "gamma_mhz"))


def _dt(cfg, sec):
    dt = cfg.float(sec, "dt_ns")
    if dt <= 0:
        raise ConfigError(f"[{sec}] dt_ns must be > 0")
    return dt * NS


# -- commands ---------------------------------------------------------------

def cmd_optimize(cfg: RunConfig, out: Path, threads=None, strict=False):
    params = cfg.qubit()
    eta = cfg.float("optimize", "eta")
    if eta <= 0:
        raise ConfigError("[optimize] eta must be > 0")
    tg = cfg.float("optimize", "gate_time_ns")
    if tg <= 0:
        raise ConfigError("[optimize] gate_time_ns must be > 0")
    ens = ErrorEnsemble.from_mhz(tuple(cfg.floats("optimize", "delta_range_mhz", 2)), cfg.int("optimize", "n_delta", 1),
                                 tuple(cfg.floats("optimize", "gamma_range_mhz", 2)), cfg.int("optimize", "n_gamma", 1))
    try:
        gcfg = GrapeConfig(dt=_dt(cfg, "optimize"), eta=eta, max_iters=cfg.int("optimize", "max_iters", 1),
                           seed=cfg.seed())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    res = optimize_multistart(tg * NS, params, ens, gcfg, n_starts=cfg.int("optimize", "n_starts", 1),
                              target_cost=cfg.float("optimize", "target_cost"))
    save_pulse(res.pulse, out / "pulse.txt")
    with open(out / "cost_history.csv", "w") as fh:
        fh.write("iteration,objective,grad_norm\n")
        for i, (c, g) in enumerate(zip(res.cost_history, res.grad_norm_history)):
            fh.write(f"{i},{c:.12e},{g:.12e}\n")
    failures = [] if res.feasible else [f"pulse violates eta by {res.max_violation:.3e} rad/s"]
    summary = {"ensemble_cost": res.ensemble_cost, "feasible": res.feasible, "n_iters": res.n_iters,
               "stop_reason": res.stop_reason}
    _manifest(cfg, "optimize", out, ["pulse.txt", "cost_history.csv"], "ok" if res.feasible else "infeasible",
              failures, {"result": summary})
    print(f"J = {res.ensemble_cost:.4e}  feasible = {res.feasible}  iterations = {res.n_iters}")
    return 0 if res.feasible else 1


def cmd_scan(cfg: RunConfig, out: Path, threads=None, strict=False):
    params = cfg.qubit()
    pulse = cfg.pulse(params)
    grid = cfg.ints("scan", "grid", 2)
    if min(grid) < 1:
        raise ConfigError("[scan] grid dimensions must be >= 1")
    land = landscape_scan(pulse, params, tuple(mhz(cfg.floats("scan", "delta_range_mhz", 2))),
                          tuple(mhz(cfg.floats("scan", "gamma_range_mhz", 2))), tuple(grid),
                          n_c=cfg.int("scan", "n_c", 1), n_random=cfg.int("scan", "n_random", 1), rng_seed=cfg.seed(),
                          spam=cfg.bool("scan", "spam"), a=cfg.float("scan", "a"), b=cfg.float("scan", "b"),
                          n_g=cfg.float("scan", "n_g"), dt=_dt(cfg, "scan"), threads=threads)
    land.write_csv(out / "landscape.csv")
    land.write_mask_csv(out / "contours.csv")
    frac = {f"{t:g}": land.fraction_below(t) for t in land.thresholds}
    _manifest(cfg, "scan", out, ["landscape.csv", "contours.csv"], "ok", [], {"fraction_below": frac})
    print("fraction of cells below threshold: " + ", ".join(f"{k}: {v:.3f}" for k, v in frac.items()))
    return 0


def cmd_rb(cfg: RunConfig, out: Path, threads=None, strict=False):
    params = cfg.qubit()
    pulse = cfg.pulse(params, allow_ideal=True)
    noise = cfg.get("rb", "noise")
    if noise not in ("unitary", "lindblad"):
        raise ConfigError("[rb] noise must be 'unitary' or 'lindblad'")
    lengths = cfg.ints("rb", "lengths")
    if not lengths or min(lengths) < 1:
        raise ConfigError("[rb] lengths must be positive integers")
    if noise == "lindblad" and isinstance(pulse, np.ndarray):
        raise ConfigError("the ideal pulse has no duration; use unitary noise")
    res = simulate_rb(pulse, params, _error_point(cfg, "rb"), lengths, cfg.int("rb", "n_random", 1), noise,
                      cfg.seed(), cfg.bool("rb", "spam"), dt=_dt(cfg, "rb"))
    write_rb_csv(res, out / "rb.csv")
    (out / "rb_fit.json").write_text(res.to_json() + "\n")
    failures = [] if res.fit_ok else [f"RB fit: {res.fit_message}"]
    _manifest(cfg, "rb", out, ["rb.csv", "rb_fit.json"], "ok" if not failures else "fit_failed", failures)
    print(f"fitted gate error = {res.fitted_gate_error:.4e}  (p = {res.fit_p:.6f})")
    return 1 if (failures and strict) else 0


def cmd_calibrate(cfg: RunConfig, out: Path, threads=None, strict=False):
    params = cfg.qubit()
    pulse = cfg.pulse(params)
    err = _error_point(cfg, "calibrate")
    dt = _dt(cfg, "calibrate")
    seed = cfg.seed()
    failures: List[str] = []
    summary = {}
    arts = []

    scales = np.linspace(cfg.float("calibrate", "scale_min"), cfg.float("calibrate", "scale_max"),
                         cfg.int("calibrate", "scale_points", 3))
    try:
        sw = amplitude_sweep(pulse, params, scales, err, dt)
        write_trace_csv(out / "amplitude_sweep.csv", sw.scales, sw.populations, "scale")
        arts.append("amplitude_sweep.csv")
        summary["amplitude_sweep"] = {"scale": sw.scale, "slope": sw.slope}
    except ValueError as exc:
        failures.append(f"amplitude sweep: {exc}")

    n_vals = np.arange(cfg.int("calibrate", "n_max", 9) + 1)
    write_trace_csv(out / "error_amp.csv", n_vals, error_amp_populations(pulse, params, err, n_vals, dt), "n")
    arts.append("error_amp.csv")
    try:
        ea = error_amp_extract(pulse, params, err, n_vals, dt)
        summary["error_amplification"] = {"amplitude_scale": ea.amplitude_scale,
                                          "residual_gamma_mhz": ea.residual_gamma / mhz(1.0),
                                          "offset_a": ea.fitted_offset_a}
    except FitError as exc:
        failures.append(f"error amplification: {exc}")

    delays = np.linspace(0.0, cfg.float("calibrate", "ramsey_max_us") * US, cfg.int("calibrate", "ramsey_points", 3))
    det = mhz(cfg.float("calibrate", "ramsey_detuning_mhz"))
    write_trace_csv(out / "ramsey.csv", delays / US, ramsey_populations(params, err, delays, det), "delay_us")
    arts.append("ramsey.csv")
    try:
        ram = ramsey_estimate(params, err, delays, det)
    except ValueError as exc:
        raise ConfigError(f"[calibrate] {exc}") from None
    if not ram.fit_ok:
        failures.append(f"ramsey: {ram.message}")
    summary["ramsey"] = {"frequency_offset_mhz": ram.frequency_offset / mhz(1.0), "t2_star_us": ram.t2_star / US}

    t1_delays = np.linspace(0.0, 5 * params.t1, cfg.int("calibrate", "t1_points", 3))
    write_trace_csv(out / "t1.csv", t1_delays / US, t1_populations(params, t1_delays, err), "delay_us")
    arts.append("t1.csv")
    try:
        t1 = t1_estimate(params, t1_delays, err)
        summary["t1"] = {"t1_us": t1.t1 / US, "unbounded": t1.unbounded}
        if ram.fit_ok and math.isfinite(t1.t1) and math.isfinite(ram.t2_star):
            try:
                summary["tphi_us"] = tphi_from_t2star(ram.t2_star, t1.t1) / US
            except ValueError as exc:
                failures.append(f"tphi: {exc}")
    except FitError as exc:
        failures.append(f"t1: {exc}")

    (out / "calibration.json").write_text(json.dumps({"results": summary, "failures": failures}, indent=2) + "\n")
    arts.append("calibration.json")
    _manifest(cfg, "calibrate", out, arts, "ok" if not failures else "fit_failed", failures, {"seed_used": seed})
    for k, v in summary.items():
        print(f"{k}: {v}")
    return 1 if (failures and strict) else 0


def cmd_drift(cfg: RunConfig, out: Path, threads=None, strict=False):
    params = cfg.qubit()
    scenario = cfg.get("drift", "scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"[drift] scenario must be one of {SCENARIOS}")
    n = cfg.int("drift", "n_samples", 10)
    lam_s = cfg.get("drift", "lambda").strip().lower()
    lam = None if lam_s == "auto" else cfg.float("drift", "lambda")
    if lam is not None and lam < 0:
        raise ConfigError("[drift] lambda must be >= 0 or 'auto'")
    gates = default_gate_set(params)
    samples = generate_campaign(cfg.seed(), n, scenario, params, gates, tuple(cfg.ints("drift", "lengths")),
                                cfg.int("drift", "n_random", 1), threads)
    write_campaign_csv(samples, out / "campaign.csv")
    failures = []
    arts = ["campaign.csv"]
    try:
        fit = ridge_fit(samples, lam)
        write_fit_json(fit, out / "fit.json")
        times = {name: p.gate_time_tg for name, p in gates.items()}
        report = sensitivity_report(fit, times)
        (out / "report.txt").write_text(report + "\n")
        arts += ["fit.json", "report.txt"]
        print(report)
    except (ValueError, np.linalg.LinAlgError) as exc:
        failures.append(f"ridge fit: {exc}")
    _manifest(cfg, "drift", out, arts, "ok" if not failures else "fit_failed", failures)
    return 1 if (failures and strict) else 0


COMMANDS = {"optimize": cmd_optimize, "scan": cmd_scan, "rb": cmd_rb, "calibrate": cmd_calibrate, "drift": cmd_drift}


def build_parser():
    parser = argparse.ArgumentParser(prog="robustgates", description="Robust single-qubit gate toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="{optimize,scan,rb,calibrate,drift}")
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", metavar="PATH", help="INI or JSON run configuration")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides [run] out)")
        p.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        p.add_argument("--strict", action="store_true", help="exit 1 on fit failures")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            cfg.set("run", "seed", args.seed)
        if args.out is not None:
            cfg.set("run", "out", args.out)
        threads = args.threads if args.threads is not None else os.cpu_count()
        if threads is not None and threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.seed()
        out = Path(cfg.get("run", "out"))
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, threads, args.strict)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001  runtime failures map to exit 1
        log.debug("run failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
