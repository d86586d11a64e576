import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from robustgates.cli import ConfigError, RunConfig, main
from robustgates.model import to_mhz
from robustgates.pulses import load_pulse

FAST_OPT = {"optimize": {"n_delta": 3, "max_iters": 15}}


def _write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def _run(tmp_path, command, config=None, *extra):
    argv = [command, "--out", str(tmp_path / "out"), "--threads", "2"]
    if config is not None:
        argv += ["--config", _write_json(tmp_path / "cfg.json", config)]
    return main(argv + list(extra))


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# -- usage and config errors --------------------------------------------

def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["tune"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "robustgates", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "optimize" in proc.stdout


@pytest.mark.parametrize("config", [
    {"optimize": {"eta": 0}},
    {"optimize": {"eta": -0.3}},
    {"qubit": {"omega0_mhz": 0}},
    {"qubit": {"warp": 1}},
    {"telemetry": {}},
    {"optimize": {"delta_range_mhz": "-0.5"}},
])
def test_bad_config_exits_2(tmp_path, config):
    assert _run(tmp_path, "optimize", config) == 2


def test_missing_pulse_file_exits_2(tmp_path):
    assert _run(tmp_path, "scan", {"pulse": {"file": str(tmp_path / "nope.txt")}}) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert main(["rb", "--config", str(tmp_path / "absent.ini"), "--out", str(tmp_path)]) == 2


def test_negative_seed_exits_2(tmp_path):
    assert _run(tmp_path, "rb", None, "--seed", "-1") == 2


def test_ideal_pulse_only_for_rb(tmp_path):
    assert _run(tmp_path, "scan", {"pulse": {"builtin": "ideal"}}) == 2


# -- config parsing --------------------------------------------------------

def test_ini_and_json_parity(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[qubit]\nalpha_mhz = -300\n\n[rb]\nlengths = 1, 5, 9\nspam = true\n")
    js = _write_json(tmp_path / "c.json", {"qubit": {"alpha_mhz": -300}, "rb": {"lengths": [1, 5, 9], "spam": True}})
    a, b = RunConfig.load(ini), RunConfig.load(js)
    assert a.ints("rb", "lengths") == b.ints("rb", "lengths") == [1, 5, 9]
    assert a.bool("rb", "spam") and b.bool("rb", "spam")
    assert a.qubit() == b.qubit()


def test_mhz_round_trip():
    cfg = RunConfig.from_mapping({"qubit": {"alpha_mhz": "-295.1", "omega0_mhz": "17.7", "t1_us": "45.5",
                                            "tphi_us": "26"}})
    p = cfg.qubit()
    assert np.isclose(to_mhz(p.anharmonicity_alpha), -295.1, rtol=1e-14)
    assert np.isclose(to_mhz(p.rabi_max_omega0), 17.7, rtol=1e-14)
    assert np.isclose(p.t1, 45.5e-6, rtol=1e-14)
    assert np.isclose(p.tphi, 26e-6, rtol=1e-14)


def test_tphi_from_t2star_default():
    p = RunConfig.from_mapping({}).qubit()
    assert np.isclose(1 / p.tphi, 1 / 16.81e-6 - 1 / (2 * 45.5e-6))


def test_typed_getter_errors():
    cfg = RunConfig.from_mapping({"rb": {"lengths": "1, x"}, "scan": {"spam": "maybe"}})
    with pytest.raises(ConfigError):
        cfg.ints("rb", "lengths")
    with pytest.raises(ConfigError):
        cfg.bool("scan", "spam")


# -- rb ---------------------------------------------------------------------

def test_rb_with_ideal_pulse(tmp_path):
    code = _run(tmp_path, "rb", {"pulse": {"builtin": "ideal"}, "rb": {"lengths": "1, 10, 50", "n_random": 5}})
    assert code == 0
    fit = json.loads((tmp_path / "out" / "rb_fit.json").read_text())
    assert abs(fit["fitted_gate_error"]) < 1e-9
    rows = _rows(tmp_path / "out" / "rb.csv")
    assert [int(r["length"]) for r in rows] == [1, 10, 50]
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["command"] == "rb" and man["status"] == "ok"
    assert set(man["artifacts"]) == {"rb.csv", "rb_fit.json"}


def test_rb_rejects_lindblad_for_ideal(tmp_path):
    assert _run(tmp_path, "rb", {"pulse": {"builtin": "ideal"}, "rb": {"noise": "lindblad"}}) == 2


def test_rb_frog_lindblad(tmp_path):
    code = _run(tmp_path, "rb", {"rb": {"noise": "lindblad", "lengths": "1, 25, 100, 200", "n_random": 4}})
    assert code == 0
    fit = json.loads((tmp_path / "out" / "rb_fit.json").read_text())
    assert 1e-3 < fit["fitted_gate_error"] < 5e-3


# -- scan --------------------------------------------------------------------

def test_scan_default_grid(tmp_path):
    assert _run(tmp_path, "scan", {"scan": {"n_random": 2, "n_c": 10}}) == 0
    rows = _rows(tmp_path / "out" / "landscape.csv")
    assert len(rows) == 441
    assert float(rows[0]["delta_mhz"]) == -0.7
    assert float(rows[0]["gamma_mhz"]) == -3.5
    assert float(rows[-1]["delta_mhz"]) == 0.7
    masks = _rows(tmp_path / "out" / "contours.csv")
    assert len(masks) == 441
    assert set(masks[0]) == {"delta_mhz", "gamma_mhz", "mask_0.005", "mask_0.01"}


def test_scan_single_cell(tmp_path):
    cfg = {"scan": {"grid": "1, 1", "delta_range_mhz": "0.2, 0.2", "gamma_range_mhz": "0, 0"}}
    assert _run(tmp_path, "scan", cfg) == 0
    rows = _rows(tmp_path / "out" / "landscape.csv")
    assert len(rows) == 1
    assert float(rows[0]["delta_mhz"]) == 0.2


def test_scan_is_thread_independent(tmp_path):
    cfg = {"scan": {"grid": "4, 3", "n_random": 3, "n_c": 20}}
    path = _write_json(tmp_path / "c.json", cfg)
    assert main(["scan", "--config", path, "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(["scan", "--config", path, "--out", str(tmp_path / "b"), "--threads", "4"]) == 0
    assert (tmp_path / "a" / "landscape.csv").read_bytes() == (tmp_path / "b" / "landscape.csv").read_bytes()


# -- optimize ------------------------------------------------------------------

def test_optimize_rerun_from_manifest_is_identical(tmp_path):
    assert _run(tmp_path, "optimize", FAST_OPT, "--seed", "3") in (0, 1)
    first = (tmp_path / "out" / "pulse.txt").read_bytes()
    manifest = tmp_path / "out" / "manifest.json"
    assert json.loads(manifest.read_text())["seed"] == 3
    assert main(["optimize", "--config", str(manifest), "--out", str(tmp_path / "again")]) in (0, 1)
    assert (tmp_path / "again" / "pulse.txt").read_bytes() == first
    hist = _rows(tmp_path / "out" / "cost_history.csv")
    assert len(hist) >= 1 and set(hist[0]) == {"iteration", "objective", "grad_norm"}


def test_optimize_frog_settings(tmp_path):
    assert _run(tmp_path, "optimize", None) == 0
    pulse = load_pulse(tmp_path / "out" / "pulse.txt")
    assert len(pulse.vector) == 10
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["result"]["feasible"] is True
    assert man["result"]["ensemble_cost"] < 5e-3


# -- calibrate and drift ---------------------------------------------------

def test_calibrate_drag(tmp_path):
    cfg = {"pulse": {"drag_ns": 128}, "calibrate": {"gamma_mhz": 0.177, "ramsey_points": 301, "t1_points": 41}}
    assert _run(tmp_path, "calibrate", cfg) == 0
    res = json.loads((tmp_path / "out" / "calibration.json").read_text())
    assert res["failures"] == []
    r = res["results"]
    assert np.isclose(r["error_amplification"]["residual_gamma_mhz"], 0.177, rtol=0.02)
    assert np.isclose(r["ramsey"]["t2_star_us"], 16.81, rtol=0.05)
    assert np.isclose(r["t1"]["t1_us"], 45.5, rtol=0.02)
    for name in ("amplitude_sweep.csv", "error_amp.csv", "ramsey.csv", "t1.csv"):
        assert (tmp_path / "out" / name).is_file()


def test_calibrate_short_ramsey_window_exits_2(tmp_path):
    assert _run(tmp_path, "calibrate", {"pulse": {"drag_ns": 128}, "calibrate": {"ramsey_max_us": 2}}) == 2


def test_drift_day10_report(tmp_path):
    cfg = {"drift": {"scenario": "day10-amplitude-ramp", "n_samples": 12, "n_random": 3,
                     "lengths": "1, 10, 50, 200", "lambda": 0.1}}
    assert _run(tmp_path, "drift", cfg) == 0
    report = (tmp_path / "out" / "report.txt").read_text().splitlines()
    assert report[0].split()[-3:] == ["DRAG", "FROG", "AROG"]
    assert [line.split()[0] for line in report[1:4]] == ["w_gamma", "w_Gamma_phi", "w_Gamma_1"]
    assert len(_rows(tmp_path / "out" / "campaign.csv")) == 12
    fit = json.loads((tmp_path / "out" / "fit.json").read_text())
    assert fit["lambda"] == [0.1, 0.1, 0.1]


def test_drift_unknown_scenario(tmp_path):
    assert _run(tmp_path, "drift", {"drift": {"scenario": "day99"}}) == 2


def test_unwritable_output_exits_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["rb", "--out", str(blocker / "sub"), "--config",
                 _write_json(tmp_path / "c.json", {"pulse": {"builtin": "ideal"}})]) == 1
