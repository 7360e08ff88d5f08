import csv
import subprocess
import sys
from pathlib import Path

import pytest

from uinfc.bounds import BoundsReport, verify_bounds
from uinfc.cli import main
from uinfc.validate import SUITE

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

ONE_D = """\
system = integrator1d
clf.working_radius = 2
controller.alpha = 0.05
controller.eps = 1e-6
controller.eta = 1e-6
input.lower = -1
input.upper = 1
sim.delta = 1e-3
sim.horizon = {horizon}
sim.x0 = 0.9
sim.r = {r}
sim.R = 1
sim.audit_stride = 0
"""


def _write(tmp_path, horizon=1000, r=0.1, extra=""):
    path = tmp_path / "run.cfg"
    path.write_text(ONE_D.format(horizon=horizon, r=r) + extra)
    return path


def test_simulate_stable_exit_zero(tmp_path, capsys):
    out = tmp_path / "log.csv"
    assert main(["simulate", "--config", str(_write(tmp_path)), "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert len(rows) == 1001 + 1
    assert "stable_at(0.8" in capsys.readouterr().out


def test_simulate_unstable_exit_two(tmp_path):
    # too short to reach the target ball
    assert main(["simulate", "--config", str(_write(tmp_path, horizon=500)), "--out", str(tmp_path / "a.csv")]) == 2


def test_simulate_inconclusive_exit_three(tmp_path):
    # entry at sample 800 leaves less than 10% of an 850-sample horizon
    assert main(["simulate", "--config", str(_write(tmp_path, horizon=850)), "--out", str(tmp_path / "a.csv")]) == 3


def test_missing_delta_exit_one(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text(ONE_D.format(horizon=10, r=0.1).replace("sim.delta = 1e-3\n", ""))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "a.csv")]) == 1
    assert "sim.delta" in capsys.readouterr().err


def test_radius_order_exit_one(tmp_path):
    assert main(["simulate", "--config", str(_write(tmp_path, r=1.5)), "--out", str(tmp_path / "a.csv")]) == 1


def test_missing_file_exit_one(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "a.csv")]) == 1


def test_sweep_summary(tmp_path):
    cfg = _write(tmp_path, horizon=1000)
    code = main(["sweep", "--config", str(cfg), "--param", "e_and_q", "--values", "1e-4,1e-3",
                 "--out-dir", str(tmp_path / "sw"), "--workers", "1"])
    assert code == 0
    lines = (tmp_path / "sw" / "summary.csv").read_text().splitlines()
    assert lines[0] == "value,verdict,T_entry,final_norm,min_V"
    assert len(lines) == 3 and all(",stable," in ln for ln in lines[1:])
    assert len(list((tmp_path / "sw").glob("run_*.csv"))) == 2


def test_sweep_empty_values_exit_one(tmp_path):
    cfg = _write(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--param", "eps", "--values", "",
                 "--out-dir", str(tmp_path / "sw")]) == 1


def test_sweep_unknown_param_exit_one(tmp_path):
    cfg = _write(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--param", "gain", "--values", "1",
                 "--out-dir", str(tmp_path / "sw")]) == 1


def test_bounds_round_trip(tmp_path):
    out = tmp_path / "bounds.txt"
    assert main(["bounds", "--config", str(CONFIGS / "integrator1d.cfg"), "--out", str(out)]) == 0
    rep = BoundsReport.from_text(out.read_text())
    assert verify_bounds(rep) and rep.delta_bar > 0


def test_bounds_infeasible_exit_four(tmp_path, capsys):
    extra = "noise.meas.kind = uniform_ball\nnoise.meas.bound = 0.06\nnoise.dist.kind = uniform_ball\nnoise.dist.bound = 0.06\n"
    path = _write(tmp_path, extra=extra)
    assert main(["bounds", "--config", str(path), "--out", str(tmp_path / "b.txt")]) == 4
    assert "noise_below_target" in capsys.readouterr().err


def test_validate_list(capsys):
    assert main(["validate", "--list"]) == 0
    assert capsys.readouterr().out.split() == [name for name, _ in SUITE]


def test_console_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "uinfc.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate" in res.stdout


def test_usage_error_exit_one():
    with pytest.raises(SystemExit) as info:
        main(["launch"])
    assert info.value.code == 1


@pytest.mark.slow
def test_validate_full_and_corrupted():
    assert main(["validate"]) == 0
    assert main(["validate", "--corrupt-zeta"]) == 1
