import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from trtlbm import experiments as ex
from trtlbm.cli import main
from trtlbm.config import ExperimentConfig
from trtlbm.monotonicity import is_monotone
from trtlbm.scheme import RelaxPair

BASE = "scheme.preset = d1q3\nscheme.eps_link = 12/25\n"


def write(tmp_path, text, name="c.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def rows(path):
    return list(csv.reader(open(path)))


def test_check_named_points(tmp_path, capsys):
    assert main(["check", "--config", write(tmp_path, BASE + "relax.preset = magic:96/73\n"),
                 "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "inside" in out and "margin link 1        0\n" in out
    assert (tmp_path / "o" / "manifest.cfg").exists()


@pytest.mark.parametrize("text,inside", [
    ("scheme.preset = d1q3\nscheme.eps_link = 1/3\nrelax.preset = bgk:12/11\n", True),
    (BASE + "relax.omega_s = 2\nrelax.omega_a = 2\n", False),
])
def test_check_verdicts(text, inside):
    res = ex.cmd_check(ExperimentConfig.from_text(text), echo=lambda *_: None)
    assert res["verdict"].inside is inside


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["check", "--config", write(tmp_path, BASE + "relax.preset = bgk:abc\n")]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_run_writes_outputs(tmp_path):
    cfgp = write(tmp_path, BASE + "relax.preset = magic:96/73\ngrid.n = 128\noutput.distributions = true\n")
    assert main(["run", "--config", cfgp, "--out", str(tmp_path / "o")]) == 0
    o = tmp_path / "o"
    field = rows(o / "field_final.csv")
    assert field[0] == ["x_1", "u", "f_1", "f_2", "f_3"] and len(field) == 129
    assert rows(o / "timeseries.csv")[0][0] == "step"
    assert len(rows(o / "timeseries.csv")) == 34


def test_run_zero_time_snapshot(tmp_path):
    cfgp = write(tmp_path, BASE + "relax.preset = bgk:1\ngrid.n = 64\nrun.T = 0\ndatum.name = hat\n")
    assert main(["run", "--config", cfgp, "--out", str(tmp_path / "o")]) == 0
    final = np.array([float(r[1]) for r in rows(tmp_path / "o" / "field_final.csv")[1:]])
    init = np.array([float(r[1]) for r in rows(tmp_path / "o" / "field_initial.csv")[1:]])
    np.testing.assert_array_equal(final, init)


def test_magic_sharper_than_bgk(tmp_path):
    reps = {}
    finals = {}
    for preset in ("magic:96/73", "bgk:25/24"):
        c = ExperimentConfig.from_text(BASE + f"relax.preset = {preset}\ngrid.n = 128\n")
        reps[preset] = ex.cmd_run(c, tmp_path / preset.replace(":", "_").replace("/", "_"), echo=lambda *_: None)
        finals[preset] = reps[preset].final_u
    assert np.abs(finals["magic:96/73"] - finals["bgk:25/24"]).sum() > 0
    assert reps["magic:96/73"].linf_l1_err < reps["bgk:25/24"].linf_l1_err


def test_blowup_exit_code(tmp_path):
    cfgp = write(tmp_path, BASE + "relax.preset = bgk:2\ngrid.n = 8192\n")
    assert main(["run", "--config", cfgp, "--out", str(tmp_path / "o")]) == 3
    summary = dict(rows(tmp_path / "o" / "summary.csv")[1:])
    assert summary["blew_up"] == "1"


def test_d2q5_run_inside(tmp_path):
    c = ExperimentConfig.from_text(
        "scheme.preset = d2q5\nscheme.eps_x = 1/5\nflux.name = rotated-burgers\ndatum.name = indicator-radial\n"
        "relax.preset = magic:1\ngrid.n = 64\nrun.reference = none\n")
    rep = ex.cmd_run(c, tmp_path / "o", echo=lambda *_: None)
    assert rep.max_u <= 1 + 1e-10 and rep.min_u >= -1e-10
    summary = dict(rows(tmp_path / "o" / "summary.csv")[1:])
    assert summary["cells_outside_final"] == "0"


def test_region_quick(tmp_path):
    cfgp = write(tmp_path, BASE)
    assert main(["region", "--config", cfgp, "--out", str(tmp_path / "o"), "--quick"]) == 0
    assert len(rows(tmp_path / "o" / "region.csv")) == 64 * 64 + 1
    structure = dict(rows(tmp_path / "o" / "structure.csv")[1:])
    assert structure["convexity_ok"] == "1" and structure["diagonal_interior_ok"] == "1"
    assert (tmp_path / "o" / "region.pgm").read_bytes().startswith(b"P5")


@pytest.mark.parametrize("eps,magic", [("12/25", 96 / 73), ("1/3", 8 / 7)])
def test_region_cutoffs(tmp_path, eps, magic):
    c = ExperimentConfig.from_text(f"scheme.preset = d1q3\nscheme.eps_link = {eps}\nregion.resolution = 256\n")
    raster, report = ex.cmd_region(c, tmp_path, echo=lambda *_: None)
    struct = dict(rows(tmp_path / "structure.csv")[1:])
    h = raster.h
    assert abs(float(struct["magic_line_last_inside"]) - magic) <= h
    assert abs(float(struct["diagonal_last_inside"]) - float(struct["bgk_upper_bound"])) <= h
    assert report.all_ok


def test_region_agrees_with_check(tmp_path):
    c = ExperimentConfig.from_text(BASE + "region.resolution = 32\n")
    raster, _ = ex.cmd_region(c, tmp_path, echo=lambda *_: None)
    problem = ex.problem_for(c)
    for i, ws in enumerate(raster.axis):
        for k, wa in enumerate(raster.axis):
            assert raster.cells[i, k] == is_monotone(problem, RelaxPair(ws, wa)).inside


def test_convergence_quick(tmp_path):
    cfgp = write(tmp_path, BASE + "datum.name = hat\nrelax.sweep = [magic:3/2, bgk:1]\n")
    assert main(["convergence", "--config", cfgp, "--out", str(tmp_path / "o"), "--quick", "--threads", "2"]) == 0
    table = rows(tmp_path / "o" / "convergence_magic_1.5.csv")
    assert table[0] == ["dx", "error", "order"] and len(table) == 5
    assert float(table[2][1]) == pytest.approx(1.12e-2, rel=0.05)
    assert (tmp_path / "o" / "convergence_bgk_1.csv").exists()


def test_convergence_with_godunov_oracle(tmp_path):
    c = ExperimentConfig.from_text(BASE + "datum.name = hat\nrelax.sweep = [magic:3/2]\ngrid.n_list = [64, 128]\n"
                                   "run.reference = godunov\n")
    tables = ex.cmd_convergence(c, tmp_path, oracle_refine=16, echo=lambda *_: None)
    errs = [r.error for r in next(iter(tables.values()))]
    assert errs[0] == pytest.approx(2.28e-2, rel=0.05)
    assert "run.oracle_refine" in (tmp_path / "manifest.cfg").read_text()


def test_eqdist_quick(tmp_path):
    cfgp = write(tmp_path, BASE + "relax.preset = magic:3/2\ndatum.variants = [indicator, double-indicator]\n")
    assert main(["eqdist", "--config", cfgp, "--out", str(tmp_path / "o"), "--quick"]) == 0
    trace = rows(tmp_path / "o" / "eqdist_n64_indicator.csv")
    assert float(trace[1][2]) == 0.0
    scal = rows(tmp_path / "o" / "scaling.csv")[1:]
    for kind, _, _, _, ratio in scal:
        lo, hi = (0.4, 0.6) if kind == "dx_halving" else (1.7, 2.3)
        assert lo <= float(ratio) <= hi


def test_maxprinciple_quick(tmp_path):
    cfgp = write(tmp_path, BASE + "grid.n = 128\nrelax.line = magic\nrelax.sweep = [0.5, 1.0, 1.3, 1.35]\n")
    assert main(["maxprinciple", "--config", cfgp, "--out", str(tmp_path / "o")]) == 0
    table = rows(tmp_path / "o" / "maxprinciple.csv")
    assert table[0][:2] == ["omega_a", "max_u"]
    violated = [int(r[3]) for r in table[1:]]
    assert violated == [0, 0, 0, 1]


def test_module_entry_point(tmp_path):
    cfgp = write(tmp_path, BASE + "relax.preset = bgk:1\n")
    proc = subprocess.run([sys.executable, "-m", "trtlbm.cli", "check", "--config", cfgp,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0 and "inside" in proc.stdout
