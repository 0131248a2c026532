"""Command-line driver: exit codes, output files, idempotence."""
import csv
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nonlocal_tse.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from nonlocal_tse.core import DensityField
from nonlocal_tse.solver import BENCHMARKS

ASSETS = Path(__file__).parent / "assets"
# relative L2 of the shipped estimate/truth pair, frozen when the pair was generated
ASSET_PAIR_L2 = 6.349296709187383


@pytest.fixture
def workdir(tmp_path):
    shutil.copy(ASSETS / "fixture.toml", tmp_path / "fixture.toml")
    return tmp_path


def _variant(workdir, name, **edits):
    text = (workdir / "fixture.toml").read_text()
    for old, new in edits.items():
        assert old in text
        text = text.replace(old, new)
    path = workdir / name
    path.write_text(text)
    return path


def _report(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# -- ingest -------------------------------------------------------------------

def test_ingest_one_vehicle(tmp_path):
    rc = main(["ingest", str(ASSETS / "one_vehicle.csv"), "--length", "400", "--duration", "20",
               "--dx", "100", "--dt", "5", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rho = DensityField.from_csv(tmp_path / "density.csv").values
    # a vehicle at 20 ft/s crosses one 100-ft cell per 5-s bin: the diagonal is lit
    nz = np.argwhere(rho > 0)
    assert [tuple(p) for p in nz] == [(0, 0), (1, 1), (2, 2), (3, 3)]
    np.testing.assert_allclose(rho[rho > 0], 0.01, rtol=1e-12)
    assert (tmp_path / "speed.csv").is_file() and (tmp_path / "spill.jsonl").is_file()


def test_ingest_header_only_gives_zero_field(tmp_path):
    src = tmp_path / "empty.csv"
    src.write_text("vehicle_id,time_s,position_ft,speed_fps\n")
    rc = main(["ingest", str(src), "--length", "200", "--duration", "20", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rho = DensityField.from_csv(tmp_path / "density.csv").values
    assert rho.shape == (10, 4) and not rho.any()


def test_ingest_malformed_row_exit_2(tmp_path, capsys):
    src = tmp_path / "bad.csv"
    src.write_text("vehicle_id,time_s,position_ft,speed_fps\nv1,0,0,20\nv1,abc,5,20\n")
    rc = main(["ingest", str(src), "--length", "200", "--duration", "20", "--out", str(tmp_path)])
    assert rc == EXIT_DATA
    assert "line 3" in capsys.readouterr().err


def test_ingest_needs_grid(tmp_path):
    assert main(["ingest", str(ASSETS / "one_vehicle.csv"), "--out", str(tmp_path)]) == EXIT_USAGE


# -- train --------------------------------------------------------------------

def test_train_fixture(workdir, capsys):
    rc = main(["train", "--config", str(workdir / "fixture.toml"), "--deterministic"])
    assert rc == EXIT_OK
    out = workdir / "fixture-out"
    rows = _report(out / "report.csv")
    assert list(rows[0]) == ["epoch", "J", "J_DL", "J_PHY"]
    assert len(rows) == 150 and rows[-1]["epoch"] == "149"
    for name in ("checkpoint.npz", "estimate.csv", "truth.csv", "cost.png"):
        assert (out / name).is_file()
    est = DensityField.from_csv(out / "estimate.csv")
    assert est.values.shape == (30, 20)
    assert "relative L2" in capsys.readouterr().out


def test_train_mu_one_reports_data_cost(workdir):
    cfg = _variant(workdir, "mu1.toml", **{"mu = 0.1": "mu = 1.0", "max_epochs = 150": "max_epochs = 20"})
    assert main(["train", "--config", str(cfg), "--no-plots", "--out", str(workdir / "m")]) == EXIT_OK
    for row in _report(workdir / "m" / "report.csv"):
        assert abs(float(row["J"]) - float(row["J_DL"])) <= 1e-12


def test_train_nonlocal_not_worse_than_local(workdir):
    # 150 epochs leave the small net underfit and both runs tie; train to convergence
    loc = _variant(workdir, "loc.toml", **{"max_epochs = 150": "max_epochs = 2000"})
    assert main(["train", "--config", str(loc), "--no-plots", "--out", str(workdir / "loc")]) == EXIT_OK
    nl = _variant(workdir, "nl.toml", **{"max_epochs = 150": "max_epochs = 2000",
                                         'residual_kind = "local"': 'residual_kind = "nonlocal-two-var"'})
    assert main(["train", "--config", str(nl), "--no-plots", "--out", str(workdir / "nl")]) == EXIT_OK
    truth = DensityField.from_csv(workdir / "loc" / "truth.csv")
    from nonlocal_tse.data import relative_l2_error
    e_loc = relative_l2_error(DensityField.from_csv(workdir / "loc" / "estimate.csv"), truth)
    e_nl = relative_l2_error(DensityField.from_csv(workdir / "nl" / "estimate.csv"), truth)
    assert e_nl <= e_loc


def test_train_is_idempotent(workdir):
    cfg = str(workdir / "fixture.toml")
    a, b = workdir / "a", workdir / "b"
    assert main(["train", "--config", cfg, "--deterministic", "--out", str(a)]) == EXIT_OK
    assert main(["train", "--config", cfg, "--deterministic", "--out", str(b)]) == EXIT_OK
    for name in ("report.csv", "estimate.csv", "truth.csv", "cost.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_train_seed_override_changes_run(workdir):
    cfg = str(workdir / "fixture.toml")
    main(["train", "--config", cfg, "--no-plots", "--out", str(workdir / "s1")])
    main(["train", "--config", cfg, "--no-plots", "--seed", "7", "--out", str(workdir / "s7")])
    assert (workdir / "s1" / "report.csv").read_bytes() != (workdir / "s7" / "report.csv").read_bytes()


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_train_abort_exit_3(workdir):
    # densities of 1e200 square to inf in the data cost on the first epoch
    truth = DensityField.from_csv(ASSETS / "truth.csv")
    DensityField(truth.grid, np.full(truth.grid.shape, 1e200)).to_csv(workdir / "huge.csv")
    cfg = _variant(workdir, "blowup.toml", **{'benchmark = "two-wave"': 'truth = "huge.csv"'})
    with pytest.warns(UserWarning, match="exceed"):
        rc = main(["train", "--config", str(cfg), "--no-plots", "--out", str(workdir / "x")])
    assert rc == EXIT_NUMERIC
    assert (workdir / "x" / "report.csv").is_file()


# -- eval ---------------------------------------------------------------------

def test_eval_identical(capsys, tmp_path):
    t = str(ASSETS / "truth.csv")
    assert main(["eval", t, t, "--out", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.00"
    for name in ("estimate.png", "truth.png", "abs_error.png"):
        assert (tmp_path / name).is_file()


def test_eval_ten_percent(capsys, tmp_path):
    truth = DensityField.from_csv(ASSETS / "truth.csv")
    DensityField(truth.grid, 1.1 * truth.values).to_csv(tmp_path / "est.csv")
    assert main(["eval", str(tmp_path / "est.csv"), str(ASSETS / "truth.csv"), "--no-plots"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "10.00"


def test_eval_asset_pair(capsys):
    rc = main(["eval", str(ASSETS / "estimate.csv"), str(ASSETS / "truth.csv"), "--no-plots"])
    assert rc == EXIT_OK
    assert capsys.readouterr().out.strip() == f"{ASSET_PAIR_L2:.2f}"


def test_eval_missing_file_exit_2(tmp_path):
    assert main(["eval", str(tmp_path / "nope.csv"), str(ASSETS / "truth.csv"), "--no-plots"]) == EXIT_DATA


# -- solve --------------------------------------------------------------------

@pytest.mark.parametrize("scenario", BENCHMARKS)
def test_solve_scenarios(scenario, tmp_path):
    assert main(["solve", scenario, "--out", str(tmp_path)]) == EXIT_OK
    field = DensityField.from_csv(tmp_path / f"{scenario}.csv")
    assert field.values.shape == (120, 60) and np.all(np.isfinite(field.values))


def test_solve_nonlocal_kernel(tmp_path):
    assert main(["solve", "gaussian-jam", "--kernel", "linear,fixed,60", "--out", str(tmp_path)]) == EXIT_OK


def test_solve_bad_kernel_is_usage(tmp_path):
    assert main(["solve", "gaussian-jam", "--kernel", "linear", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["solve", "gaussian-jam", "--kernel", "cubic,fixed,60", "--out", str(tmp_path)]) == EXIT_USAGE


# -- sweep --------------------------------------------------------------------

def test_sweep_fixture(workdir):
    cfg = _variant(workdir, "sweep.toml", **{"max_epochs = 150": "max_epochs = 30"})
    assert main(["sweep", "--config", str(cfg), "--out", str(workdir / "a")]) == EXIT_OK
    assert main(["sweep", "--config", str(cfg), "--out", str(workdir / "b")]) == EXIT_OK
    rows = _report(workdir / "a" / "sweep.csv")
    assert list(rows[0]) == ["model", "kernel", "window", "L2"]
    assert [(r["model"], r["kernel"], r["window"]) for r in rows] == [
        ("local", "none", ""), ("nonlocal", "constant", "60"), ("nonlocal", "linear", "60")]
    assert all(float(r["L2"]) > 0 for r in rows)
    for name in ("sweep.csv", "sweep_runs.csv"):
        assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes()


def test_sweep_without_runs_is_usage(workdir):
    text = (workdir / "fixture.toml").read_text().split("[sweep]")[0]
    (workdir / "nosweep.toml").write_text(text)
    assert main(["sweep", "--config", str(workdir / "nosweep.toml")]) == EXIT_USAGE


# -- usage and config errors --------------------------------------------------

def test_usage_errors(workdir, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE
    assert main(["train", "--config", str(tmp_path / "missing.toml")]) == EXIT_USAGE
    bad = _variant(workdir, "bad.toml", **{"schema_version = 1": "schema_version = 9"})
    assert main(["train", "--config", str(bad)]) == EXIT_USAGE
    typo = _variant(workdir, "typo.toml", **{"n_obs = 150": "n_ob = 150"})
    assert main(["train", "--config", str(typo)]) == EXIT_USAGE


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nonlocal_tse.cli", "eval",
                           str(ASSETS / "truth.csv"), str(ASSETS / "truth.csv"), "--no-plots"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.00"
