import io
import json

import numpy as np
import pytest

from hyperpower.bench import (DESK_MAX_MESH, BenchRecord, ConfigError, RunConfig, contour_grid, contour_points,
                              library_version, loglog_slope, main, model_ratio, read_csv, run_scaling, run_solve,
                              scaling_operator, write_csv)


@pytest.mark.parametrize("kw", [dict(mesh=1), dict(degree=1), dict(updates=5), dict(schur="none"), dict(nu=0.0),
                                dict(cpen=-1.0), dict(tol=0.0), dict(maxit=0), dict(repeat=0),
                                dict(mesh=DESK_MAX_MESH + 1)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw).validate()


def test_config_allow_large():
    RunConfig(mesh=64, allow_large=True).validate()


def test_config_roundtrip():
    cfg = RunConfig(mesh=4, degree=3, cpen=12.0)
    d = json.loads(cfg.to_json())
    assert RunConfig.from_dict(d) == cfg
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"mesh": 4, "colour": "red"})


def test_config_resolves_default_penalty():
    assert RunConfig(degree=4).to_dict()["cpen"] == 15.0


def test_csv_digits():
    text = write_csv([{"a": 1 / 3, "b": True, "c": 7}])
    header, row = text.strip().split("\n")
    assert header == "a,b,c"
    assert row == "0.33333333333333331,true,7"
    assert float(row.split(",")[0]) == 1 / 3
    with pytest.raises(ValueError):
        write_csv([])


def test_csv_roundtrip(tmp_path):
    path = str(tmp_path / "x.csv")
    write_csv([{"x": np.pi, "y": "s"}], path)
    assert float(read_csv(path)[0]["x"]) == np.pi


@pytest.fixture(scope="module")
def small_records():
    return run_solve(RunConfig(mesh=4, degree=2, updates=2))


def test_solve_records(small_records):
    assert [r.level for r in small_records] == [0, 1, 2]
    assert small_records[0].t_sol_norm == 1.0
    assert all(r.converged for r in small_records)
    iters = [r.n_iter for r in small_records]
    assert iters[0] > iters[1] > iters[2]
    for r in small_records:
        assert r.true_residual <= 1e-7
        # the velocity part alone already follows the cost model
        assert r.flops_precond > (2 ** r.level) * r.flops_pv0 + (2 ** r.level - 1) * r.flops_a
    assert small_records[0].c_A / small_records[0].c_P == pytest.approx(
        small_records[0].flops_a / small_records[0].flops_pv0)


def test_record_row_provenance(small_records):
    row = small_records[0].row()
    assert row["version"] == library_version()
    assert json.loads(row["config"])["mesh"] == 4
    assert set(BenchRecord.WALL_COLUMNS) <= set(row)


def test_determinism(small_records):
    again = run_solve(RunConfig(mesh=4, degree=2, updates=2))

    def stable(recs):
        rows = [r.row() for r in recs]
        for r in rows:
            for col in BenchRecord.WALL_COLUMNS:
                r.pop(col)
        return write_csv(rows)

    assert stable(again) == stable(small_records)


def test_model_ratio():
    assert model_ratio(1.0, 0.7, 0.7) == 1.0
    assert model_ratio(0.33, 2.0, 0.0) == pytest.approx(0.99)


def test_contour_points(small_records):
    rows = [{k: str(v) for k, v in r.row().items()} for r in small_records]
    pts = contour_points(rows)
    assert pts[0]["model_ratio"] == pytest.approx(1.0)
    assert pts[0]["n_ratio"] == 1.0
    assert all(p["n_ratio"] < 1 for p in pts[1:])
    with pytest.raises(ConfigError):
        contour_points(rows[1:])


def test_contour_grid():
    grid = contour_grid(0.0, n_points=5, tp_tf_max=4.0)
    assert len(grid) == 25
    assert grid[-1]["model_ratio"] == pytest.approx(5.0)


def test_loglog_slope():
    n = np.array([10.0, 20.0, 40.0])
    assert loglog_slope(n, 3 * n ** 1.5) == pytest.approx(1.5)


def test_scaling_flop_slope():
    res = run_scaling([4, 6, 8], degree=2, operator="kron")
    assert res["flop_slope"] == pytest.approx(4 / 3, abs=1e-12)
    assert len(res["rows"]) == 3
    with pytest.raises(ConfigError):
        run_scaling([4, 6], degree=2)
    with pytest.raises(ConfigError):
        run_scaling([4, 6, 8], degree=2, reps=3)
    with pytest.raises(ConfigError):
        scaling_operator("bogus", 4, 2)


@pytest.mark.parametrize("name", ["A", "PV0", "PV1", "saddle"])
def test_scaling_operators_build(name):
    op, n = scaling_operator(name, 3, 2)
    assert op.shape[1] == n


def test_pv1_flop_ratio():
    pv0, _ = scaling_operator("PV0", 8, 4)
    pv1, _ = scaling_operator("PV1", 8, 4)
    pv2, _ = scaling_operator("PV2", 8, 4)
    a, _ = scaling_operator("A", 8, 4)
    r = a.flops / pv0.flops
    assert pv1.flops / pv0.flops == pytest.approx(2 + r, rel=1e-15)
    assert pv2.flops / pv0.flops == pytest.approx(4 + 3 * r, rel=1e-15)


def test_cli_solve(tmp_path, capsys):
    out = tmp_path / "rec.csv"
    assert main(["solve", "--mesh", "3", "--degree", "2", "--updates", "1", "--out", str(out)]) == 0
    rows = read_csv(str(out))
    assert [int(r["level"]) for r in rows] == [0, 1]
    assert json.loads(rows[0]["config"])["updates"] == 1


def test_cli_solve_not_converged(tmp_path):
    assert main(["solve", "--mesh", "3", "--degree", "2", "--updates", "0", "--maxit", "2",
                 "--out", str(tmp_path / "r.csv")]) == 1


def test_cli_bad_config(capsys):
    assert main(["solve", "--updates", "7"]) == 2
    assert "updates" in capsys.readouterr().err


def test_cli_json_config_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mesh": 3, "degree": 2, "updates": 0}))
    out = tmp_path / "rec.csv"
    assert main(["solve", "--mesh", "30", "--json-config", str(cfg), "--out", str(out)]) == 0
    assert int(read_csv(str(out))[0]["mesh"]) == 3


def test_cli_contour_from_records(tmp_path):
    rec = tmp_path / "rec.csv"
    main(["solve", "--mesh", "3", "--degree", "2", "--updates", "1", "--out", str(rec)])
    out = tmp_path / "contour.csv"
    assert main(["contour", "--records", str(rec), "--grid", "4", "--out", str(out)]) == 0
    rows = read_csv(str(out))
    assert sum(r["kind"] == "point" for r in rows) == 2
    assert sum(r["kind"] == "grid" for r in rows) == 16


def test_cli_scaling(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["scaling", "--meshes", "4", "6", "8", "--degree", "2", "--out", str(out)]) == 0
    rows = read_csv(str(out))
    assert float(rows[0]["flop_slope"]) == pytest.approx(4 / 3)


def test_cli_spectra_exit_code_reflects_checks(tmp_path):
    out = tmp_path / "spectra.json"
    code = main(["spectra", "--degree", "2", "--updates", "2", "--out", str(out)])
    res = json.loads(out.read_text())
    assert code == (0 if res["passed"] else 1)
    assert set(res["sequences"]) == {"velocity", "hat", "fixed", "exact"}
    assert res["checks"]["velocity"]["passed"]
    assert res["checks"]["exact"]["passed"]
    assert res["config"]["mesh"] == 2


def test_module_entry_point():
    import subprocess
    import sys

    done = subprocess.run([sys.executable, "-m", "hyperpower", "--help"], capture_output=True, text=True)
    assert done.returncode == 0
    for cmd in ("solve", "spectra", "scaling", "contour"):
        assert cmd in done.stdout
