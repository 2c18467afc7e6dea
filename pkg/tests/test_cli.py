import json
from pathlib import Path

import numpy as np
import pytest

import impulsegame as ig
from impulsegame.cli import (
    ConfigError,
    compare_fields,
    grid_from_config,
    load_config,
    main,
    make_config,
    read_field,
    run,
    spec_from_config,
    write_field,
)

from conftest import hand_grid_5node, hand_spec_5node


def write_cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_defaults_from_problem_name(tmp_path):
    cfg = load_config(write_cfg(tmp_path, {"problem": "P1"}))
    assert cfg.data["grid"]["dx"] == 0.05
    assert cfg.data["grid"]["box"] == [-4 * np.pi, 4 * np.pi]
    assert cfg.data["grid"]["cfl_safety"] == 0.9
    assert cfg.data["simulation"]["seed"] == 1


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="dxx"):
        load_config(write_cfg(tmp_path, {"problem": "P1", "grid": {"dxx": 0.1}}))


def test_parse_error_has_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"problem": \n "P1",,}')
    with pytest.raises(ConfigError, match=r":\d+:\d+"):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_inline_problem_roundtrip():
    cfg = make_config(
        {
            "problem": {
                "dim": 1,
                "horizon_T": 1.0,
                "drift_b": [{"kind": "constant", "params": [0.0]}],
                "vol_sigma": [{"kind": "constant", "params": [1.0]}],
                "driver_f": {"kind": "constant", "params": [0.0]},
                "terminal_Phi": {"kind": "cosine", "params": [1.0, 1.0]},
                "cost_c": {"kind": "constant", "params": [10.0]},
                "gain_chi": {"kind": "constant", "params": [9.0]},
                "impulse_U": [[1.0]],
                "impulse_V": [[-1.0]],
            }
        }
    )
    spec = spec_from_config(cfg)
    assert spec.dim == 1
    assert spec.cost(0.0, np.array([1.0])) == 10.0


def test_inline_zero_cost_rejected_by_check(tmp_path):
    cfg = {
        "problem": {
            "dim": 1,
            "horizon_T": 1.0,
            "drift_b": [{"kind": "constant", "params": [0.0]}],
            "vol_sigma": [{"kind": "constant", "params": [0.0]}],
            "driver_f": {"kind": "constant", "params": [0.0]},
            "terminal_Phi": {"kind": "constant", "params": [1.0]},
            "cost_c": {"kind": "constant", "params": [0.0]},
            "gain_chi": {"kind": "constant", "params": [0.6]},
            "impulse_U": [[1.0]],
            "impulse_V": [[-1.0]],
        },
        "grid": {"box": [-2.0, 2.0], "dx": 1.0},
        "out_dir": str(tmp_path),
    }
    rc = main(["check", "--config", str(write_cfg(tmp_path, cfg))])
    assert rc == 1


def test_grid_snapped_to_dx():
    cfg = make_config({"problem": "P1"})
    spec = spec_from_config(cfg)
    grid = grid_from_config(spec, cfg)
    assert grid.mins[0] == pytest.approx(-12.55, abs=1e-12)
    assert grid.maxs[0] == pytest.approx(12.55, abs=1e-12)
    assert grid.shape == (503,)
    assert 0.0 in grid.axes[0]


def small_cfg(tmp_path, problem="P0", **over):
    obj = {
        "problem": problem,
        "grid": {"box": [-3.2, 3.2], "dx": 0.1},
        "simulation": {"n_paths": 200},
        "out_dir": str(tmp_path),
    }
    obj.update(over)
    return make_config(obj)


def test_write_field_structure(tmp_path):
    spec = ig.get_problem("P0")
    grid = ig.Grid((-1.0,), (1.0,), (1.0,))
    sg = ig.make_spacetime_grid(spec, grid, n_t=1)
    fld = ig.solve_pde(spec, sg)
    p = write_field(fld, tmp_path / "f.csv", spec)
    lines = p.read_text().strip().split("\n")
    assert lines[0] == "t,x0,value,region,action"
    assert len(lines) == 1 + 2 * 3
    for row in lines[1:]:
        assert row.endswith(",CONT,")


def test_field_roundtrip_bit_exact(tmp_path, solved):
    spec, fld = solved["P3"]
    p = write_field(fld, tmp_path / "f.csv", spec)
    back = read_field(p)
    assert np.array_equal(back["values"], fld.values)
    assert np.array_equal(back["times"], fld.times)


def test_hand_example_row(tmp_path):
    spec, grid = hand_spec_5node(), hand_grid_5node()
    sg = ig.make_spacetime_grid(spec, grid, n_t=1)
    fld = ig.solve_pde(spec, sg, assume_valid=True)
    p = write_field(fld, tmp_path / "f.csv", spec)
    assert "1.0,2.0,0.6,II_INT,-2.0" in p.read_text().split("\n")


def test_compare_fields_identity(tmp_path, solved):
    spec, fld = solved["P0"]
    a = write_field(fld, tmp_path / "a.csv", spec)
    rep = compare_fields(a, a)
    assert rep["sup_gap"] == 0.0 and rep["mean_gap"] == 0.0


def test_compare_fields_constant_offset(tmp_path, solved):
    spec, fld = solved["P0"]
    a = write_field(fld, tmp_path / "a.csv", spec)
    shifted = ig.ValueField(
        fld.sgrid, fld.values + 1e-3, fld.region.copy(), fld.action.copy()
    )
    b = write_field(shifted, tmp_path / "b.csv", spec)
    rep = compare_fields(a, b)
    assert rep["sup_gap"] == pytest.approx(1e-3, rel=1e-9)


def test_compare_fields_incompatible(tmp_path, solved):
    spec, fld = solved["P0"]
    a = write_field(fld, tmp_path / "a.csv", spec)
    far = ig.Grid((100.0,), (103.0,), (1.0,))
    sg = ig.make_spacetime_grid(spec, far, n_t=1)
    fld2 = ig.solve_pde(spec, sg)
    b = write_field(fld2, tmp_path / "b.csv", spec)
    with pytest.raises(ValueError, match="incompatible"):
        compare_fields(a, b)


def test_run_check_p0(tmp_path):
    rep = run("check", small_cfg(tmp_path))
    assert rep.metrics["sup_residual"] <= 1e-12
    assert rep.metrics["sandwich_violation"] == 0.0
    assert rep.metrics["assumptions"]["a1_pass"]


def test_run_solve_writes_artifacts(tmp_path):
    rep = run("solve", small_cfg(tmp_path))
    assert (tmp_path / "field_solve.csv").exists()
    assert (tmp_path / "report_solve.json").exists()
    assert rep.metrics["value_at_probe"] == pytest.approx(3.0)


def test_run_oracle_dpp(tmp_path):
    rep = run("oracle", small_cfg(tmp_path, problem="P3"))
    assert rep.metrics["dpp_residual"] <= 1e-12


def test_run_compare_p1(tmp_path):
    rep = run("compare", small_cfg(tmp_path, problem="P1"))
    assert rep.metrics["oracle_gap"] <= 2e-2


def test_run_simulate(tmp_path):
    rep = run("simulate", small_cfg(tmp_path, problem="P2"))
    assert abs(rep.metrics["mc_estimate"] - rep.metrics["value_at_probe"]) <= (
        3 * rep.metrics["mc_stderr"] + 2e-2
    )


def test_report_roundtrip_lossless(tmp_path):
    rep = run("solve", small_cfg(tmp_path))
    back = json.loads((tmp_path / "report_solve.json").read_text())
    # the report file name itself is appended to artifacts after writing
    want = rep.to_dict()
    want["artifacts"] = [a for a in want["artifacts"] if not a.startswith("report_")]
    assert back == want


def test_report_determinism_modulo_walltime(tmp_path):
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    run("solve", small_cfg(d1, problem="P3"))
    run("solve", small_cfg(d2, problem="P3"))
    a = json.loads((d1 / "report_solve.json").read_text())
    b = json.loads((d2 / "report_solve.json").read_text())
    a.pop("wall_time_s")
    b.pop("wall_time_s")
    a["config"].pop("out_dir")
    b["config"].pop("out_dir")
    assert a == b
    fa = (d1 / "field_solve.csv").read_bytes()
    fb = (d2 / "field_solve.csv").read_bytes()
    assert fa == fb


def test_cli_exit_codes(tmp_path):
    ok = main(
        ["solve", "--config", str(write_cfg(tmp_path, {
            "problem": "P0",
            "grid": {"box": [-2.0, 2.0], "dx": 1.0},
            "out_dir": str(tmp_path),
        }))]
    )
    assert ok == 0
    bad = main(["solve", "--config", str(write_cfg(tmp_path, {"problem": "P1", "grid": {"dxx": 1}}, "b.json"))])
    assert bad == 1
    cfl = main(
        ["solve", "--config", str(write_cfg(tmp_path, {
            "problem": "P1",
            "grid": {"box": [-3.2, 3.2], "dx": 0.1, "n_t": 5},
            "out_dir": str(tmp_path),
        }, "c.json"))]
    )
    assert cfl == 2


def test_cli_probe_and_overrides(tmp_path, capsys):
    rc = main([
        "solve", "--problem", "P0", "--out", str(tmp_path),
        "--probe", "0.5,0.0",
        "--config", str(write_cfg(tmp_path, {
            "problem": "P1", "grid": {"box": [-2.0, 2.0], "dx": 0.5},
        })),
    ])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["config"]["problem"] == "P0"
    assert out["metrics"]["value_at_probe"] == pytest.approx(3.0)
    assert out["metrics"]["probe_t"] == 0.5
