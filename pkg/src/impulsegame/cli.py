"""Configuration loading, run orchestration, and persistence.

Config files are JSON against a strict schema (unknown keys are errors).
Every field has a default, so ``{"problem": "P1"}`` is a complete config.
Reports are JSON with repr-exact floats, byte-reproducible for identical
configs up to the wall_time_s entry.

Exit codes: 0 success, 1 validation failure (bad config, assumption
violations, domain errors), 2 numerical non-convergence (CFL, stuck
fixed point).
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grids import Grid
from .lattice import build_lattice, dpp_residual, isaacs_gap, moment_check, solve_game
from .mc import evaluate_cost_mc, extract_policy, simulate_paths
from .pde import (
    CFLError,
    NonConvergenceError,
    REGION_NAMES,
    ValidationError,
    ValueField,
    holder_t,
    lipschitz_x,
    lower_obstacle,
    make_spacetime_grid,
    qvi_residual,
    solve_pde,
    terminal_bound_constant,
    upper_obstacle,
)
from .problems import (
    CANONICAL_PROBLEMS,
    CoefficientForm,
    DiscreteImpulseSet,
    ProblemSpec,
    get_problem,
    validate_assumptions,
)

COMMANDS = ("solve", "oracle", "simulate", "check", "compare")

DEFAULT_CONFIG = {
    "problem": "P1",
    "grid": {
        "box": [-4 * np.pi, 4 * np.pi],
        "dx": 0.05,
        "n_t": None,
        "cfl_safety": 0.9,
    },
    "lattice": {
        "n_t": None,
        "cfl_safety": 0.9,
        "isaacs_gap": False,
    },
    "simulation": {
        "n_paths": 10_000,
        "seed": 1,
        "x0": None,
        "t0": 0.0,
        "store_paths": False,
        "impulse_cap": 10_000,
        "block_size": 4096,
    },
    "tolerances": {
        "interior_fraction": 0.8,
    },
    "out_dir": ".",
}

_PROBLEM_KEYS = {
    "dim",
    "horizon_T",
    "name",
    "drift_b",
    "vol_sigma",
    "driver_f",
    "terminal_Phi",
    "cost_c",
    "gain_chi",
    "h_floor",
    "impulse_U",
    "impulse_V",
}
_FORM_KEYS = {"kind", "params", "knots", "table"}


class ConfigError(ValueError):
    """Config file failed to parse or validate against the schema."""


@dataclass
class RunConfig:
    data: dict

    @property
    def problem(self):
        return self.data["problem"]

    def resolved(self) -> dict:
        return copy.deepcopy(self.data)


def _merge_strict(defaults: dict, given: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(defaults[key], dict) and key != "problem":
            if not isinstance(val, dict):
                raise ConfigError(f"{where} must be an object")
            out[key] = _merge_strict(defaults[key], val, where)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path: str | Path) -> RunConfig:
    """Parse and fully resolve a JSON config; unknown keys are errors."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"
        ) from exc
    return make_config(raw)


def make_config(raw: dict | None = None) -> RunConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    data = _merge_strict(DEFAULT_CONFIG, raw)
    prob = data["problem"]
    if isinstance(prob, str):
        if prob not in CANONICAL_PROBLEMS:
            raise ConfigError(f"unknown problem name: {prob}")
    elif isinstance(prob, dict):
        _check_problem_keys(prob)
    else:
        raise ConfigError("problem must be a name or an inline object")
    return RunConfig(data)


def _check_problem_keys(obj: dict) -> None:
    for key in obj:
        if key not in _PROBLEM_KEYS:
            raise ConfigError(f"unknown config key: problem.{key}")
    for req in ("dim", "horizon_T", "terminal_Phi", "cost_c", "gain_chi",
                "impulse_U", "impulse_V", "drift_b", "vol_sigma", "driver_f"):
        if req not in obj:
            raise ConfigError(f"inline problem missing key: problem.{req}")


def _form(obj, where: str) -> CoefficientForm:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object with a 'kind'")
    for key in obj:
        if key not in _FORM_KEYS:
            raise ConfigError(f"unknown config key: {where}.{key}")
    try:
        return CoefficientForm(
            kind=obj.get("kind", ""),
            params=tuple(obj.get("params", ())),
            knots=tuple(tuple(k) for k in obj.get("knots", ())),
            table=tuple(obj.get("table", ())),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def spec_from_config(cfg: RunConfig) -> ProblemSpec:
    prob = cfg.problem
    if isinstance(prob, str):
        return get_problem(prob)
    try:
        return ProblemSpec(
            dim=int(prob["dim"]),
            horizon_T=float(prob["horizon_T"]),
            drift_b=tuple(_form(f, "problem.drift_b") for f in prob["drift_b"]),
            vol_sigma=tuple(_form(f, "problem.vol_sigma") for f in prob["vol_sigma"]),
            driver_f=_form(prob["driver_f"], "problem.driver_f"),
            terminal_Phi=_form(prob["terminal_Phi"], "problem.terminal_Phi"),
            cost_c=_form(prob["cost_c"], "problem.cost_c"),
            gain_chi=_form(prob["gain_chi"], "problem.gain_chi"),
            impulse_set_U=DiscreteImpulseSet(
                tuple(tuple(a) for a in prob["impulse_U"]), "U_player_I"
            ),
            impulse_set_V=DiscreteImpulseSet(
                tuple(tuple(a) for a in prob["impulse_V"]), "V_player_II"
            ),
            h_floor=_form(prob["h_floor"], "problem.h_floor")
            if "h_floor" in prob
            else CoefficientForm("constant", (0.3,)),
            name=str(prob.get("name", "inline")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid inline problem: {exc}") from exc


def grid_from_config(spec: ProblemSpec, cfg: RunConfig) -> Grid:
    """Snap the configured box to multiples of dx so the origin is a node
    whenever the box straddles it."""
    g = cfg.data["grid"]
    dx = float(g["dx"])
    if dx <= 0:
        raise ConfigError("grid.dx must be positive")
    box = g["box"]
    if np.isscalar(box[0]):
        box = [box] * spec.dim
    if len(box) != spec.dim:
        raise ConfigError(f"grid.box needs {spec.dim} axis ranges")
    mins, maxs = [], []
    for lo, hi in box:
        lo_s = dx * np.ceil(lo / dx - 1e-9)
        hi_s = dx * np.floor(hi / dx + 1e-9)
        if hi_s <= lo_s:
            raise ConfigError(f"grid.box axis [{lo}, {hi}] too small for dx={dx}")
        mins.append(float(lo_s))
        maxs.append(float(hi_s))
    return Grid(tuple(mins), tuple(maxs), (dx,) * spec.dim)


# Field persistence ---------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_field(fld: ValueField, path: str | Path, spec: ProblemSpec) -> Path:
    """CSV export, time-major then lexicographic nodes; header exactly
    t,x0[,x1],value,region,action with the action empty on CONT rows."""
    path = Path(path)
    grid = fld.sgrid.grid
    dim = grid.dim
    header = "t," + ",".join(f"x{a}" for a in range(dim)) + ",value,region,action"
    au = spec.impulse_set_U.as_array()
    av = spec.impulse_set_V.as_array()
    lines = [header]
    times = fld.times
    for level in range(len(times)):
        tstr = _fmt(times[level])
        for node in np.ndindex(*grid.shape):
            coords = [grid.axes[a][node[a]] for a in range(dim)]
            reg = int(fld.region[(level,) + node])
            if reg == 0:
                act = ""
            else:
                pool = au if reg == 1 else av
                vec = pool[int(fld.action[(level,) + node])]
                act = ";".join(_fmt(v) for v in vec)
            lines.append(
                tstr
                + ","
                + ",".join(_fmt(c) for c in coords)
                + f",{_fmt(fld.values[(level,) + node])},{REGION_NAMES[reg]},{act}"
            )
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field(path: str | Path) -> dict:
    """Parse a field CSV back into arrays (times, axes, values, region,
    action strings)."""
    path = Path(path)
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    if header[0] != "t" or header[-3:] != ["value", "region", "action"]:
        raise ValueError(f"not a field CSV: {path}")
    dim = len(header) - 4
    rows = [line.split(",") for line in lines[1:]]
    t_vals = np.asarray([float(r[0]) for r in rows])
    coords = np.asarray([[float(r[1 + a]) for a in range(dim)] for r in rows])
    vals = np.asarray([float(r[1 + dim]) for r in rows])
    region = [r[2 + dim] for r in rows]
    action = [r[3 + dim] for r in rows]
    times = np.unique(t_vals)
    axes = tuple(np.unique(coords[:, a]) for a in range(dim))
    shape = (len(times),) + tuple(len(ax) for ax in axes)
    if int(np.prod(shape)) != len(rows):
        raise ValueError(f"field CSV is not a full grid: {path}")
    values = vals.reshape(shape)
    return {
        "times": times,
        "axes": axes,
        "values": values,
        "region": np.asarray(region).reshape(shape),
        "action": np.asarray(action, dtype=object).reshape(shape),
    }


def compare_fields(
    path_a: str | Path, path_b: str | Path, interior_fraction: float = 0.8
) -> dict:
    """Sup and mean absolute gap over the shared interior box, with the
    coarser field resampled onto the finer one space-time multilinearly."""
    fa = read_field(path_a)
    fb = read_field(path_b)
    if len(fa["axes"]) != len(fb["axes"]):
        raise ValueError("incompatible domains: dimension mismatch")
    dim = len(fa["axes"])
    los, his = [], []
    for a in range(dim):
        lo = max(fa["axes"][a][0], fb["axes"][a][0])
        hi = min(fa["axes"][a][-1], fb["axes"][a][-1])
        if hi <= lo:
            raise ValueError("incompatible domains: boxes do not overlap")
        c, half = 0.5 * (lo + hi), 0.5 * interior_fraction * (hi - lo)
        los.append(c - half)
        his.append(c + half)
    t_lo = max(fa["times"][0], fb["times"][0])
    t_hi = min(fa["times"][-1], fb["times"][-1])
    if t_hi < t_lo:
        raise ValueError("incompatible domains: time ranges do not overlap")
    fine, coarse = (fa, fb) if fa["values"].size >= fb["values"].size else (fb, fa)
    interp = RegularGridInterpolator(
        (coarse["times"],) + coarse["axes"], coarse["values"], method="linear"
    )
    tmask = (fine["times"] >= t_lo) & (fine["times"] <= t_hi)
    axmasks = [
        (fine["axes"][a] >= los[a] - 1e-12) & (fine["axes"][a] <= his[a] + 1e-12)
        for a in range(dim)
    ]
    pts_ax = [fine["times"][tmask]] + [fine["axes"][a][axmasks[a]] for a in range(dim)]
    mesh = np.meshgrid(*pts_ax, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    sel = fine["values"][np.ix_(np.nonzero(tmask)[0], *[np.nonzero(m)[0] for m in axmasks])]
    if pts.shape[0] == 0:
        raise ValueError("incompatible domains: empty interior overlap")
    other = interp(pts).reshape(sel.shape)
    gap = np.abs(sel - other)
    return {
        "sup_gap": float(np.max(gap)),
        "mean_gap": float(np.mean(gap)),
        "n_points": int(gap.size),
    }


# Orchestration -------------------------------------------------------------


@dataclass
class RunReport:
    command: str
    config: dict
    metrics: dict
    wall_time_s: float
    artifacts: list[str]

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "metrics": self.metrics,
            "wall_time_s": self.wall_time_s,
            "artifacts": self.artifacts,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _sandwich_violation(spec: ProblemSpec, fld: ValueField, lookup: str) -> float:
    """Max violation of the post-projection identity
    min(upper, max(V, lower)) == V; exactly zero on solver output."""
    worst = 0.0
    for level in range(fld.sgrid.n_t + 1):
        cur = fld.slice_at(level)
        low = lower_obstacle(cur, spec, lookup=lookup)
        up = upper_obstacle(cur, spec, lookup=lookup)
        redo = np.minimum(up.values, np.maximum(cur.values, low.values))
        worst = max(worst, float(np.max(np.abs(redo - cur.values))))
    return worst


def _probe_metrics(fld: ValueField, probe) -> dict:
    t, x = probe
    return {"probe_t": t, "probe_x": list(x), "value_at_probe": fld.probe(t, x)}


def run(cmd: str, config: RunConfig, probe=None) -> RunReport:
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command: {cmd}")
    start = time.perf_counter()
    spec = spec_from_config(config)
    grid = grid_from_config(spec, config)
    frac = float(config.data["tolerances"]["interior_fraction"])
    out_dir = Path(config.data["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if probe is None:
        probe = (0.0, [0.0] * spec.dim)
    metrics: dict = {}
    artifacts: list[str] = []

    if cmd in ("solve", "check", "compare", "simulate"):
        sgrid = make_spacetime_grid(
            spec,
            grid,
            n_t=config.data["grid"]["n_t"],
            cfl_safety=float(config.data["grid"]["cfl_safety"]),
        )
        fld = solve_pde(spec, sgrid)

    if cmd == "solve":
        res = qvi_residual(spec, fld, interior_fraction=frac)
        metrics.update(_probe_metrics(fld, probe))
        metrics["sup_residual"] = res.sup_norm
        metrics["interior_residual"] = res.interior_sup
        metrics["residual_per_region"] = res.per_region
        metrics["n_t"] = sgrid.n_t
        out = write_field(fld, out_dir / "field_solve.csv", spec)
        artifacts.append(out.name)

    elif cmd == "oracle":
        model = build_lattice(
            spec,
            grid,
            n_t=config.data["lattice"]["n_t"],
            cfl_safety=float(config.data["lattice"]["cfl_safety"]),
        )
        moment_check(model)
        fld = solve_game(model)
        metrics.update(_probe_metrics(fld, probe))
        metrics["dpp_residual"] = dpp_residual(model, fld)
        metrics["n_t"] = model.sgrid.n_t
        if config.data["lattice"]["isaacs_gap"]:
            metrics["isaacs_gap"] = isaacs_gap(model)
        out = write_field(fld, out_dir / "field_oracle.csv", spec)
        artifacts.append(out.name)

    elif cmd == "simulate":
        sim = config.data["simulation"]
        policy = extract_policy(fld, spec)
        x0 = sim["x0"] if sim["x0"] is not None else [0.0] * spec.dim
        ens = simulate_paths(
            spec,
            policy,
            x0,
            t0=float(sim["t0"]),
            n_paths=int(sim["n_paths"]),
            seed=int(sim["seed"]),
            store_paths=bool(sim["store_paths"]),
            impulse_cap=int(sim["impulse_cap"]),
            block_size=int(sim["block_size"]),
        )
        est, err = evaluate_cost_mc(ens, spec)
        metrics.update(_probe_metrics(fld, (float(sim["t0"]), x0)))
        metrics["mc_estimate"] = est
        metrics["mc_stderr"] = err
        metrics["n_paths"] = ens.n_paths
        metrics["n_capped_paths"] = int(np.sum(ens.capped))

    elif cmd == "check":
        report = validate_assumptions(spec, sample_budget=64)
        if not report.all_pass:
            raise ValidationError(
                "assumption check failed: "
                + "; ".join(f"{v.check} at {v.point}" for v in report.violations[:4])
            )
        res = qvi_residual(spec, fld, interior_fraction=frac)
        sup_v = float(np.max(np.abs(fld.values)))
        metrics.update(_probe_metrics(fld, probe))
        metrics["assumptions"] = report.to_dict()
        metrics["sup_residual"] = res.sup_norm
        metrics["sandwich_violation"] = _sandwich_violation(spec, fld, "interp")
        metrics["lipschitz_x"] = lipschitz_x(fld, frac)
        metrics["holder_t"] = holder_t(fld, frac)
        metrics["terminal_bound_C"] = terminal_bound_constant(fld, frac)
        metrics["sup_value"] = sup_v

    elif cmd == "compare":
        model = build_lattice(spec, grid, n_t=sgrid.n_t)
        oracle_fld = solve_game(model)
        mask = grid.interior_mask(frac)
        gap = np.abs(fld.values[:, mask] - oracle_fld.values[:, mask])
        metrics.update(_probe_metrics(fld, probe))
        metrics["oracle_gap"] = float(np.max(gap))
        metrics["oracle_gap_mean"] = float(np.mean(gap))
        metrics["n_t"] = sgrid.n_t
        pa = write_field(fld, out_dir / "field_solve.csv", spec)
        pb = write_field(oracle_fld, out_dir / "field_oracle.csv", spec)
        artifacts.extend([pa.name, pb.name])
        metrics["file_gap"] = compare_fields(pa, pb, frac)

    wall = time.perf_counter() - start
    report = RunReport(cmd, config.resolved(), metrics, wall, artifacts)
    rpath = out_dir / f"report_{cmd}.json"
    rpath.write_text(report.dumps() + "\n")
    report.artifacts.append(rpath.name)
    return report


def _parse_probe(text: str, dim: int):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != dim + 1:
        raise ConfigError(f"--probe needs t plus {dim} coordinates")
    return parts[0], parts[1:]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="impulsegame",
        description="Two-player impulse-game value solver, oracle, and simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="JSON config file path")
        p.add_argument("--problem", help="canonical problem name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="simulation seed override")
        p.add_argument("--probe", help="value probe point: t,x0[,x1]")
    args = parser.parse_args(argv)
    try:
        raw = {}
        if args.config:
            config = load_config(args.config)
            raw = config.data
        if args.problem:
            raw = dict(raw, problem=args.problem)
        if args.out:
            raw = dict(raw, out_dir=args.out)
        if args.seed is not None:
            raw = dict(raw)
            raw["simulation"] = dict(raw.get("simulation", {}), seed=args.seed)
        config = make_config(raw)
        spec = spec_from_config(config)
        probe = _parse_probe(args.probe, spec.dim) if args.probe else None
        report = run(args.command, config, probe=probe)
    except (ConfigError, ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CFLError, NonConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    print(report.dumps())
    return 0


if __name__ == "__main__":
    sys.exit(main())
