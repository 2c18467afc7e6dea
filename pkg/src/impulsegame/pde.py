"""Backward-in-time monotone finite-difference solver for the
double-obstacle quasi-variational inequality

    max{ V - upper(V), min{ -dV/dt - H(t,x,V,DV,D2V), V - lower(V) } } = 0,

with H(t,x,y,p,Q) = <b,p> + tr(sigma sigma^T Q)/2 + f(t,x,y,p sigma).

The time discretization is explicit Euler; space uses drift-sign upwind
first differences and central second differences, assembled in positive
stencil form so one step is exactly monotone in the input slice.  At the
box edges the diffusion stencil is the mirrored one-sided quotient and
only inward-pointing upwind drift is kept; both closures preserve
monotonicity (a plain one-sided 3-point second difference would not, and
the comparison/ordering guarantees depend on it).

The obstacles depend on the unknown slice itself, so every level runs a
small fixed-point iteration of project -> recompute obstacles; strictly
positive impulse costs make the iteration terminate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grids import Grid, GridSlice
from .obstacles import ObstacleSlice, lower_obstacle, upper_obstacle
from .problems import ProblemSpec

CONT, I_INT, II_INT = 0, 1, 2
REGION_NAMES = {CONT: "CONT", I_INT: "I_INT", II_INT: "II_INT"}
REGION_CODES = {v: k for k, v in REGION_NAMES.items()}

FIXED_POINT_TOL = 1e-10
FIXED_POINT_CAP = 100
FIXED_POINT_FAIL = 1e-6
CFL_EPS = 1e-12


class CFLError(RuntimeError):
    """Time step too large for the explicit scheme."""


class NonConvergenceError(RuntimeError):
    """The obstacle fixed point failed to settle."""


class ValidationError(RuntimeError):
    """Problem data violates the standing assumptions."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    grid: Grid
    n_t: int
    horizon: float
    cfl_safety: float
    max_drift: float
    max_vol: float

    @property
    def dt(self) -> float:
        return self.horizon / self.n_t

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t + 1) * self.dt

    def cfl_bound(self) -> float:
        h = min(self.grid.steps)
        denom = self.grid.dim * self.max_vol**2 + self.max_drift * h + CFL_EPS
        return self.cfl_safety * h * h / denom


def coefficient_maxima(spec: ProblemSpec, grid: Grid, n_times: int = 17):
    """Sampled sup of |b| components and |sigma| diagonal over the grid."""
    nodes = grid.flat_nodes()
    mb = 0.0
    ms = 0.0
    for t in np.linspace(0.0, spec.horizon_T, n_times):
        mb = max(mb, float(np.max(np.abs(spec.drift(t, nodes)))))
        ms = max(ms, float(np.max(np.abs(spec.vol_diag(t, nodes)))))
    return mb, ms


def make_spacetime_grid(
    spec: ProblemSpec,
    grid: Grid,
    n_t: int | None = None,
    cfl_safety: float = 0.9,
) -> SpaceTimeGrid:
    """Build the space-time grid, choosing the time step from the CFL
    condition when ``n_t`` is not given and rejecting it otherwise."""
    if not 0.0 < cfl_safety <= 1.0:
        raise ValueError("cfl_safety must be in (0, 1]")
    mb, ms = coefficient_maxima(spec, grid)
    h = min(grid.steps)
    bound = cfl_safety * h * h / (grid.dim * ms**2 + mb * h + CFL_EPS)
    if n_t is None:
        n_t = max(1, int(np.ceil(spec.horizon_T / bound)))
    sgrid = SpaceTimeGrid(grid, n_t, spec.horizon_T, cfl_safety, mb, ms)
    if sgrid.dt > bound * (1 + 1e-12):
        raise CFLError(
            f"dt={sgrid.dt:.3e} exceeds CFL bound {bound:.3e}; raise n_t"
        )
    return sgrid


@dataclass
class ValueField:
    sgrid: SpaceTimeGrid
    values: np.ndarray   # (n_t+1,) + grid.shape
    region: np.ndarray   # int8 labels, same shape
    action: np.ndarray   # action index into the labeled player's set, -1 none

    @property
    def times(self) -> np.ndarray:
        return self.sgrid.times

    def slice_at(self, level: int) -> GridSlice:
        return GridSlice(self.sgrid.grid, self.values[level], float(self.times[level]))

    def probe(self, t: float, x) -> float:
        """Value at the nearest time level, interpolated in space."""
        level = int(np.argmin(np.abs(self.times - t)))
        pt = np.asarray(x, dtype=float).reshape(1, self.sgrid.grid.dim)
        return float(self.sgrid.grid.interpolate(self.values[level], pt)[0])


@dataclass
class ResidualField:
    residual: np.ndarray   # (n_t,) + grid.shape, forward-difference levels
    sup_norm: float
    interior_sup: float
    per_region: dict[str, float]


def hamiltonian(spec: ProblemSpec, t: float, x, y: float, p, Q) -> float:
    """<b,p> + tr(sigma sigma^T Q)/2 + f(t, x, y, p sigma)."""
    x = np.asarray(x, dtype=float).reshape(spec.dim)
    p = np.asarray(p, dtype=float).reshape(spec.dim)
    Q = np.asarray(Q, dtype=float).reshape(spec.dim, spec.dim)
    if not np.allclose(Q, Q.T):
        raise ValueError("Q must be symmetric")
    b = spec.drift(t, x[None, :])[0]
    sd = spec.vol_diag(t, x[None, :])[0]
    sigma = np.diag(sd)
    z = p @ sigma
    f = float(np.asarray(spec.driver(t, x[None, :], np.asarray([y]), z))[0])
    return float(b @ p + 0.5 * np.trace(sigma @ sigma.T @ Q) + f)


def _axis_weights(spec: ProblemSpec, grid: Grid, t: float, dt: float):
    """Per-axis positive stencil weights (wp, wm) plus drift/vol fields.

    Edge rows get the mirrored one-sided diffusion quotient and keep only
    inward upwind drift, so every weight stays nonnegative under CFL.
    """
    nodes = grid.nodes
    b = spec.drift(t, nodes)
    s = spec.vol_diag(t, nodes)
    wps, wms = [], []
    w0 = np.ones(grid.shape)
    for a in range(grid.dim):
        dx = grid.steps[a]
        ba = b[..., a]
        sa = s[..., a]
        diff = dt * sa * sa / (2.0 * dx * dx)
        wp = diff + dt * np.maximum(ba, 0.0) / dx
        wm = diff + dt * np.maximum(-ba, 0.0) / dx
        first = [slice(None)] * grid.dim
        last = [slice(None)] * grid.dim
        first[a] = 0
        last[a] = grid.shape[a] - 1
        first, last = tuple(first), tuple(last)
        # Mirrored diffusion closure at the edges, drift only if inward.
        wp[first] = 2.0 * diff[first] + dt * np.maximum(ba[first], 0.0) / dx
        wm[first] = 0.0
        wm[last] = 2.0 * diff[last] + dt * np.maximum(-ba[last], 0.0) / dx
        wp[last] = 0.0
        w0 = w0 - wp - wm
        wps.append(wp)
        wms.append(wm)
    if float(w0.min()) < -1e-12:
        raise CFLError(f"negative center weight {w0.min():.3e}; dt too large")
    return w0, wps, wms, b, s


def _combine(values: np.ndarray, w0, wps, wms) -> np.ndarray:
    if values.ndim == 1:
        return kernels.combine_1d(values, w0, wps[0], wms[0])
    out = w0 * values
    dim = values.ndim
    for a in range(dim):
        up = [slice(None)] * dim
        upn = [slice(None)] * dim
        up[a] = slice(0, values.shape[a] - 1)
        upn[a] = slice(1, values.shape[a])
        up, upn = tuple(up), tuple(upn)
        out[up] = out[up] + wps[a][up] * values[upn]
        out[upn] = out[upn] + wms[a][upn] * values[up]
    return out


def _upwind_z(values: np.ndarray, b: np.ndarray, s: np.ndarray, grid: Grid) -> np.ndarray:
    """z-argument of the driver: upwind gradient times the diagonal vol."""
    if grid.dim == 1:
        g = kernels.upwind_grad_1d(values, b[..., 0], grid.steps[0])
        return (g * s[..., 0])[..., None]
    comps = []
    for a in range(grid.dim):
        dx = grid.steps[a]
        fwd = np.zeros_like(values)
        bwd = np.zeros_like(values)
        sl_lo = [slice(None)] * grid.dim
        sl_hi = [slice(None)] * grid.dim
        sl_lo[a] = slice(0, values.shape[a] - 1)
        sl_hi[a] = slice(1, values.shape[a])
        sl_lo, sl_hi = tuple(sl_lo), tuple(sl_hi)
        d = (values[sl_hi] - values[sl_lo]) / dx
        fwd[sl_lo] = d
        bwd[sl_hi] = d
        g = np.where(b[..., a] >= 0.0, fwd, bwd)
        comps.append(g * s[..., a])
    return np.stack(comps, axis=-1)


def step_backward(
    spec: ProblemSpec,
    sgrid: SpaceTimeGrid,
    slice_next: GridSlice,
    t_new: float | None = None,
) -> GridSlice:
    """One explicit backward step: continuation value only, no obstacles."""
    dt = sgrid.dt
    grid = sgrid.grid
    if t_new is None:
        t_new = slice_next.time - dt
    if dt > sgrid.cfl_bound() * (1 + 1e-12):
        raise CFLError("CFL condition violated")
    w0, wps, wms, b, s = _axis_weights(spec, grid, t_new, dt)
    lin = _combine(slice_next.values, w0, wps, wms)
    z = _upwind_z(slice_next.values, b, s, grid)
    fv = np.asarray(spec.driver(t_new, grid.nodes, slice_next.values, z))
    out = lin + dt * np.broadcast_to(fv, grid.shape)
    return GridSlice(grid, out, t_new)


def project_double_obstacle(
    cont: GridSlice, lower: ObstacleSlice, upper: ObstacleSlice
) -> GridSlice:
    """min(upper, max(cont, lower)) with nonbinding obstacles inert.

    The outer min gives the minimizer's constraint priority when the
    obstacles cross (player-II priority).
    """
    out, _, _ = _project_labeled(cont, lower, upper)
    return out


def _project_labeled(
    cont: GridSlice,
    lower: ObstacleSlice,
    upper: ObstacleSlice,
    priority: str = "II",
):
    if priority == "II":
        pre = np.maximum(cont.values, lower.values)
        res = np.minimum(upper.values, pre)
        lower_active = lower.values > cont.values
        upper_active = upper.values < pre
    elif priority == "I":
        # Diagnostic order: the maximizer's clamp wins at crossings.
        pre = np.minimum(cont.values, upper.values)
        res = np.maximum(lower.values, pre)
        upper_active = upper.values < cont.values
        lower_active = lower.values > pre
    else:
        raise ValueError("priority must be 'I' or 'II'")
    region = np.zeros(cont.values.shape, dtype=np.int8)
    region[lower_active] = I_INT
    region[upper_active] = II_INT
    action = np.full(cont.values.shape, -1, dtype=np.int64)
    action[region == I_INT] = lower.best_action[region == I_INT]
    action[region == II_INT] = upper.best_action[region == II_INT]
    return GridSlice(cont.grid, res, cont.time), region, action


def obstacle_fixed_point(
    spec: ProblemSpec,
    cont: GridSlice,
    lookup: str = "interp",
    tol: float = FIXED_POINT_TOL,
    cap: int = FIXED_POINT_CAP,
    cost_scale: float = 1.0,
    priority: str = "II",
):
    """Iterate projection with obstacles recomputed from the iterate.

    Runs until the iteration stalls exactly (the generic case with
    strictly positive costs) or the cap is reached; cap exhaustion with a
    sup-change above the failure tolerance raises.
    Returns (slice, region, action, iterations).
    """
    v = cont
    region = np.zeros(cont.values.shape, dtype=np.int8)
    action = np.full(cont.values.shape, -1, dtype=np.int64)
    change = 0.0
    for it in range(1, cap + 1):
        low = lower_obstacle(v, spec, lookup=lookup, cost_scale=cost_scale)
        up = upper_obstacle(v, spec, lookup=lookup, cost_scale=cost_scale)
        new, region, action = _project_labeled(cont, low, up, priority=priority)
        change = float(np.max(np.abs(new.values - v.values)))
        v = new
        if change == 0.0:
            return v, region, action, it
    if change > FIXED_POINT_FAIL:
        raise NonConvergenceError(
            f"obstacle fixed point stuck at sup-change {change:.3e} "
            f"after {cap} iterations (check cost positivity)"
        )
    return v, region, action, cap


def terminal_projection(
    spec: ProblemSpec, grid: Grid, lookup: str = "interp", priority: str = "II"
):
    """Obstacle-consistent terminal slice: fixed point started from the
    terminal payoff.  Returns (slice, region, action, iterations)."""
    phi = np.asarray(spec.terminal(grid.nodes)).reshape(grid.shape)
    cont = GridSlice(grid, phi, spec.horizon_T)
    return obstacle_fixed_point(spec, cont, lookup=lookup, priority=priority)


def solve_pde(
    spec: ProblemSpec,
    sgrid: SpaceTimeGrid,
    lookup: str = "interp",
    assume_valid: bool = False,
) -> ValueField:
    """Backward sweep: terminal projection, then per level an explicit
    continuation step followed by the double-obstacle fixed point."""
    if not assume_valid:
        from .problems import validate_assumptions

        rep = validate_assumptions(spec, sample_budget=32, rng_seed=0)
        if not rep.all_pass:
            raise ValidationError(
                "standing assumptions fail: "
                + ", ".join(v.check for v in rep.violations[:4])
            )
    n_t = sgrid.n_t
    shape = (n_t + 1,) + sgrid.grid.shape
    values = np.zeros(shape)
    region = np.zeros(shape, dtype=np.int8)
    action = np.full(shape, -1, dtype=np.int64)
    term, reg, act, _ = terminal_projection(spec, sgrid.grid, lookup=lookup)
    values[n_t], region[n_t], action[n_t] = term.values, reg, act
    times = sgrid.times
    cur = term
    for level in range(n_t - 1, -1, -1):
        cont = step_backward(spec, sgrid, cur, t_new=float(times[level]))
        cur, reg, act, _ = obstacle_fixed_point(spec, cont, lookup=lookup)
        values[level], region[level], action[level] = cur.values, reg, act
    return ValueField(sgrid, values, region, action)


def _residual_levels(
    spec: ProblemSpec,
    fld: ValueField,
    lookup: str,
    theta: float = 0.0,
) -> np.ndarray:
    """Discrete QVI residual per (level, node); theta > 0 evaluates the
    exponentially transformed equation (costs scaled by e^{theta t}, the
    zero-order term realized by discounting the forward slice)."""
    sgrid = fld.sgrid
    dt = sgrid.dt
    n_t = sgrid.n_t
    res = np.zeros((n_t,) + sgrid.grid.shape)
    times = sgrid.times
    for level in range(n_t):
        t = float(times[level])
        w_next = fld.values[level + 1]
        if theta:
            w_next = np.exp(-theta * dt) * w_next
        nxt = GridSlice(sgrid.grid, w_next, float(times[level + 1]))
        w0, wps, wms, b, s = _axis_weights(spec, sgrid.grid, t, dt)
        lin = _combine(nxt.values, w0, wps, wms)
        z = _upwind_z(nxt.values, b, s, sgrid.grid)
        if theta:
            sc = np.exp(-theta * t)
            fv = np.exp(theta * t) * np.asarray(
                spec.driver(t, sgrid.grid.nodes, sc * nxt.values, sc * z)
            )
        else:
            fv = np.asarray(spec.driver(t, sgrid.grid.nodes, nxt.values, z))
        cont = lin + dt * np.broadcast_to(fv, sgrid.grid.shape)
        r_pde = (fld.values[level] - cont) / dt
        cur = fld.slice_at(level)
        scale = float(np.exp(theta * t)) if theta else 1.0
        low = lower_obstacle(cur, spec, lookup=lookup, cost_scale=scale)
        up = upper_obstacle(cur, spec, lookup=lookup, cost_scale=scale)
        low_branch = fld.values[level] - low.values
        up_branch = fld.values[level] - up.values
        res[level] = np.maximum(up_branch, np.minimum(r_pde, low_branch))
    return res


def qvi_residual(
    spec: ProblemSpec,
    fld: ValueField,
    lookup: str = "interp",
    interior_fraction: float = 0.8,
) -> ResidualField:
    if fld.sgrid.n_t < 1:
        raise ValueError("need at least two time levels")
    res = _residual_levels(spec, fld, lookup)
    mask = fld.sgrid.grid.interior_mask(interior_fraction)
    per_region = {}
    for code, name in REGION_NAMES.items():
        sel = fld.region[:-1] == code
        per_region[name] = float(np.max(np.abs(res[sel]))) if np.any(sel) else 0.0
    return ResidualField(
        residual=res,
        sup_norm=float(np.max(np.abs(res))),
        interior_sup=float(np.max(np.abs(res[:, mask]))),
        per_region=per_region,
    )


def qvi_residual_transformed(
    spec: ProblemSpec, fld_w: ValueField, theta: float, lookup: str = "interp"
) -> np.ndarray:
    """Residual of the e^{theta t}-transformed equation for a transformed
    field W = e^{theta t} V; equals e^{theta t} times the original
    residual level by level."""
    return _residual_levels(spec, fld_w, lookup, theta=theta)


def theta_transform(fld: ValueField, theta: float) -> ValueField:
    """W(level) = e^{theta t_level} V(level); labels carry over since the
    transformed obstacles scale costs by the same factor."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    scale = np.exp(theta * fld.times).reshape((-1,) + (1,) * fld.sgrid.grid.dim)
    return ValueField(
        fld.sgrid, scale * fld.values, fld.region.copy(), fld.action.copy()
    )


# Diagnostics used by the check command and the acceptance suite ----------


def lipschitz_x(fld: ValueField, interior_fraction: float = 0.8) -> float:
    """Max adjacent-node difference quotient over the interior box."""
    grid = fld.sgrid.grid
    mask = grid.interior_mask(interior_fraction)
    best = 0.0
    for a in range(grid.dim):
        lo = [slice(None)] * (grid.dim + 1)
        hi = [slice(None)] * (grid.dim + 1)
        lo[a + 1] = slice(0, grid.shape[a] - 1)
        hi[a + 1] = slice(1, grid.shape[a])
        d = np.abs(fld.values[tuple(hi)] - fld.values[tuple(lo)]) / grid.steps[a]
        m = mask[tuple(lo[1:])] & mask[tuple(hi[1:])]
        if np.any(m):
            best = max(best, float(np.max(d[:, m] if grid.dim == 1 else d[(slice(None),) + np.nonzero(m)])))
    return best


def holder_t(fld: ValueField, interior_fraction: float = 0.8, n_probe: int = 9) -> float:
    """Max 1/2-Hoelder quotient in time over fixed probe times."""
    mask = fld.sgrid.grid.interior_mask(interior_fraction)
    T = fld.sgrid.horizon
    probes = np.linspace(0.0, T, n_probe)
    levels = [int(np.argmin(np.abs(fld.times - t))) for t in probes]
    best = 0.0
    for i, la in enumerate(levels):
        for lb in levels[i + 1 :]:
            if la == lb:
                continue
            gap = abs(fld.times[lb] - fld.times[la])
            d = float(np.max(np.abs(fld.values[lb][mask] - fld.values[la][mask])))
            best = max(best, d / np.sqrt(gap))
    return best


def terminal_bound_constant(
    fld: ValueField, interior_fraction: float = 0.8, n_probe: int = 10
) -> float:
    """Fitted C with sup_x |V(t) - V(T)| <= C sqrt(T - t) over the last
    tenth of the horizon.  Quotients are taken at fixed probe times
    (nearest stored level) so the constant is comparable across
    resolutions."""
    mask = fld.sgrid.grid.interior_mask(interior_fraction)
    T = fld.sgrid.horizon
    probes = np.linspace(0.9 * T, T, n_probe + 1)[:-1]
    levels = {int(np.argmin(np.abs(fld.times - t))) for t in probes}
    best = 0.0
    for level in levels:
        gap = T - float(fld.times[level])
        if gap <= 0.0:
            continue
        d = float(np.max(np.abs(fld.values[level][mask] - fld.values[-1][mask])))
        best = max(best, d / np.sqrt(gap))
    return best
