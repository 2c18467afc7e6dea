"""Lattice dynamic-programming oracle.

Independent cross-check for the finite-difference solver: the diffusion
is replaced by a controlled Markov chain on the same spatial grid whose
one-step increments match the drift and the squared volatility, and the
value is computed by the exact dynamic programming recursion

    V(l) = project( E[V(l+1) at child] + f(t_l, x, m, z) dt )

with the same double-obstacle projection, impulses restricted to
lattice-aligned shifts (exact lookups, no interpolation).

Transition weights per axis are the central three-point probabilities
when they are nonnegative (exact first and second moments) and the
drift-upwind split otherwise (exact mean up to the |b| dx dt bias the
upwind shift introduces).  Edge nodes fold their outward mass into a
self-loop, which absorbs the chain at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid, GridSlice
from .pde import (
    SpaceTimeGrid,
    ValueField,
    make_spacetime_grid,
    obstacle_fixed_point,
    terminal_projection,
)
from .problems import ProblemSpec

MOMENT_RTOL = 1e-8


@dataclass(frozen=True)
class LatticeModel:
    spec: ProblemSpec
    sgrid: SpaceTimeGrid

    @property
    def grid(self) -> Grid:
        return self.sgrid.grid


def build_lattice(
    spec: ProblemSpec,
    grid: Grid,
    n_t: int | None = None,
    cfl_safety: float = 0.9,
) -> LatticeModel:
    """Validate impulse alignment and pick dt so all weights stay
    probabilities, then freeze the model."""
    for action in list(spec.impulse_set_U.as_array()) + list(
        spec.impulse_set_V.as_array()
    ):
        if grid.exact_offset(action) is None:
            raise ValueError(
                f"impulse action {tuple(action)} is not a whole number of grid steps"
            )
    sgrid = make_spacetime_grid(spec, grid, n_t=n_t, cfl_safety=cfl_safety)
    return LatticeModel(spec, sgrid)


def _axis_probs(model: LatticeModel, t: float):
    """Per-axis (p_up, p_dn) transition weights plus drift/vol fields.

    Central weights when nonnegative, upwind drift split otherwise; the
    outward component at an edge is folded into the stay weight later.
    Returns (p0, probs, b, s, upwind_mask_list).
    """
    grid = model.grid
    dt = model.sgrid.dt
    nodes = grid.nodes
    b = model.spec.drift(t, nodes)
    s = model.spec.vol_diag(t, nodes)
    p0 = np.ones(grid.shape)
    probs = []
    upwinds = []
    for a in range(grid.dim):
        dx = grid.steps[a]
        ba = b[..., a]
        sa = s[..., a]
        diff = dt * sa * sa / (2.0 * dx * dx)
        adv = dt * ba / (2.0 * dx)
        up_c = diff + adv
        dn_c = diff - adv
        use_central = (up_c >= 0.0) & (dn_c >= 0.0)
        up_u = diff + dt * np.maximum(ba, 0.0) / dx
        dn_u = diff + dt * np.maximum(-ba, 0.0) / dx
        p_up = np.where(use_central, up_c, up_u)
        p_dn = np.where(use_central, dn_c, dn_u)
        # Edge closure: outward mass becomes a self-loop.
        first = [slice(None)] * grid.dim
        last = [slice(None)] * grid.dim
        first[a] = 0
        last[a] = grid.shape[a] - 1
        p_dn[tuple(first)] = 0.0
        p_up[tuple(last)] = 0.0
        p0 = p0 - p_up - p_dn
        probs.append((p_up, p_dn))
        upwinds.append(~use_central)
    if float(p0.min()) < -1e-12:
        raise ValueError(f"negative stay probability {p0.min():.3e}; dt too large")
    return p0, probs, b, s, upwinds


def moment_check(model: LatticeModel, n_times: int = 9) -> dict[str, float]:
    """Worst interior deviation of the chain's conditional mean and
    second moment from b dt and sigma^2 dt, over sampled times.

    Raises if a deviation exceeds the tolerance plus the known |b| dx dt
    upwind bias where the upwind split is active."""
    grid = model.grid
    dt = model.sgrid.dt
    worst_mean = 0.0
    worst_var = 0.0
    for t in np.linspace(0.0, model.spec.horizon_T, n_times):
        _, probs, b, s, upwinds = _axis_probs(model, t)
        for a in range(grid.dim):
            dx = grid.steps[a]
            p_up, p_dn = probs[a]
            interior = [slice(None)] * grid.dim
            interior[a] = slice(1, grid.shape[a] - 1)
            interior = tuple(interior)
            mean = (p_up - p_dn)[interior] * dx
            m2 = (p_up + p_dn)[interior] * dx * dx
            err_mean = np.abs(mean - b[interior + (a,)] * dt)
            err_var = np.abs(m2 - s[interior + (a,)] ** 2 * dt)
            allow = np.where(
                upwinds[a][interior],
                np.abs(b[interior + (a,)]) * dx * dt,
                0.0,
            )
            bad_mean = err_mean - MOMENT_RTOL * dt
            bad_var = err_var - allow - MOMENT_RTOL * dt
            if err_mean.size:
                worst_mean = max(worst_mean, float(np.max(bad_mean)))
                worst_var = max(worst_var, float(np.max(bad_var)))
    if worst_mean > 0.0 or worst_var > 0.0:
        raise ValueError(
            f"lattice moments off by mean {worst_mean:.3e} / var {worst_var:.3e}"
        )
    return {"mean_excess": worst_mean, "var_excess": worst_var}


def backward_semigroup_step(
    model: LatticeModel,
    slice_next: GridSlice,
    t_new: float,
    theta_increment: np.ndarray | None = None,
) -> GridSlice:
    """Continuation value by one chain step plus the driver.

    m is the conditional expectation of the next slice over the children
    (each child value raised by ``theta_increment`` when given, the
    accumulated gain/cost attached to this sub-interval); the driver's
    z-argument uses the chain's covariance proxy cov(V, increment) /
    (dt sigma), which reproduces (grad V) sigma for smooth V."""
    grid = model.grid
    dt = model.sgrid.dt
    p0, probs, b, s, _ = _axis_probs(model, t_new)
    v = slice_next.values
    if theta_increment is not None:
        v = v + np.broadcast_to(theta_increment, grid.shape)
    m = p0 * v
    zs = []
    for a in range(grid.dim):
        p_up, p_dn = probs[a]
        dx = grid.steps[a]
        up = [slice(None)] * grid.dim
        dn = [slice(None)] * grid.dim
        up[a] = slice(1, grid.shape[a])
        dn[a] = slice(0, grid.shape[a] - 1)
        up, dn = tuple(up), tuple(dn)
        # Children with a self-loop at the closed edge (edge weight is 0,
        # the copy just keeps the array finite).
        v_up = v.copy()
        v_up[dn] = v[up]
        v_dn = v.copy()
        v_dn[up] = v[dn]
        m = m + p_up * v_up + p_dn * v_dn
        cov = (p_up * v_up - p_dn * v_dn) * dx
        zs.append(cov)
    mean_inc = [
        (probs[a][0] - probs[a][1]) * grid.steps[a] for a in range(grid.dim)
    ]
    z = np.empty(grid.shape + (grid.dim,))
    for a in range(grid.dim):
        cov = zs[a] - m * mean_inc[a]
        denom = dt * s[..., a]
        usable = np.abs(denom) > 1e-14
        z[..., a] = np.where(usable, cov / np.where(usable, denom, 1.0), 0.0)
    fv = np.asarray(model.spec.driver(t_new, grid.nodes, m, z))
    out = m + dt * np.broadcast_to(fv, grid.shape)
    return GridSlice(grid, out, t_new)


def solve_game(model: LatticeModel, priority: str = "II") -> ValueField:
    """Full backward recursion with exact-shift obstacle projection."""
    sgrid = model.sgrid
    spec = model.spec
    n_t = sgrid.n_t
    shape = (n_t + 1,) + model.grid.shape
    values = np.zeros(shape)
    region = np.zeros(shape, dtype=np.int8)
    action = np.full(shape, -1, dtype=np.int64)
    term, reg, act, _ = terminal_projection(
        spec, model.grid, lookup="exact", priority=priority
    )
    values[n_t], region[n_t], action[n_t] = term.values, reg, act
    times = sgrid.times
    cur = term
    for level in range(n_t - 1, -1, -1):
        cont = backward_semigroup_step(model, cur, float(times[level]))
        cur, reg, act, _ = obstacle_fixed_point(
            spec, cont, lookup="exact", priority=priority
        )
        values[level], region[level], action[level] = cur.values, reg, act
    return ValueField(sgrid, values, region, action)


def dpp_residual(
    model: LatticeModel, fld: ValueField, split_level: int | None = None
) -> float:
    """Dynamic-programming identity check.

    With a split level: re-solve the truncated game on [0, split] with
    terminal data equal to the stored slice at the split (re-projected,
    which is idempotent on solver output) and return the sup gap against
    the stored levels at and below the split.  Without one: check every
    level against one fresh recursion step from the stored next level,
    terminal projection included, which bounds the residual of every
    split at once.  Zero for a field produced by solve_game."""
    spec = model.spec
    times = fld.times
    if split_level is not None:
        if not 0 < split_level <= model.sgrid.n_t:
            raise ValueError("split level must be inside the horizon")
        start = GridSlice(
            model.grid, fld.values[split_level], float(times[split_level])
        )
        cur, _, _, _ = obstacle_fixed_point(spec, start, lookup="exact")
        worst = float(np.max(np.abs(fld.values[split_level] - cur.values)))
        for level in range(split_level - 1, -1, -1):
            cont = backward_semigroup_step(model, cur, float(times[level]))
            cur, _, _, _ = obstacle_fixed_point(spec, cont, lookup="exact")
            worst = max(
                worst, float(np.max(np.abs(fld.values[level] - cur.values)))
            )
        return worst
    term, _, _, _ = terminal_projection(spec, model.grid, lookup="exact")
    worst = float(np.max(np.abs(fld.values[-1] - term.values)))
    for level in range(model.sgrid.n_t - 1, -1, -1):
        nxt = GridSlice(model.grid, fld.values[level + 1], float(times[level + 1]))
        cont = backward_semigroup_step(model, nxt, float(times[level]))
        redo, _, _, _ = obstacle_fixed_point(spec, cont, lookup="exact")
        worst = max(worst, float(np.max(np.abs(fld.values[level] - redo.values))))
    return worst


def isaacs_gap(model: LatticeModel) -> float:
    """Sup-norm gap between the two projection orders (minimizer-priority
    versus maximizer-priority); a proxy for the upper/lower game gap."""
    hi = solve_game(model, priority="II")
    lo = solve_game(model, priority="I")
    return float(np.max(np.abs(hi.values - lo.values)))
