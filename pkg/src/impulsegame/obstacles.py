"""Nonlocal intervention operators on grid slices.

The lower obstacle is the maximizer's best post-impulse value net of cost,
``sup_y [V(t, x+y) - c(t, y)]`` over the player-I action list; the upper
obstacle is the minimizer's ``inf_z [V(t, x+z) + chi(t, z)]``.  Shifts that
leave the grid box are excluded from the search; a node whose whole action
list exits the box is marked nonbinding (-inf for the sup, +inf for the
inf).  Ties break toward the smallest action index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid, GridSlice, shift_exact

BINDING_RTOL = 1e-8


@dataclass
class ObstacleSlice:
    values: np.ndarray      # +-inf where nonbinding
    best_action: np.ndarray  # action index, -1 where nonbinding
    binding: np.ndarray      # obstacle value within tolerance of the input slice
    is_upper: bool

    @property
    def nonbinding(self) -> np.ndarray:
        return self.best_action < 0


def _shifted_values(slice_: GridSlice, action: np.ndarray, lookup: str):
    """Values of the slice at x + action per node, with a validity mask."""
    grid = slice_.grid
    if lookup == "exact":
        offs = grid.exact_offset(action)
        if offs is None:
            raise ValueError(f"impulse action {action} is not lattice-aligned")
        return shift_exact(slice_.values, offs)
    targets = grid.nodes + np.asarray(action, dtype=float)
    ok = grid.contains(targets)
    vals = np.zeros(grid.shape)
    if np.any(ok):
        vals[ok] = grid.interpolate(slice_.values, targets[ok])
    return vals, ok


def _search(slice_: GridSlice, actions, costs, sign: float, lookup: str) -> ObstacleSlice:
    """Shared sup/inf search.  sign=+1: sup of (V - c); sign=-1: inf of (V + chi),
    run as a sup of the negated candidates."""
    grid = slice_.grid
    best = np.full(grid.shape, -np.inf)
    best_idx = np.full(grid.shape, -1, dtype=np.int64)
    for k, (action, cost) in enumerate(zip(actions, costs)):
        vals, ok = _shifted_values(slice_, action, lookup)
        cand = np.where(ok, sign * vals - cost, -np.inf)
        better = cand > best  # strict: keeps the smallest index on ties
        best = np.where(better, cand, best)
        best_idx = np.where(better, k, best_idx)
    out = sign * best
    out[best_idx < 0] = -sign * np.inf
    binding = np.abs(out - slice_.values) <= BINDING_RTOL * (1.0 + np.abs(slice_.values))
    binding &= best_idx >= 0
    return ObstacleSlice(out, best_idx, binding, is_upper=(sign < 0))


def lower_obstacle(
    slice_: GridSlice, spec, lookup: str = "interp", cost_scale: float = 1.0
) -> ObstacleSlice:
    """sup over player-I actions of V(t, x+y) - c(t, y).

    ``cost_scale`` multiplies the cost; the exponentially transformed
    equation uses it to scale costs by e^{theta t}.
    """
    actions = spec.impulse_set_U.as_array()
    costs = [cost_scale * spec.cost(slice_.time, a) for a in actions]
    return _search(slice_, actions, costs, +1.0, lookup)


def upper_obstacle(
    slice_: GridSlice, spec, lookup: str = "interp", cost_scale: float = 1.0
) -> ObstacleSlice:
    """inf over player-II actions of V(t, x+z) + chi(t, z)."""
    actions = spec.impulse_set_V.as_array()
    gains = [cost_scale * spec.gain(slice_.time, a) for a in actions]
    return _search(slice_, actions, gains, -1.0, lookup)
