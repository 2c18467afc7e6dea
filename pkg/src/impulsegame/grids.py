"""Regular spatial grids and monotone multilinear interpolation.

All value arrays are stored in C order with one axis per spatial dimension.
Interpolation is written in convex-combination form ``(1-w)*a + w*b`` per
axis so that it is exactly monotone in the node values, which the
comparison and ordering tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class DomainError(ValueError):
    """A point was queried outside the grid box."""


@dataclass(frozen=True)
class Grid:
    """Axis-aligned regular grid: per-axis (min, max, step)."""

    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    steps: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.mins) == len(self.maxs) == len(self.steps)):
            raise ValueError("axis descriptors must have equal length")
        for lo, hi, h in zip(self.mins, self.maxs, self.steps):
            if h <= 0:
                raise ValueError(f"grid step must be positive, got {h}")
            if hi <= lo:
                raise ValueError(f"empty axis [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.mins)

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(
            int(round((hi - lo) / h)) + 1
            for lo, hi, h in zip(self.mins, self.maxs, self.steps)
        )

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            lo + h * np.arange(n)
            for lo, h, n in zip(self.mins, self.steps, self.shape)
        )

    @cached_property
    def nodes(self) -> np.ndarray:
        """All node coordinates, shape ``shape + (dim,)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def flat_nodes(self) -> np.ndarray:
        return self.nodes.reshape(-1, self.dim)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the closed grid box."""
        pts = np.asarray(points, dtype=float)
        lo = np.asarray(self.mins)
        hi = np.asarray(self.maxs)
        # Tiny tolerance absorbs round-off in shifted coordinates.
        eps = 1e-12 * (1.0 + np.abs(hi - lo))
        return np.all((pts >= lo - eps) & (pts <= hi + eps), axis=-1)

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of node values at in-box points.

        Points outside the box raise :class:`DomainError`; mask with
        :meth:`contains` first when exclusion is wanted instead.
        """
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dim:
            raise ValueError("point dimension mismatch")
        if not np.all(self.contains(pts)):
            raise DomainError("interpolation point outside grid box")
        flat = pts.reshape(-1, self.dim)
        idx = []
        wts = []
        for a in range(self.dim):
            n = self.shape[a]
            rel = (flat[:, a] - self.mins[a]) / self.steps[a]
            j = np.clip(np.floor(rel).astype(np.int64), 0, max(n - 2, 0))
            w = np.clip(rel - j, 0.0, 1.0)
            if n == 1:
                j = np.zeros_like(j)
                w = np.zeros_like(w)
            idx.append(j)
            wts.append(w)
        # Gather the 2^dim corner values, then fold one axis at a time in
        # convex-combination form.
        corners = values
        # Build corner value array of shape (npts, 2, 2, ..., 2).
        npts = flat.shape[0]
        out = np.empty((npts,) + (2,) * self.dim)
        for corner in np.ndindex(*(2,) * self.dim):
            gather = tuple(
                np.minimum(idx[a] + corner[a], self.shape[a] - 1)
                for a in range(self.dim)
            )
            out[(slice(None),) + corner] = corners[gather]
        for a in reversed(range(self.dim)):
            w = wts[a].reshape((npts,) + (1,) * a)
            out = (1.0 - w) * out[..., 0] + w * out[..., 1]
        return out.reshape(pts.shape[:-1])

    def exact_offset(self, shift: np.ndarray, tol: float = 1e-9) -> tuple[int, ...] | None:
        """Integer node offset equal to ``shift``, or None if misaligned."""
        shift = np.asarray(shift, dtype=float)
        offs = []
        for a in range(self.dim):
            k = shift[a] / self.steps[a]
            ki = int(round(k))
            if abs(k - ki) > tol:
                return None
            offs.append(ki)
        return tuple(offs)

    def interior_mask(self, fraction: float = 0.8) -> np.ndarray:
        """Mask of nodes inside the centered ``fraction`` of the box."""
        mask = np.ones(self.shape, dtype=bool)
        for a in range(self.dim):
            lo, hi = self.mins[a], self.maxs[a]
            c = 0.5 * (lo + hi)
            half = 0.5 * fraction * (hi - lo)
            ax_ok = np.abs(self.axes[a] - c) <= half + 1e-12
            shape = [1] * self.dim
            shape[a] = self.shape[a]
            mask &= ax_ok.reshape(shape)
        return mask


def shift_exact(values: np.ndarray, offsets: tuple[int, ...]):
    """Shift node values by an integer offset per axis.

    Returns ``(shifted, valid)`` where ``shifted[i] = values[i + offsets]``
    wherever the target index is on the grid and ``valid`` marks those
    nodes.  Used for lattice-exact intervention lookups.
    """
    dim = values.ndim
    shifted = np.zeros_like(values)
    valid = np.ones(values.shape, dtype=bool)
    src = []
    dst = []
    for a in range(dim):
        n = values.shape[a]
        k = offsets[a]
        if abs(k) >= n:
            return shifted, np.zeros(values.shape, dtype=bool)
        if k >= 0:
            dst.append(slice(0, n - k))
            src.append(slice(k, n))
        else:
            dst.append(slice(-k, n))
            src.append(slice(0, n + k))
    ok = np.zeros(values.shape, dtype=bool)
    ok[tuple(dst)] = True
    shifted[tuple(dst)] = values[tuple(src)]
    valid &= ok
    return shifted, valid


@dataclass
class GridSlice:
    """Value function restricted to one time: nodes of ``grid`` at ``time``."""

    grid: Grid
    values: np.ndarray
    time: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("slice values must be finite")
