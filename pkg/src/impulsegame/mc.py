"""Forward Monte Carlo of the impulse-controlled diffusion under a
feedback policy read off a solved value field, plus cost evaluation for
drivers that are free of (y, z) or affine in y.

Simulation contract: Euler-Maruyama with the policy grid's time step; at
each step the policy is consulted once at the nearest grid node, the
prescribed impulse (if any) is applied before the diffusion increment,
and the running cost accumulator collects the gain or cost.  Randomness
comes from the counter-based Philox generator keyed by (seed, path
index), so the ensemble is reproducible independently of batching or
parallel order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pde import CONT, I_INT, II_INT, ValueField
from .problems import ProblemSpec
from .schedules import PLAYER_I, PLAYER_II, ImpulseSchedule

BLOCK_SIZE = 4096
DEFAULT_IMPULSE_CAP = 10_000


class UnsupportedDriverError(RuntimeError):
    """Cost evaluation only covers y-free or affine-in-y drivers; use the
    lattice oracle for general drivers."""


@dataclass(frozen=True)
class FeedbackPolicy:
    """Per (level, node) region label and action index from a solved
    field; off-node states use the nearest node."""

    times: np.ndarray
    mins: tuple[float, ...]
    steps: tuple[float, ...]
    shape: tuple[int, ...]
    region: np.ndarray   # (n_levels,) + shape, int8
    action: np.ndarray   # (n_levels,) + shape, int64
    actions_U: np.ndarray
    actions_V: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def nearest_flat(self, x: np.ndarray) -> np.ndarray:
        """Flat node index of the nearest grid node per row of x."""
        idx = []
        for a in range(self.dim):
            k = np.rint((x[:, a] - self.mins[a]) / self.steps[a]).astype(np.int64)
            idx.append(np.clip(k, 0, self.shape[a] - 1))
        return np.ravel_multi_index(idx, self.shape)

    def lookup(self, level: int, x: np.ndarray):
        """(region, action index) arrays at the nearest nodes."""
        flat = self.nearest_flat(x)
        return (
            self.region[level].reshape(-1)[flat],
            self.action[level].reshape(-1)[flat],
        )


def extract_policy(fld: ValueField, spec: ProblemSpec) -> FeedbackPolicy:
    grid = fld.sgrid.grid
    au = spec.impulse_set_U.as_array()
    av = spec.impulse_set_V.as_array()
    act = fld.action
    if np.any((fld.region == I_INT) & ((act < 0) | (act >= len(au)))):
        raise ValueError("player-I label with invalid action index")
    if np.any((fld.region == II_INT) & ((act < 0) | (act >= len(av)))):
        raise ValueError("player-II label with invalid action index")
    return FeedbackPolicy(
        times=fld.times.copy(),
        mins=grid.mins,
        steps=grid.steps,
        shape=grid.shape,
        region=fld.region.copy(),
        action=act.copy(),
        actions_U=au,
        actions_V=av,
    )


@dataclass
class PathEnsemble:
    n_paths: int
    seed: int
    t0: float
    start_level: int
    times: np.ndarray
    terminal_state: np.ndarray        # (n_paths, dim)
    theta: np.ndarray                 # (n_paths,) accumulated gains - costs
    payoff: np.ndarray | None         # None when the driver is unsupported
    discounted_integral: np.ndarray | None
    schedules_I: tuple[ImpulseSchedule, ...]
    schedules_II: tuple[ImpulseSchedule, ...]
    capped: np.ndarray                # (n_paths,) bool, impulse cap hit
    substream_ids: np.ndarray
    states: np.ndarray | None = None  # (n_paths, n_steps+1, dim) if stored
    increments: np.ndarray | None = None


def affine_driver_parts(spec: ProblemSpec):
    """(kappa, a(t, x) callable) for supported drivers, else None."""
    form = spec.driver_f
    if form.kind == "affine_in_y":
        a0 = float(form.params[0])

        def a_fn(t, x):
            return np.full(x.shape[0], a0)

        return float(form.params[1]), a_fn
    if form.kind in ("constant", "linear", "cosine", "gaussian_bump", "tabulated"):
        return 0.0, lambda t, x: np.broadcast_to(
            np.asarray(form.eval_state(t, x), dtype=float), (x.shape[0],)
        )
    return None


def simulate_paths(
    spec: ProblemSpec,
    policy: FeedbackPolicy,
    x0,
    t0: float = 0.0,
    n_paths: int = 1,
    seed: int = 1,
    store_paths: bool = False,
    impulse_cap: int = DEFAULT_IMPULSE_CAP,
    block_size: int = BLOCK_SIZE,
) -> PathEnsemble:
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    dim = policy.dim
    x0 = np.asarray(x0, dtype=float).reshape(dim)
    times = policy.times
    start = int(np.argmin(np.abs(times - t0)))
    t_start = float(times[start])
    n_levels = len(times)
    n_steps = n_levels - 1 - start
    dt = policy.dt
    parts = affine_driver_parts(spec)

    terminal = np.empty((n_paths, dim))
    theta = np.zeros(n_paths)
    capped = np.zeros(n_paths, dtype=bool)
    integral = np.zeros(n_paths) if parts is not None else None
    events_i: list[list] = [[] for _ in range(n_paths)]
    events_ii: list[list] = [[] for _ in range(n_paths)]
    all_states = (
        np.empty((n_paths, n_steps + 1, dim)) if store_paths else None
    )
    all_incr = np.empty((n_paths, n_steps, dim)) if store_paths else None

    for lo in range(0, n_paths, block_size):
        hi = min(lo + block_size, n_paths)
        nb = hi - lo
        # Per-path counter-based substreams: batching cannot change draws.
        noise = np.empty((nb, n_steps, dim))
        for j in range(nb):
            gen = np.random.Generator(np.random.Philox(key=[seed, lo + j]))
            noise[j] = gen.standard_normal((n_steps, dim))
        x = np.tile(x0, (nb, 1))
        counts = np.zeros(nb, dtype=np.int64)
        prev_g = None
        for step in range(n_steps + 1):
            level = start + step
            t = float(times[level])
            reg, act = policy.lookup(level, x)
            for code, actions, sign, player_events in (
                (II_INT, policy.actions_V, +1.0, events_ii),
                (I_INT, policy.actions_U, -1.0, events_i),
            ):
                mask = reg == code
                if not np.any(mask):
                    continue
                over = mask & (counts >= impulse_cap)
                capped[lo:hi][over] = True
                mask &= counts < impulse_cap
                if not np.any(mask):
                    continue
                moves = actions[act[mask]]
                x[mask] = x[mask] + moves
                if sign > 0:
                    theta[lo:hi][mask] += np.asarray(
                        [spec.gain(t, m) for m in moves]
                    )
                else:
                    theta[lo:hi][mask] -= np.asarray(
                        [spec.cost(t, m) for m in moves]
                    )
                counts[mask] += 1
                for j, mv in zip(np.nonzero(mask)[0], moves):
                    player_events[lo + j].append((t, tuple(float(v) for v in mv)))
            if store_paths:
                all_states[lo:hi, step] = x
            if parts is not None:
                kappa, a_fn = parts
                g = np.exp(kappa * (t - t_start)) * a_fn(t, x)
                if prev_g is not None:
                    integral[lo:hi] += 0.5 * (prev_g + g) * dt
                prev_g = g
            if step < n_steps:
                b = spec.drift(t, x)
                s = spec.vol_diag(t, x)
                dw = np.sqrt(dt) * noise[:, step]
                if store_paths:
                    all_incr[lo:hi, step] = dw
                x = x + b * dt + s * dw
        terminal[lo:hi] = x

    payoff = None
    if parts is not None:
        kappa, _ = parts
        phi = np.asarray(spec.terminal(terminal), dtype=float).reshape(n_paths)
        horizon = float(times[-1])
        payoff = np.exp(kappa * (horizon - t_start)) * (phi + theta) + integral
    sched_i = tuple(
        ImpulseSchedule(PLAYER_I, tuple(ev)) for ev in events_i
    )
    sched_ii = tuple(
        ImpulseSchedule(PLAYER_II, tuple(ev)) for ev in events_ii
    )
    return PathEnsemble(
        n_paths=n_paths,
        seed=seed,
        t0=t_start,
        start_level=start,
        times=times.copy(),
        terminal_state=terminal,
        theta=theta,
        payoff=payoff,
        discounted_integral=integral,
        schedules_I=sched_i,
        schedules_II=sched_ii,
        capped=capped,
        substream_ids=np.arange(n_paths, dtype=np.int64),
        states=all_states,
        increments=all_incr,
    )


def evaluate_cost_mc(ensemble: PathEnsemble, spec: ProblemSpec):
    """Sample mean and standard error of the discounted payoff

        e^{kappa (T - t0)} (Phi(X_T) + Theta_T)
            + integral of e^{kappa (s - t0)} a(s, X_s) ds

    for drivers f = a(t, x) + kappa y; errors out otherwise."""
    if affine_driver_parts(spec) is None or ensemble.payoff is None:
        raise UnsupportedDriverError(
            "driver is neither y-free nor affine in y; "
            "use the lattice oracle for general drivers"
        )
    payoff = ensemble.payoff
    n = ensemble.n_paths
    estimate = float(np.sum(payoff) / n)  # pairwise summation, order-stable
    if n > 1:
        stderr = float(np.std(payoff, ddof=1) / np.sqrt(n))
    else:
        stderr = 0.0
    return estimate, stderr
