"""Game instances: coefficients, costs, impulse sets, and sampled
verification of the standing positivity/monotonicity assumptions.

Coefficient functions come from a closed registry of named forms so that a
problem is fully reproducible from a handful of scalars.  The roles differ
slightly in how a form is read:

* state-scalar roles (terminal payoff, drift/volatility components,
  x-dependent drivers): ``constant [k]``, ``linear [a1..an(, b)]``,
  ``cosine [amp, freq]`` meaning ``amp*cos(freq*sum(x))``,
  ``gaussian_bump [amp, width, c1..cn]``, ``tabulated`` (knots + table,
  multilinear between knots, domain error outside the knot box);
* drivers additionally accept ``affine_in_y [a, kappa]`` meaning
  ``a + kappa*y``;
* cost roles (impulse cost ``c``, impulse gain ``chi``, floor ``h``) accept
  ``constant [k]`` and ``linear [k0, k1]`` meaning ``k0 + k1*t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .grids import DomainError, Grid

FORM_KINDS = ("constant", "linear", "affine_in_y", "cosine", "gaussian_bump", "tabulated")


@dataclass(frozen=True)
class CoefficientForm:
    kind: str
    params: tuple[float, ...] = ()
    knots: tuple[tuple[float, ...], ...] = ()
    table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in FORM_KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "tabulated":
            if not self.knots or not self.table:
                raise ValueError("tabulated form needs knots and table")
            for ax in self.knots:
                if list(ax) != sorted(ax) or len(ax) < 2:
                    raise ValueError("tabulated knots must be sorted, length >= 2")
            n = math.prod(len(ax) for ax in self.knots)
            if len(self.table) != n:
                raise ValueError("table length does not match knot grid")
        elif self.kind == "affine_in_y":
            if len(self.params) != 2:
                raise ValueError("affine_in_y takes params (a, kappa)")
        elif self.kind == "cosine":
            if len(self.params) != 2:
                raise ValueError("cosine takes params (amplitude, frequency)")
        elif self.kind == "constant":
            if len(self.params) != 1:
                raise ValueError("constant takes a single param")

    def _tab_grid(self) -> Grid:
        # Tabulated knots are required to be uniform; re-derive the step.
        mins, maxs, steps = [], [], []
        for ax in self.knots:
            h = (ax[-1] - ax[0]) / (len(ax) - 1)
            for i, k in enumerate(ax):
                if abs(k - (ax[0] + i * h)) > 1e-9 * (1 + abs(k)):
                    raise ValueError("tabulated knots must be uniformly spaced")
            mins.append(ax[0])
            maxs.append(ax[-1])
            steps.append(h)
        return Grid(tuple(mins), tuple(maxs), tuple(steps))

    def eval_state(self, t, x) -> np.ndarray:
        """Evaluate as a function of the state ``x`` (shape (..., dim))."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "constant":
            return np.full(x.shape[:-1], self.params[0])
        if self.kind == "linear":
            dim = x.shape[-1]
            if len(self.params) == dim:
                return x @ np.asarray(self.params)
            if len(self.params) == dim + 1:
                return x @ np.asarray(self.params[:-1]) + self.params[-1]
            raise ValueError("linear state form params must match dim (+1)")
        if self.kind == "cosine":
            amp, freq = self.params
            return amp * np.cos(freq * x.sum(axis=-1))
        if self.kind == "gaussian_bump":
            amp, width = self.params[0], self.params[1]
            center = np.asarray(self.params[2:])
            if center.shape[0] != x.shape[-1]:
                raise ValueError("gaussian_bump center must match dim")
            d2 = ((x - center) ** 2).sum(axis=-1)
            return amp * np.exp(-d2 / (2.0 * width * width))
        if self.kind == "tabulated":
            grid = self._tab_grid()
            vals = np.asarray(self.table).reshape(grid.shape)
            return grid.interpolate(vals, x)
        raise ValueError(f"form kind {self.kind!r} is not a state form")

    def eval_driver(self, t, x, y, z) -> np.ndarray:
        if self.kind == "affine_in_y":
            a, kappa = self.params
            return a + kappa * np.asarray(y, dtype=float)
        return self.eval_state(t, x)

    def eval_cost(self, t, action) -> float:
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "linear":
            k0, k1 = self.params
            return k0 + k1 * t
        raise ValueError(f"form kind {self.kind!r} is not a cost form")


@dataclass(frozen=True)
class DiscreteImpulseSet:
    """Finite list of impulse shifts for one player."""

    actions: tuple[tuple[float, ...], ...]
    label: str  # "U_player_I" | "V_player_II"

    def __post_init__(self):
        if self.label not in ("U_player_I", "V_player_II"):
            raise ValueError(f"bad impulse set label {self.label!r}")
        acts = tuple(tuple(float(c) for c in a) for a in self.actions)
        object.__setattr__(self, "actions", acts)
        if len(set(acts)) != len(acts):
            raise ValueError("duplicate impulse actions")

    def __len__(self) -> int:
        return len(self.actions)

    def as_array(self) -> np.ndarray:
        if not self.actions:
            return np.zeros((0, 1))
        return np.asarray(self.actions, dtype=float)


@dataclass(frozen=True)
class ProblemSpec:
    dim: int
    horizon_T: float
    drift_b: tuple[CoefficientForm, ...]
    vol_sigma: tuple[CoefficientForm, ...]
    driver_f: CoefficientForm
    terminal_Phi: CoefficientForm
    cost_c: CoefficientForm
    gain_chi: CoefficientForm
    impulse_set_U: DiscreteImpulseSet
    impulse_set_V: DiscreteImpulseSet
    h_floor: CoefficientForm = CoefficientForm("constant", (0.3,))
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.horizon_T <= 0:
            raise ValueError("horizon must be positive")
        if len(self.drift_b) != self.dim or len(self.vol_sigma) != self.dim:
            raise ValueError("drift/volatility need one component form per axis")
        for a in self.impulse_set_U.actions:
            if len(a) != self.dim:
                raise ValueError("player-I action dimension mismatch")
        for a in self.impulse_set_V.actions:
            if len(a) != self.dim:
                raise ValueError("player-II action dimension mismatch")

    # Vectorized coefficient evaluation over node arrays -----------------

    def drift(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        comps = [f.eval_state(t, x) for f in self.drift_b]
        return np.stack(comps, axis=-1)

    def vol_diag(self, t, x) -> np.ndarray:
        """Diagonal of the volatility matrix, shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        comps = [f.eval_state(t, x) for f in self.vol_sigma]
        return np.stack(comps, axis=-1)

    def driver(self, t, x, y, z) -> np.ndarray:
        return self.driver_f.eval_driver(t, x, y, z)

    def terminal(self, x) -> np.ndarray:
        return self.terminal_Phi.eval_state(self.horizon_T, x)

    def cost(self, t, action) -> float:
        return self.cost_c.eval_cost(t, action)

    def gain(self, t, action) -> float:
        return self.gain_chi.eval_cost(t, action)

    def floor_h(self, t) -> float:
        return self.h_floor.eval_cost(t, None)

    def driver_lipschitz_y(self) -> float:
        """Lipschitz constant of the driver in its y argument."""
        if self.driver_f.kind == "affine_in_y":
            return abs(self.driver_f.params[1])
        return 0.0


def evaluate_coefficients(spec: ProblemSpec, t: float, x, y: float, z):
    """Point evaluation of (b, sigma, f, phi) at one (t, x, y, z)."""
    if not 0.0 <= t <= spec.horizon_T:
        raise ValueError(f"t={t} outside [0, {spec.horizon_T}]")
    x = np.asarray(x, dtype=float).reshape(spec.dim)
    b = spec.drift(t, x[None, :])[0]
    sigma = np.diag(spec.vol_diag(t, x[None, :])[0])
    f = float(np.asarray(spec.driver(t, x[None, :], np.asarray([y]), z))[0])
    phi = float(spec.terminal(x[None, :])[0])
    return b, sigma, f, phi


# Assumption validation --------------------------------------------------


@dataclass
class Violation:
    check: str
    point: tuple
    lhs: float
    rhs: float


@dataclass
class AssumptionReport:
    a1_pass: bool
    a2_pass: bool
    a3_pass: bool
    a4_pass: bool
    A4_monotone_pass: bool
    violations: list[Violation] = field(default_factory=list)
    lipschitz_estimates: dict[str, float] = field(default_factory=dict)
    f_increasing: bool = False
    f_decreasing: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return (
            self.a1_pass
            and self.a2_pass
            and self.a3_pass
            and self.a4_pass
            and self.A4_monotone_pass
        )

    def to_dict(self) -> dict:
        return {
            "a1_pass": self.a1_pass,
            "a2_pass": self.a2_pass,
            "a3_pass": self.a3_pass,
            "a4_pass": self.a4_pass,
            "A4_monotone_pass": self.A4_monotone_pass,
            "f_increasing": self.f_increasing,
            "f_decreasing": self.f_decreasing,
            "violations": [
                {"check": v.check, "point": list(v.point), "lhs": v.lhs, "rhs": v.rhs}
                for v in self.violations
            ],
            "lipschitz_estimates": self.lipschitz_estimates,
            "warnings": self.warnings,
        }


def _match_action(composite: np.ndarray, actions: np.ndarray, tol: float = 1e-9) -> bool:
    if actions.shape[0] == 0:
        return False
    return bool(np.any(np.all(np.abs(actions - composite) <= tol, axis=1)))


def validate_assumptions(spec: ProblemSpec, sample_budget: int = 64, rng_seed: int = 0) -> AssumptionReport:
    """Sampled falsification of the positivity / subadditivity /
    time-monotonicity conditions on the costs and of the driver's
    monotonicity in y.

    Deterministic for fixed (spec, budget, seed): sample points come from a
    seeded Halton sequence.  Violations are collected, never raised.
    """
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    T = spec.horizon_T
    halton = qmc.Halton(d=2 + spec.dim, seed=rng_seed, scramble=True)
    pts = halton.random(sample_budget)
    times = np.unique(np.concatenate([[0.0, T], pts[:, 0] * T]))
    U = spec.impulse_set_U.as_array()
    V = spec.impulse_set_V.as_array()
    rep = AssumptionReport(True, True, True, True, True)

    # (a1): strictly positive cost floors.
    for t in times:
        for y in U:
            v = spec.cost(t, y)
            if v <= 0:
                rep.a1_pass = False
                rep.violations.append(Violation("a1", (t, tuple(y)), v, 0.0))
        for z in V:
            v = spec.gain(t, z)
            if v <= 0:
                rep.a1_pass = False
                rep.violations.append(Violation("a1", (t, tuple(z)), v, 0.0))

    # (a2)/(a3): subadditivity-minus-h over representable composites.
    for t in times:
        h = spec.floor_h(t)
        for y1 in U:
            for z in V:
                for y2 in U:
                    comp = y1 + z + y2
                    if not _match_action(comp, U):
                        continue
                    lhs = spec.cost(t, comp)
                    rhs = spec.cost(t, y1) - spec.gain(t, z) + spec.cost(t, y2) - h
                    if lhs > rhs + 1e-12:
                        rep.a2_pass = False
                        rep.violations.append(
                            Violation("a2", (t, tuple(y1), tuple(z), tuple(y2)), lhs, rhs)
                        )
        for z1 in V:
            for z2 in V:
                comp = z1 + z2
                if not _match_action(comp, V):
                    continue
                lhs = spec.gain(t, comp)
                rhs = spec.gain(t, z1) + spec.gain(t, z2) - h
                if lhs > rhs + 1e-12:
                    rep.a3_pass = False
                    rep.violations.append(
                        Violation("a3", (t, tuple(z1), tuple(z2)), lhs, rhs)
                    )

    # (a4): costs non-increasing in time.
    tsorted = np.sort(times)
    for i, t in enumerate(tsorted):
        for tcheck in tsorted[i + 1 :]:
            for y in U:
                if spec.cost(t, y) < spec.cost(tcheck, y) - 1e-12:
                    rep.a4_pass = False
                    rep.violations.append(
                        Violation("a4", (t, tcheck, tuple(y)), spec.cost(t, y), spec.cost(tcheck, y))
                    )
            for z in V:
                if spec.gain(t, z) < spec.gain(tcheck, z) - 1e-12:
                    rep.a4_pass = False
                    rep.violations.append(
                        Violation("a4", (t, tcheck, tuple(z)), spec.gain(t, z), spec.gain(tcheck, z))
                    )

    # (A4): monotonicity of f in y.  The literal reading makes f strictly
    # increasing; the validator reports both directions and passes when f
    # is consistently monotone (possibly constant, e.g. y-independent
    # drivers).
    xs = -1.0 + 2.0 * pts[:, 2 : 2 + spec.dim]
    ys = -5.0 + 10.0 * pts[:, 1]
    inc = True
    dec = True
    for i in range(len(pts)):
        t = float(pts[i, 0] * T)
        x = xs[i : i + 1]
        y1 = float(ys[i])
        y2 = y1 + 1.0
        f1 = float(np.asarray(spec.driver(t, x, np.asarray([y1]), None))[0])
        f2 = float(np.asarray(spec.driver(t, x, np.asarray([y2]), None))[0])
        if f1 >= f2 + 1e-12:
            inc = False
        if f1 <= f2 - 1e-12:
            dec = False
        if not inc and not dec:
            rep.A4_monotone_pass = False
            rep.violations.append(Violation("A4", (t, tuple(x[0]), y1, y2), f1, f2))
            break
    rep.f_increasing = inc and not dec
    rep.f_decreasing = dec and not inc

    # Sampled Lipschitz ratio maxima for b, sigma, f in the state.
    box = 4.0
    xa = -box + 2 * box * pts[:, 2 : 2 + spec.dim]
    xb = np.roll(xa, 1, axis=0)
    lip = {"b": 0.0, "sigma": 0.0, "f": 0.0}
    for i in range(len(pts)):
        t = float(pts[i, 0] * T)
        d = float(np.linalg.norm(xa[i] - xb[i]))
        if d < 1e-9:
            continue
        db = np.linalg.norm(spec.drift(t, xa[i : i + 1]) - spec.drift(t, xb[i : i + 1]))
        ds = np.linalg.norm(spec.vol_diag(t, xa[i : i + 1]) - spec.vol_diag(t, xb[i : i + 1]))
        df = abs(
            float(np.asarray(spec.driver(t, xa[i : i + 1], np.asarray([0.0]), None))[0])
            - float(np.asarray(spec.driver(t, xb[i : i + 1], np.asarray([0.0]), None))[0])
        )
        lip["b"] = max(lip["b"], float(db) / d)
        lip["sigma"] = max(lip["sigma"], float(ds) / d)
        lip["f"] = max(lip["f"], df / d)
    rep.lipschitz_estimates = lip

    # U subset of V is a warning-level structural check only.
    if len(U) and len(V):
        for y in U:
            if not _match_action(y, V):
                rep.warnings.append(
                    "discretized player-I action set is not contained in player-II's"
                )
                break
    return rep


# Canonical problem registry ---------------------------------------------


def _const(k: float) -> CoefficientForm:
    return CoefficientForm("constant", (k,))


def get_problem(name: str) -> ProblemSpec:
    """Named canonical problems, loadable without any config file."""
    if name == "P0":
        return ProblemSpec(
            dim=1,
            horizon_T=1.0,
            drift_b=(_const(0.0),),
            vol_sigma=(_const(0.0),),
            driver_f=_const(0.0),
            terminal_Phi=_const(3.0),
            cost_c=_const(1e3),
            gain_chi=_const(0.9e3),
            impulse_set_U=DiscreteImpulseSet(((1.0,),), "U_player_I"),
            impulse_set_V=DiscreteImpulseSet(((-1.0,),), "V_player_II"),
            name="P0",
        )
    if name in ("P1", "P2"):
        driver = _const(0.0) if name == "P1" else CoefficientForm("affine_in_y", (0.0, -0.1))
        return ProblemSpec(
            dim=1,
            horizon_T=1.0,
            drift_b=(_const(0.0),),
            vol_sigma=(_const(1.0),),
            driver_f=driver,
            terminal_Phi=CoefficientForm("cosine", (1.0, 1.0)),
            cost_c=_const(10.0),
            gain_chi=_const(9.0),
            impulse_set_U=DiscreteImpulseSet(((1.0,),), "U_player_I"),
            impulse_set_V=DiscreteImpulseSet(((-1.0,),), "V_player_II"),
            name=name,
        )
    if name == "P3":
        u_actions = tuple((0.5 * k,) for k in range(1, 7))
        v_actions = tuple((-0.5 * k,) for k in range(1, 7))
        return ProblemSpec(
            dim=1,
            horizon_T=1.0,
            drift_b=(_const(0.0),),
            vol_sigma=(_const(0.5),),
            driver_f=_const(0.0),
            terminal_Phi=CoefficientForm("cosine", (1.0, 1.0)),
            cost_c=_const(1.0),
            gain_chi=_const(0.6),
            impulse_set_U=DiscreteImpulseSet(u_actions, "U_player_I"),
            impulse_set_V=DiscreteImpulseSet(v_actions, "V_player_II"),
            name="P3",
        )
    raise KeyError(f"unknown canonical problem {name!r}")


CANONICAL_PROBLEMS = ("P0", "P1", "P2", "P3")
