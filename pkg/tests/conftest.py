"""Shared fixtures: canonical problems solved once per session at a
moderate test resolution."""

from __future__ import annotations

import numpy as np
import pytest

import impulsegame as ig


TEST_BOX = (-6.4, 6.4)
TEST_DX = 0.1


def small_grid(dx: float = TEST_DX, lo: float = TEST_BOX[0], hi: float = TEST_BOX[1]):
    return ig.Grid((lo,), (hi,), (dx,))


@pytest.fixture(scope="session")
def grid_small():
    return small_grid()


@pytest.fixture(scope="session")
def solved(grid_small):
    """PDE solutions of all canonical problems on the small grid."""
    out = {}
    for name in ig.CANONICAL_PROBLEMS:
        spec = ig.get_problem(name)
        sgrid = ig.make_spacetime_grid(spec, grid_small)
        out[name] = (spec, ig.solve_pde(spec, sgrid))
    return out


@pytest.fixture(scope="session")
def lattice_solved(grid_small):
    """Lattice solutions of all canonical problems on the small grid."""
    out = {}
    for name in ig.CANONICAL_PROBLEMS:
        spec = ig.get_problem(name)
        model = ig.build_lattice(spec, grid_small)
        out[name] = (spec, model, ig.solve_game(model))
    return out


def hand_spec_5node():
    """The 5-node hand example: nodes {-2..2}, Phi=(0,0,0,0,1), U={+2}
    with c=1.0, V-set={-2} with chi=0.6."""
    return ig.ProblemSpec(
        dim=1,
        horizon_T=1.0,
        drift_b=(ig.CoefficientForm("constant", (0.0,)),),
        vol_sigma=(ig.CoefficientForm("constant", (0.0,)),),
        driver_f=ig.CoefficientForm("constant", (0.0,)),
        terminal_Phi=ig.CoefficientForm(
            "tabulated", knots=((-2.0, -1.0, 0.0, 1.0, 2.0),),
            table=(0.0, 0.0, 0.0, 0.0, 1.0),
        ),
        cost_c=ig.CoefficientForm("constant", (1.0,)),
        gain_chi=ig.CoefficientForm("constant", (0.6,)),
        impulse_set_U=ig.DiscreteImpulseSet(((2.0,),), "U_player_I"),
        impulse_set_V=ig.DiscreteImpulseSet(((-2.0,),), "V_player_II"),
        name="hand5",
    )


def hand_grid_5node():
    return ig.Grid((-2.0,), (2.0,), (1.0,))


@pytest.fixture()
def hand5():
    return hand_spec_5node(), hand_grid_5node()
