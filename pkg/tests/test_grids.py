import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import impulsegame as ig
from impulsegame.grids import DomainError, shift_exact


def test_shape_and_axes():
    g = ig.Grid((-1.0,), (1.0,), (0.5,))
    assert g.shape == (5,)
    assert np.allclose(g.axes[0], [-1.0, -0.5, 0.0, 0.5, 1.0])


def test_nodes_2d():
    g = ig.Grid((0.0, 0.0), (1.0, 2.0), (0.5, 1.0))
    assert g.shape == (3, 3)
    assert g.nodes.shape == (3, 3, 2)
    assert np.allclose(g.nodes[2, 1], [1.0, 1.0])


def test_interpolate_exact_on_linear():
    g = ig.Grid((-2.0, -2.0), (2.0, 2.0), (0.5, 0.5))
    vals = 2.0 * g.nodes[..., 0] - 3.0 * g.nodes[..., 1] + 1.0
    pts = np.array([[0.25, -0.75], [1.1, 1.9], [-2.0, 2.0]])
    expect = 2.0 * pts[:, 0] - 3.0 * pts[:, 1] + 1.0
    assert np.allclose(g.interpolate(vals, pts), expect, atol=1e-12)


def test_interpolate_outside_raises():
    g = ig.Grid((0.0,), (1.0,), (0.5,))
    with pytest.raises(DomainError):
        g.interpolate(np.zeros(3), np.array([[1.5]]))


def test_interpolate_node_values_exact():
    g = ig.Grid((0.0,), (2.0,), (0.5,))
    vals = np.array([3.0, -1.0, 4.0, 1.0, 5.0])
    got = g.interpolate(vals, g.flat_nodes())
    assert np.array_equal(got, vals)


def test_exact_offset():
    g = ig.Grid((0.0,), (2.0,), (0.5,))
    assert g.exact_offset(np.array([1.0])) == (2,)
    assert g.exact_offset(np.array([-1.5])) == (-3,)
    assert g.exact_offset(np.array([0.3])) is None


def test_shift_exact():
    vals = np.array([1.0, 2.0, 3.0, 4.0])
    shifted, ok = shift_exact(vals, (1,))
    assert np.array_equal(shifted[:3], [2.0, 3.0, 4.0])
    assert list(ok) == [True, True, True, False]
    shifted, ok = shift_exact(vals, (-2,))
    assert np.array_equal(shifted[2:], [1.0, 2.0])
    assert list(ok) == [False, False, True, True]


def test_shift_exact_out_of_range():
    _, ok = shift_exact(np.ones(3), (5,))
    assert not ok.any()


def test_interior_mask_fraction():
    g = ig.Grid((-1.0,), (1.0,), (0.1,))
    mask = g.interior_mask(0.8)
    axes = g.axes[0]
    assert np.array_equal(mask, np.abs(axes) <= 0.8 + 1e-12)


def test_grid_slice_validation():
    g = ig.Grid((0.0,), (1.0,), (0.5,))
    with pytest.raises(ValueError):
        ig.GridSlice(g, np.zeros(4), 0.0)
    with pytest.raises(ValueError):
        ig.GridSlice(g, np.array([0.0, np.inf, 0.0]), 0.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        ig.Grid((0.0,), (1.0,), (-0.5,))
    with pytest.raises(ValueError):
        ig.Grid((1.0,), (0.0,), (0.5,))


@settings(max_examples=50, deadline=None)
@given(
    w=st.floats(0.0, 1.0),
    a=st.floats(-10, 10),
    b=st.floats(-10, 10),
)
def test_interpolation_within_hull(w, a, b):
    # Convex-combination form keeps the result inside the node range.
    g = ig.Grid((0.0,), (1.0,), (1.0,))
    vals = np.array([a, b])
    got = float(g.interpolate(vals, np.array([[w]]))[0])
    assert min(a, b) - 1e-12 <= got <= max(a, b) + 1e-12
