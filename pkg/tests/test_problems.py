import numpy as np
import pytest

import impulsegame as ig
from impulsegame.problems import CoefficientForm, validate_assumptions


def _const_cost_spec(c=1.0, chi=0.6, h=0.3, cost_form=None):
    return ig.ProblemSpec(
        dim=1,
        horizon_T=1.0,
        drift_b=(CoefficientForm("constant", (0.0,)),),
        vol_sigma=(CoefficientForm("constant", (1.0,)),),
        driver_f=CoefficientForm("constant", (0.0,)),
        terminal_Phi=CoefficientForm("cosine", (1.0, 1.0)),
        cost_c=cost_form or CoefficientForm("constant", (c,)),
        gain_chi=CoefficientForm("constant", (chi,)),
        impulse_set_U=ig.DiscreteImpulseSet(((1.0,), (2.0,)), "U_player_I"),
        impulse_set_V=ig.DiscreteImpulseSet(((-1.0,),), "V_player_II"),
        h_floor=CoefficientForm("constant", (h,)),
        name="test",
    )


def test_evaluate_constant_forms():
    spec = ig.get_problem("P0")
    b, sigma, f, phi = ig.evaluate_coefficients(spec, 0.3, [1.7], 5.0, [0.1])
    assert np.array_equal(b, [0.0])
    assert np.array_equal(sigma, [[0.0]])
    assert f == 0.0
    assert phi == 3.0
    spec1 = ig.get_problem("P1")
    b, sigma, f, phi = ig.evaluate_coefficients(spec1, 0.0, [0.0], 0.0, [0.0])
    assert sigma[0, 0] == 1.0 and phi == 1.0


def test_evaluate_cosine_at_zero():
    form = CoefficientForm("cosine", (1.0, 1.0))
    assert float(form.eval_state(0.0, [[0.0]])[0]) == 1.0


def test_evaluate_affine_in_y():
    form = CoefficientForm("affine_in_y", (0.2, -0.1))
    assert float(form.eval_driver(0.0, [[0.0]], 10.0, [[0.0]])) == pytest.approx(-0.8)


def test_evaluate_pure():
    spec = ig.get_problem("P2")
    a = ig.evaluate_coefficients(spec, 0.5, [0.7], 2.0, [0.3])
    b = ig.evaluate_coefficients(spec, 0.5, [0.7], 2.0, [0.3])
    for u, v in zip(a, b):
        assert np.array_equal(np.asarray(u), np.asarray(v))


def test_evaluate_domain_checks():
    spec = ig.get_problem("P1")
    with pytest.raises(ValueError):
        ig.evaluate_coefficients(spec, 2.0, [0.0], 0.0, [0.0])


def test_tabulated_outside_box_raises():
    form = CoefficientForm("tabulated", knots=((0.0, 1.0),), table=(0.0, 1.0))
    with pytest.raises(ig.DomainError):
        form.eval_state(0.0, [[2.0]])


def test_constant_costs_pass():
    rep = validate_assumptions(_const_cost_spec(1.0, 0.6, 0.3))
    # a2 arithmetic: 1.0 <= 1.0 - 0.6 + 1.0 - 0.3 = 1.1
    assert rep.a1_pass and rep.a2_pass and rep.a3_pass and rep.a4_pass


def test_a2_violation_witnessed():
    rep = validate_assumptions(_const_cost_spec(0.5, 0.6, 0.3))
    assert not rep.a2_pass
    wit = [v for v in rep.violations if v.check == "a2"]
    assert wit, "a2 violation must carry a witness"
    # 0.5 > 0.5 - 0.6 + 0.5 - 0.3 = 0.1
    assert wit[0].lhs == pytest.approx(0.5)
    assert wit[0].rhs == pytest.approx(0.1)


def test_a4_time_increasing_cost_fails():
    rep = validate_assumptions(
        _const_cost_spec(cost_form=CoefficientForm("linear", (1.0, 1.0)))
    )
    assert not rep.a4_pass
    wit = [v for v in rep.violations if v.check == "a4"]
    assert wit and wit[0].lhs < wit[0].rhs


def test_a1_zero_floor_fails():
    bad = _const_cost_spec(c=0.0)
    rep = validate_assumptions(bad)
    assert not rep.a1_pass
    assert any(v.check == "a1" for v in rep.violations)


def test_canonical_problems_pass():
    for name in ig.CANONICAL_PROBLEMS:
        rep = validate_assumptions(ig.get_problem(name))
        assert rep.all_pass, f"{name}: {[v.check for v in rep.violations]}"


def test_validator_deterministic():
    spec = ig.get_problem("P3")
    a = validate_assumptions(spec, sample_budget=32, rng_seed=5)
    b = validate_assumptions(spec, sample_budget=32, rng_seed=5)
    assert a.to_dict() == b.to_dict()


def test_every_false_flag_has_witness():
    rep = validate_assumptions(_const_cost_spec(0.5, 0.6, 0.3))
    flags = {
        "a1": rep.a1_pass, "a2": rep.a2_pass,
        "a3": rep.a3_pass, "a4": rep.a4_pass,
    }
    for check, ok in flags.items():
        if not ok:
            assert any(v.check == check for v in rep.violations)


def test_duplicate_actions_rejected():
    with pytest.raises(ValueError):
        ig.DiscreteImpulseSet(((1.0,), (1.0,)), "U_player_I")


def test_problem_spec_invariants():
    with pytest.raises(ValueError):
        ig.ProblemSpec(
            dim=0,
            horizon_T=1.0,
            drift_b=(CoefficientForm("constant", (0.0,)),),
            vol_sigma=(CoefficientForm("constant", (0.0,)),),
            driver_f=CoefficientForm("constant", (0.0,)),
            terminal_Phi=CoefficientForm("constant", (0.0,)),
            cost_c=CoefficientForm("constant", (1.0,)),
            gain_chi=CoefficientForm("constant", (1.0,)),
            impulse_set_U=ig.DiscreteImpulseSet(((1.0,),), "U_player_I"),
            impulse_set_V=ig.DiscreteImpulseSet(((-1.0,),), "V_player_II"),
        )


def test_registry_contents():
    p3 = ig.get_problem("P3")
    assert len(p3.impulse_set_U) == 6
    assert p3.gain(0.0, np.array([-0.5])) == pytest.approx(0.6)
    with pytest.raises(KeyError):
        ig.get_problem("P9")
