import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asreach import (Ball, ControllerConfig, DegenerateGeometry, FiniteDiscrete, NotReachable,
                     Outcome, PointMass, PreconditionViolation, Smms, Trajectory, UniformBox,
                     reach_1d, reach_center, reach_in_ball, step, waypoint_plan)
from asreach.control import center_delta, delta_1d, prepare_system
from asreach.model import derive_rng, make_rng
from oracles import reach_center_delta

from conftest import axis_point_masses, car_modes


def test_step_examples():
    y, rate = step((0, 0), PointMass((1, 0)), 0.5, make_rng(0))
    np.testing.assert_array_equal(y, [0.5, 0])
    np.testing.assert_array_equal(rate, [1, 0])
    y, _ = step((3, 4), UniformBox((0, 0), (1, 1)), 0.0, make_rng(0))
    np.testing.assert_array_equal(y, [3, 4])
    y, _ = step((1, 1), FiniteDiscrete((((0, -1), 1),)), 2, make_rng(0))
    np.testing.assert_array_equal(y, [1, -1])
    with pytest.raises(ValueError):
        step((0,), PointMass((1,)), -1, make_rng(0))


def test_delta_formula_matches_oracle():
    assert center_delta(1, 1, 1, 0.1) == pytest.approx(1 / 84, abs=1e-15)
    for L, lam, r, eps in [(1, 1, 1, 0.1), (math.sqrt(128.5), 1 / math.sqrt(2), 5, 0.5), (3, 0.2, 0.7, 0.01)]:
        assert center_delta(L, lam, r, eps) == pytest.approx(reach_center_delta(L, lam, r, eps), rel=1e-15)
    assert delta_1d(0.5, 0.1, 1.0) == pytest.approx(0.05, abs=1e-15)


def test_one_step_hand_evaluation():
    # delta = 1/84 is the hand value for lambda = 1 and L = 1
    cfg = ControllerConfig(eps=0.1, delta_override=1 / 84, max_steps=1)
    t = reach_center(axis_point_masses(2), Ball((0, 0), 1), (0.5, 0), cfg, make_rng(0))
    assert t.mode[0] == 1  # the -e1 mode
    assert t.dwell[0] == pytest.approx(0.0089286, abs=1e-7)
    np.testing.assert_allclose(t.y[1], [0.4910714, 0], atol=1e-7)
    assert t.outcome is Outcome.STEP_BUDGET_EXHAUSTED


def test_one_step_with_computed_lambda():
    # the cross has lambda = 1/sqrt(2), which gives a smaller delta than the hand value
    lam = 1 / math.sqrt(2)
    delta = reach_center_delta(1, lam, 1, 0.1)
    cfg = ControllerConfig(eps=0.1, max_steps=1)
    t = reach_center(axis_point_masses(2), Ball((0, 0), 1), (0.5, 0), cfg, make_rng(0))
    assert t.legs[0].delta == pytest.approx(delta, rel=1e-12)
    assert t.dwell[0] == pytest.approx(delta * 0.75, rel=1e-12)
    assert t.y[1][0] == pytest.approx(0.5 - delta * 0.75, rel=1e-12)


def test_already_inside_target():
    t = reach_center(car_modes(), Ball((0, 0), 5), (0.1, 0.2), ControllerConfig(eps=0.5))
    assert t.reached and t.n_steps == 0


def test_reach_center_car_runs():
    m = car_modes()
    consts = prepare_system(m)
    cfg = ControllerConfig(eps=0.5)
    for i in range(10):
        t = reach_center(m, Ball((0, 0), 5), (3, 0), cfg, derive_rng(1, i), consts=consts)
        assert t.reached
        assert np.all(np.linalg.norm(t.y, axis=1) < 5 * (1 + 1e-9))
        assert np.linalg.norm(t.final) <= 0.5


def test_reach_center_invariants():
    m = car_modes()
    consts = prepare_system(m)
    t = reach_center(m, Ball((1, -1), 5), (3, 2), ControllerConfig(eps=0.5), derive_rng(3, 0), consts=consts)
    c = np.array([1.0, -1.0])
    z = t.y[:-1] - c
    delta = t.legs[0].delta
    np.testing.assert_allclose(t.dwell, delta * (25 - (z ** 2).sum(axis=1)), rtol=1e-12)
    assert np.all(t.dwell > 0)
    step_len = np.linalg.norm(np.diff(t.y, axis=0), axis=1)
    assert np.all(step_len <= t.dwell * m.support * (1 + 1e-12))
    assert np.all(step_len <= delta * 25 * m.support)
    means = np.array(consts.means)
    scores = -(z @ means.T)
    assert np.all(scores[np.arange(len(z)), t.mode] >= scores.max(axis=1))
    np.testing.assert_array_equal(t.t, np.concatenate([[0.0], np.cumsum(t.dwell)]))


def test_reach_center_preconditions():
    with pytest.raises(PreconditionViolation):
        reach_center(car_modes(), Ball((0, 0), 5), (6, 0), ControllerConfig(eps=0.5))
    no = Smms((PointMass((1, 0)), PointMass((0, 1))))
    with pytest.raises(NotReachable) as exc:
        reach_center(no, Ball((0, 0), 5), (1, 0), ControllerConfig(eps=0.5))
    assert exc.value.witness == (-1, -1)


def test_budget_exhaustion_is_reported():
    t = reach_center(car_modes(), Ball((0, 0), 5), (3, 0), ControllerConfig(eps=0.5, max_steps=3))
    assert t.outcome is Outcome.STEP_BUDGET_EXHAUSTED and t.n_steps == 3


def test_waypoint_plan_examples():
    rt, n = waypoint_plan(Ball((0, 0), 1), (-0.5, 0), (0.5, 0))
    assert rt == pytest.approx(0.25) and n == 5
    assert waypoint_plan(Ball((0, 0), 1), (0.2, 0.1), (0.2, 0.1))[1] == 1
    with pytest.raises(DegenerateGeometry):
        waypoint_plan(Ball((0, 0), 1), (1, 0), (0, 0))


def test_waypoints_spaced_evenly():
    cfg = ControllerConfig(eps=0.05)
    t = reach_in_ball(axis_point_masses(2), Ball((0, 0), 1), (-0.5, 0), (0.5, 0), cfg, make_rng(1))
    centers = [leg.center[0] for leg in t.legs]
    np.testing.assert_allclose(centers, [-0.3, -0.1, 0.1, 0.3, 0.5], atol=1e-12)
    assert all(leg.radius == pytest.approx(0.5) for leg in t.legs)
    assert all(leg.eps == pytest.approx(0.99 * 0.05) for leg in t.legs)
    assert t.reached and abs(t.final[0] - 0.5) <= 0.05


def test_reach_in_ball_same_point():
    t = reach_in_ball(car_modes(), Ball((0, 0), 5), (1, 1), (1, 1), ControllerConfig(eps=0.5))
    assert t.reached and t.n_steps == 0


def test_reach_in_ball_car():
    m = car_modes()
    consts = prepare_system(m)
    for i in range(5):
        t = reach_in_ball(m, Ball((0, 0), 6), (-3, 0), (3, 0), ControllerConfig(eps=0.5),
                          derive_rng(11, i), consts=consts)
        assert t.reached
        assert np.linalg.norm(t.final - [3, 0]) <= 0.5
        assert np.all(np.linalg.norm(t.y, axis=1) < 6)
        for leg in t.legs:
            assert np.linalg.norm(leg.center) + leg.radius <= 6 * (1 + 1e-12)


def _uniform_up():
    return Smms((UniformBox((Fraction(1, 2),), (Fraction(2, 5),)),))


def test_reach_1d_geometric_growth():
    m = Smms((PointMass((Fraction(1, 2),)),))
    cfg = ControllerConfig(eps=0.1)
    t = reach_1d(m, (0, 1), 0.1, 0.8, cfg)
    delta = 0.5 * min(0.25, 0.1)
    k = np.arange(t.n_steps + 1)
    np.testing.assert_allclose(t.y[:, 0], 0.1 * (1 + 0.5 * delta) ** k, rtol=1e-12)
    assert np.all(np.diff(t.y[:, 0]) > 0)
    assert t.reached and abs(t.final[0] - 0.8) <= 0.1
    # first step entering (0.7, 0.9)
    assert t.n_steps == math.ceil(math.log(7) / math.log(1 + 0.5 * delta))


def test_reach_1d_uniform_and_overshoot():
    m = _uniform_up()
    for i in range(20):
        t = reach_1d(m, (0, 1), 0.1, 0.8, ControllerConfig(eps=0.1), derive_rng(5, i))
        assert t.reached
        assert t.legs[0].delta == pytest.approx(0.05)
        assert np.all(np.abs(np.diff(t.y[:, 0])) <= 0.1)
        assert np.all((t.y[:, 0] > 0) & (t.y[:, 0] < 1))


def test_reach_1d_mirrored():
    m = Smms((PointMass((1,)), PointMass((Fraction(-3, 4),))))
    t = reach_1d(m, (-2, 3), 2.5, -1.5, ControllerConfig(eps=0.1))
    assert t.reached and abs(t.final[0] + 1.5) <= 0.1
    assert set(t.mode.tolist()) == {1}


def test_reach_1d_preconditions():
    m = _uniform_up()
    with pytest.raises(PreconditionViolation):
        reach_1d(m, (0, 1), 0.8, 0.2, ControllerConfig(eps=0.1))
    t = reach_1d(m, (0, 1), 0.75, 0.8, ControllerConfig(eps=0.1))
    assert t.reached and t.n_steps == 0
    with pytest.raises(PreconditionViolation):
        reach_1d(m, (0, 1), 1.5, 0.8, ControllerConfig(eps=0.1))


def test_config_validation():
    for kw in ({"eps": 0}, {"eps": 1, "max_steps": 0}, {"eps": 1, "delta_safety_factor": 1.5},
               {"eps": 1, "delta_override": -1}):
        with pytest.raises(ValueError):
            ControllerConfig(**kw)


def test_determinism_and_csv_round_trip():
    m = car_modes()
    cfg = ControllerConfig(eps=0.5)
    a = reach_in_ball(m, Ball((0, 0), 5), (3, 0), (-1, 1), cfg, derive_rng(2, 0))
    b = reach_in_ball(m, Ball((0, 0), 5), (3, 0), (-1, 1), cfg, derive_rng(2, 0))
    assert a.to_csv() == b.to_csv()
    assert a.to_json_str(cfg) == b.to_json_str(cfg)
    c = Trajectory.from_csv(a.to_csv())
    np.testing.assert_array_equal(c.y, a.y)
    np.testing.assert_array_equal(c.rate, a.rate)
    np.testing.assert_array_equal(c.dwell, a.dwell)
    np.testing.assert_array_equal(c.mode, a.mode)
    assert a.to_csv().splitlines()[0] == "k,t,y_1,y_2,mode,dwell,rate_1,rate_2,leg"


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.integers(0, 2**32))
def test_reach_center_stays_in_ball(px, py, seed):
    if px * px + py * py >= 0.81:
        return
    m = car_modes()
    t = reach_center(m, Ball((0, 0), 1), (px, py), ControllerConfig(eps=0.2), make_rng(seed))
    assert t.reached
    assert np.all(np.linalg.norm(t.y, axis=1) < 1 + 1e-9)
    assert np.all(t.dwell >= 0)
