import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import exact_arc, fine_euler
from roadgame.dynamics import (N_ACTIONS, DynamicsParams, EgoState, action, actions, integrate, integrate_batch,
                               obstacle_moves, obstacle_state_at, step)
from roadgame.errors import NoBehaviour
from roadgame.fixtures import load_fixture
from roadgame.scenario import Obstacle, ObstacleType, Point2, Reactive, Rectangle, StateRecord

P = DynamicsParams()
ACTS = actions(P)
KEEP = ACTS[4]


def test_nine_distinct_actions():
    assert len(ACTS) == N_ACTIONS == 9
    pairs = {(a.accel_cmd, a.yaw_cmd) for a in ACTS}
    assert len(pairs) == 9
    assert pairs == {(a, y) for a in (-2.0, 0.0, 2.0) for y in (-0.4, 0.0, 0.4)}
    for i, a in enumerate(ACTS):
        assert a.index == i
        assert action(i, P) == a
    assert KEEP.accel_cmd == 0 and KEEP.yaw_cmd == 0
    with pytest.raises(ValueError):
        action(9, P)


def test_rest_is_fixpoint():
    s = EgoState(3.0, 4.0, 0.7, 0.0, 0.0, 2)
    n = step(s, KEEP, P)
    assert (n.x, n.y, n.theta, n.v) == (3.0, 4.0, 0.7, 0.0)
    assert n.t == 3


def test_straight_line_exact():
    n = step(EgoState(0.0, 0.0, 0.0, 10.0), KEEP, P)
    assert n.x == 10.0
    assert n.y == 0.0


def test_fine_step_reference_tolerance():
    """Stated tolerance: 1e-3 between the default integrator and a 1000-sub-step reference.

    Ten forward-Euler sub-steps carry a first-order error near 0.1 m for this
    turn, so this test is expected to fail with the default parameters.
    """
    yaw = P.yaw_rate
    n = step(EgoState(0.0, 0.0, 0.0, 5.0), ACTS[5], P)
    assert ACTS[5].yaw_cmd == yaw and ACTS[5].accel_cmd == 0.0
    rx, ry, _, _ = fine_euler(0.0, 0.0, 0.0, 5.0, 0.0, yaw, 1.0, 1000)
    err = math.hypot(n.x - rx, n.y - ry)
    assert err <= 1e-3, f"10-sub-step Euler is {err:.4f} m from the 1000-sub-step reference"


def test_integrator_converges_to_exact_arc():
    ex, ey = exact_arc(0.0, 0.0, 0.0, 5.0, 0.4, 1.0)
    errs = []
    for k in (10, 20, 40, 80, 1000):
        x, y, _, _ = integrate(0.0, 0.0, 0.0, 5.0, 0.0, 0.4, DynamicsParams(substeps=k))
        errs.append(math.hypot(x - ex, y - ey))
    # first order: doubling the sub-steps halves the error
    for a, b in zip(errs[:3], errs[1:4]):
        assert 1.8 < a / b < 2.2
    assert errs[-1] < 1e-3
    # the default sub-step count stays within 0.11 m on this turn
    assert errs[0] < 0.11


def test_matches_scalar_euler_oracle():
    rng = np.random.default_rng(5)
    for _ in range(200):
        x, y, v = rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 15)
        th = rng.uniform(-math.pi, math.pi)
        a = ACTS[int(rng.integers(9))]
        n = step(EgoState(x, y, th, v), a, P)
        ox, oy, oth, ov = fine_euler(x, y, th, v, a.accel_cmd, a.yaw_cmd, 1.0, 10)
        assert (n.x, n.y, n.v) == pytest.approx((ox, oy, ov), abs=1e-9)
        d = (n.theta - oth + math.pi) % (2 * math.pi) - math.pi
        assert abs(d) < 1e-9


def test_batch_equals_scalar():
    rng = np.random.default_rng(7)
    x, y = rng.uniform(-50, 50, 300), rng.uniform(-50, 50, 300)
    th, v = rng.uniform(-math.pi, math.pi, 300), rng.uniform(0, 15, 300)
    idx = rng.integers(9, size=300)
    acc = np.array([ACTS[i].accel_cmd for i in idx])
    yaw = np.array([ACTS[i].yaw_cmd for i in idx])
    bx, by, bth, bv = integrate_batch(x, y, th, v, acc, yaw, P)
    for k in range(300):
        sx, sy, sth, sv = integrate(x[k], y[k], th[k], v[k], acc[k], yaw[k], P)
        assert (bx[k], by[k], bth[k], bv[k]) == pytest.approx((sx, sy, sth, sv), abs=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        DynamicsParams(substeps=0)
    with pytest.raises(ValueError):
        DynamicsParams(accel=-1)
    with pytest.raises(ValueError):
        DynamicsParams(margin=-0.1)


# ---------------------------------------------------------------------------
# obstacles

def test_static_obstacle_any_time():
    sc = load_fixture("straight_one_lanelet")
    ob = sc.obstacles[0]
    assert obstacle_state_at(ob, 7) == ob.initial_state


def test_trajectory_lookup_and_hold_last():
    ob = load_fixture("dynamic_trajectory").obstacles[0]
    assert len(ob.behaviour.states) == 10
    assert obstacle_state_at(ob, 3).time_step == 3
    assert obstacle_state_at(ob, 15) == ob.behaviour.states[9]


def _reactive(v):
    return Obstacle(7, ObstacleType.CAR, Rectangle(4, 2), "dynamic",
                    StateRecord(0, Point2(0, 0), 0.0, v), Reactive())


def test_reactive_rejected_by_state_lookup():
    with pytest.raises(NoBehaviour):
        obstacle_state_at(_reactive(5.0), 1)


def test_reactive_moves():
    o = _reactive(10.0)
    moves = obstacle_moves(o, o.initial_state, P)
    assert [m.velocity for m in moves] == pytest.approx([10.0, 8.0, 12.0])
    assert all(m.time_step == 1 and m.orientation == 0.0 for m in moves)
    o = _reactive(0.0)
    assert obstacle_moves(o, o.initial_state, P)[1].velocity == 0.0
    o = _reactive(15.0)
    assert obstacle_moves(o, o.initial_state, P)[2].velocity == 15.0


def test_moves_need_reactive():
    sc = load_fixture("straight_one_lanelet")
    with pytest.raises(NoBehaviour):
        obstacle_moves(sc.obstacles[0], sc.obstacles[0].initial_state, P)


# ---------------------------------------------------------------------------
# properties

states = st.builds(EgoState, st.floats(-100, 100), st.floats(-100, 100),
                   st.floats(-math.pi, math.pi).filter(lambda a: a > -math.pi), st.floats(0, 15),
                   st.just(0.0), st.integers(0, 50))


@settings(max_examples=300)
@given(states, st.integers(0, 8))
def test_step_properties(s, i):
    a = ACTS[i]
    n1, n2 = step(s, a, P), step(s, a, P)
    assert n1 == n2
    assert 0.0 <= n1.v <= P.v_max
    assert -math.pi < n1.theta <= math.pi
    assert n1.t == s.t + 1
    assert n1.a == a.accel_cmd


@settings(max_examples=300)
@given(states, st.integers(0, 8), st.floats(-math.pi, math.pi))
def test_rotational_symmetry(s, i, phi):
    c, si = math.cos(phi), math.sin(phi)
    rot = EgoState(s.x * c - s.y * si, s.x * si + s.y * c, s.theta + phi, s.v, s.a, s.t)
    n = step(rot, ACTS[i], P)
    back_x, back_y = n.x * c + n.y * si, -n.x * si + n.y * c
    ref = step(s, ACTS[i], P)
    assert back_x == pytest.approx(ref.x, abs=1e-9)
    assert back_y == pytest.approx(ref.y, abs=1e-9)
    d = (n.theta - phi - ref.theta + math.pi) % (2 * math.pi) - math.pi
    assert abs(d) < 1e-9
    assert n.v == pytest.approx(ref.v, abs=1e-12)
