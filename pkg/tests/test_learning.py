import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import chain_value_iteration, convex_distance, point_in_polygon_closed, rect_polygon
from roadgame.dynamics import DynamicsParams, EgoState, actions, obstacle_state_at, step
from roadgame.errors import NotWinning
from roadgame.fixtures import load_fixture
from roadgame.game import GridSpec
from roadgame.geometry import lanelet_polygon
from roadgame.learning import (ChainEnv, LearnConfig, QTable, Transition, goal, jsonl_logger, learn, q_learning,
                               qtable_to_qtrees, reward)
from roadgame.qtree import q_values
from roadgame.scenario import GoalRegion, Interval, Point2, Rectangle

P = DynamicsParams()
ACTS = actions(P)


# ---------------------------------------------------------------------------
# reward and goal

def test_reward_goal_collision_cruise():
    sc = load_fixture("straight_one_lanelet")
    cfg = LearnConfig()
    s = EgoState(20.0, 2.5, 0.0, 10.0, 0.0, 1)
    # into the goal rectangle centred at (30, 2.5)
    assert reward(s, ACTS[4], EgoState(30.0, 2.5, 0.0, 10.0, 0.0, 2), sc, cfg) == 100.0
    # onto the parked car at (45, 2.5)
    assert reward(s, ACTS[4], EgoState(45.0, 2.5, 0.0, 10.0, 0.0, 2), sc, cfg) == -100.0
    assert reward(s, ACTS[4], EgoState(15.0, 2.5, 0.0, 10.0, 0.0, 2), sc, cfg) == -1.0
    assert reward(s, ACTS[7], EgoState(15.0, 2.5, 0.0, 10.0, 0.0, 2), sc, cfg) == pytest.approx(-1.2)


def test_reward_weights_configurable():
    sc = load_fixture("straight_one_lanelet")
    cfg = LearnConfig(goal_reward=7.0, step_cost=0.5, accel_cost=0.0)
    s = EgoState(20.0, 2.5, 0.0, 10.0, 0.0, 1)
    assert reward(s, ACTS[4], EgoState(30.0, 2.5, 0.0, 10.0, 0.0, 2), sc, cfg) == 7.0
    assert reward(s, ACTS[7], EgoState(15.0, 2.5, 0.0, 10.0, 0.0, 2), sc, cfg) == -0.5


def test_goal_predicate_examples():
    g = GoalRegion(Rectangle(10, 5, Point2(30, 2.5)), Interval(2, 10))
    assert goal(EgoState(31, 2, 0.0, 5.0, 0.0, 3), g)
    assert not goal(EgoState(31, 2, 0.0, 5.0, 0.0, 1), g)
    assert not goal(EgoState(40, 2, 0.0, 5.0, 0.0, 3), g)
    g2 = GoalRegion(Rectangle(10, 5, Point2(30, 2.5)), Interval(0, 10), Interval(-0.1, 0.1))
    assert goal(EgoState(31, 2, 0.0, 5.0, 0.0, 3), g2)
    assert not goal(EgoState(31, 2, 0.5, 5.0, 0.0, 3), g2)
    g3 = GoalRegion(None, Interval(0, 10), velocity=Interval(0, 3))
    assert goal(EgoState(-500, 7, 2.0, 2.0, 0.0, 3), g3)
    assert not goal(EgoState(-500, 7, 2.0, 4.0, 0.0, 3), g3)


def test_config_validation():
    for bad in (dict(alpha=0), dict(alpha=1.5), dict(gamma=-0.1), dict(epsilon_end=2), dict(episodes=-1)):
        with pytest.raises(ValueError):
            LearnConfig(**bad)
    cfg = LearnConfig(episodes=11)
    assert cfg.epsilon(0) == 1.0 and cfg.epsilon(10) == pytest.approx(0.05)


# ---------------------------------------------------------------------------
# Q-learning core

def test_chain_converges_to_value_iteration():
    qt = q_learning(ChainEnv(length=3, horizon=10), LearnConfig(gamma=1.0))
    Q = chain_value_iteration(3, 10, gamma=1.0)
    assert Q[(0, 0)][2] == 98.0
    assert qt.get((0, 0), 2) == pytest.approx(98.0, abs=1e-6)
    # greedy rollout is the shortest path
    obs, path = (0, 0), []
    env = ChainEnv()
    for _ in range(3):
        a = qt.greedy(obs, range(3))
        path.append(a)
        obs = env.step(obs, a, None).obs
    assert path == [2, 2, 2]
    # greedy action is value-iteration optimal wherever the table has entries
    for (pos, t), row in Q.items():
        if any(((pos, t), a) in qt.values for a in range(3)):
            assert row[qt.greedy((pos, t), range(3))] == max(row)


def test_zero_episodes_gives_empty_table():
    qt = q_learning(ChainEnv(), LearnConfig(episodes=0))
    assert len(qt) == 0 and qt.stats["steps"] == 0
    sc = load_fixture("corridor")
    assert len(learn(sc, LearnConfig(episodes=0))) == 0


class _OneStep:
    """Two-step env with scripted rewards, for checking the update formula."""
    n_actions = 2
    horizon = 2

    def __init__(self, r0, r1):
        self.r = (r0, r1)

    def reset(self, rng):
        return 0

    def key(self, obs):
        return obs

    def describe(self, obs):
        return obs

    def step(self, obs, a, rng):
        return Transition(obs + 1, self.r[obs], obs + 1 >= 2)


@settings(max_examples=200)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.01, 1.0), st.floats(0.0, 1.0),
       st.floats(-50, 50), st.floats(-50, 50))
def test_q_update_formula(r0, r1, alpha, gamma, q_next0, q_next1):
    cfg = LearnConfig(episodes=1, alpha=alpha, gamma=gamma, epsilon_start=0.0, epsilon_end=0.0)
    qt = QTable(n_actions=2)
    qt.values[(1, 0)], qt.values[(1, 1)] = q_next0, q_next1
    q0 = qt.get(0, 0)
    qt.update(0, 0, r0 + gamma * max(q_next0, q_next1), alpha)
    expected = q0 + alpha * (r0 + gamma * max(q_next0, q_next1) - q0)
    assert abs(qt.get(0, 0) - expected) <= 1e-12
    # the same formula through the learning loop, on an empty table
    learned = q_learning(_OneStep(r0, r1), cfg)
    first = alpha * r1
    assert abs(learned.get(1, 0) - first) <= 1e-12
    assert abs(learned.get(0, 0) - alpha * (r0 + gamma * 0.0)) <= 1e-12


def test_reproducible_given_seed():
    sc = load_fixture("corridor")
    g = GridSpec.for_scenario(sc, P, nx=20, ny=10, ntheta=8, nv=4)
    a = learn(sc, LearnConfig(episodes=150, seed=42), p=P, grid=g)
    b = learn(sc, LearnConfig(episodes=150, seed=42), p=P, grid=g)
    c = learn(sc, LearnConfig(episodes=150, seed=43), p=P, grid=g)
    assert a.values == b.values and a.visits == b.visits
    assert a.values != c.values


# ---------------------------------------------------------------------------
# shielded learning

def _exact_unsafe(sc, s, p):
    """Overlap with an obstacle, or a corner off the lanelets, using exact polygons."""
    ego = rect_polygon(s.x, s.y, p.length, p.width, s.theta)
    rings = [[tuple(q) for q in lanelet_polygon(ll).ring] for ll in sc.lanelets]
    if not all(any(point_in_polygon_closed(x, y, r) for r in rings) for x, y in ego):
        return True
    for ob in sc.obstacles:
        st_ = obstacle_state_at(ob, s.t)
        shp = ob.shape
        poly = rect_polygon(st_.position.x, st_.position.y, shp.length, shp.width, st_.orientation)
        if convex_distance(ego, poly) <= 0.0:
            return True
    return False


def test_shielded_corridor_never_violates(synth):
    sc, cfg, g, ps = synth.get("corridor")
    buf = io.StringIO()
    qt = learn(sc, LearnConfig(episodes=300, seed=3), shield=ps, p=cfg.dynamics, log=jsonl_logger(buf))
    assert qt.stats["violations"] == 0
    records = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert len(records) == qt.stats["steps"] > 0
    for rec in records:
        assert not rec["violation"]
        s = EgoState(*rec["state"][:4], 0.0, rec["state"][4])
        nxt = step(s, ACTS[rec["action"]], cfg.dynamics)
        assert not _exact_unsafe(sc, nxt, cfg.dynamics)
        # only shield-allowed actions are taken
        assert rec["action"] in ps.allowed((int(s.t),) + g.cell_of(s.x, s.y, s.theta, s.v))
    # table entries only for shield-allowed pairs
    for (key, a) in qt.values:
        assert ps.masks[key] >> a & 1


def test_unshielded_corridor_does_violate():
    sc = load_fixture("corridor")
    g = GridSpec.for_scenario(sc, P, nx=20, ny=10, ntheta=8, nv=4)
    qt = learn(sc, LearnConfig(episodes=200, seed=3), p=P, grid=g)
    assert qt.stats["violations"] > 0


def test_learning_outside_winning_region(synth):
    _, cfg, _, ps = synth.get("corridor")
    sc = load_fixture("blocked")
    with pytest.raises(NotWinning):
        learn(sc, LearnConfig(episodes=1), shield=ps, p=cfg.dynamics)


# ---------------------------------------------------------------------------
# table to trees

def test_single_cell_single_action_tree():
    from roadgame.qtree import Leaf
    g = GridSpec(nx=1, ny=1, ntheta=1, nv=1, horizon=1)
    qt = QTable(n_actions=1)
    for t in range(2):
        qt.values[((t, 0, 0, 0, 0), 0)] = 5.0
    trees = qtable_to_qtrees(qt, g)
    assert trees.trees == (Leaf(5.0),)


def test_unvisited_action_is_single_sentinel_leaf():
    from roadgame.qtree import Leaf
    g = GridSpec(nx=4, ny=3, ntheta=2, nv=2, horizon=2)
    qt = QTable()
    qt.values[((0, 1, 1, 0, 0), 3)] = 2.0
    trees = qtable_to_qtrees(qt, g)
    for a in range(9):
        if a != 3:
            assert trees.trees[a] == Leaf(-math.inf)
    assert trees.trees[3] != Leaf(-math.inf)


def test_trees_equal_table_on_random_states():
    sc = load_fixture("corridor")
    g = GridSpec.for_scenario(sc, P, nx=20, ny=10, ntheta=8, nv=4)
    qt = learn(sc, LearnConfig(episodes=200, seed=9), p=P, grid=g)
    trees = qtable_to_qtrees(qt, g)
    rng = np.random.default_rng(0)
    hit = 0
    keys = sorted(k for k in qt.states() if k is not None)
    for k in range(10_000):
        if k % 2 and keys:
            # half of the samples inside visited cells
            t, ix, iy, it, iv = keys[int(rng.integers(len(keys)))]
            pt = [rng.uniform(g.edges[d][i], g.edges[d][i + 1]) for d, i in enumerate((ix, iy, it, iv))]
            pt.append(float(t))
        else:
            pt = [rng.uniform(*g.x_bounds), rng.uniform(*g.y_bounds), rng.uniform(-math.pi, math.pi),
                  rng.uniform(*g.v_bounds), float(rng.integers(g.horizon + 1))]
        cell = g.cell_of(*pt[:4])
        key = (int(pt[4]),) + cell
        q = q_values(trees, pt)
        for a in range(9):
            assert q[a] == qt.get(key, a, -math.inf)
        hit += any(math.isfinite(v) for v in q)
    assert hit > 1000
