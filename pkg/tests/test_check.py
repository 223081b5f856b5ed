import io
import json
from dataclasses import replace

import pytest

from oracles import enumerate_paths, exists_safe_search
from roadgame.check import (Fixed, Greedy, Permissive, Tree, check_exists_safe, check_goal_under,
                            check_safety_under, inject_trajectory, replay, simulate, trajectory_from_json,
                            trajectory_to_json, write_trace_jsonl)
from roadgame.dynamics import DynamicsParams
from roadgame.errors import ControllerUndefined
from roadgame.fixtures import load_fixture, straight_lanelet
from roadgame.game import GridSpec
from roadgame.learning import LearnConfig, goal, learn, qtable_to_qtrees
from roadgame.qtree import DecisionTree, Leaf
from roadgame.scenario import Circle, Point2, parse_scenario, serialize_scenario
from roadgame.world import World

P = DynamicsParams()
KEEP, BRAKE, FAST = 4, 1, 7


def _open_field():
    """One huge lanelet and no obstacles: nothing within reach is unsafe."""
    sc = load_fixture("straight_one_lanelet")
    return replace(sc, lanelets=(straight_lanelet(100, -500, 500, -500, 500),), obstacles=())


# ---------------------------------------------------------------------------
# safety

def test_accelerating_into_parked_car_fails_with_replayable_trace():
    sc = load_fixture("straight_one_lanelet")
    v = check_safety_under(sc, Fixed(FAST), P, 10)
    assert not v.holds
    flags = replay(sc, P, v.counterexample)
    assert flags[-1] and not any(flags[:-1])
    last = v.counterexample[-1][0]
    assert World(sc, P).collides(last)
    assert [s.t for s, _, _ in v.counterexample] == list(range(len(v.counterexample)))


@pytest.mark.parametrize("index", range(9))
def test_open_field_any_controller_holds(index):
    assert check_safety_under(_open_field(), Fixed(index), P, 10).holds


def test_trace_export_jsonl():
    sc = load_fixture("straight_one_lanelet")
    v = check_safety_under(sc, Fixed(FAST), P, 10)
    buf = io.StringIO()
    write_trace_jsonl(v.trace_records(), buf)
    lines = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert len(lines) == len(v.counterexample)
    assert lines[0]["action"] == FAST and lines[-1]["action"] is None


def test_shielded_greedy_on_corridor(synth):
    sc, cfg, g, ps = synth.get("corridor")
    qt = learn(sc, LearnConfig(episodes=300, seed=1), shield=ps, p=cfg.dynamics)
    ctl = Greedy(qtable_to_qtrees(qt, g), shield=ps)
    v = check_safety_under(sc, ctl, cfg.dynamics, g.horizon)
    assert v.holds
    world = World(sc, cfg.dynamics)
    failed, _ = enumerate_paths(world, ctl, cfg.dynamics, g.horizon,
                                lambda s, o: "fail" if world.unsafe(s, o) else ("done" if s.t >= g.horizon else None))
    assert not failed


@pytest.mark.parametrize("name", ["corridor", "left_turn"])
def test_shield_theorem(synth, name):
    sc, cfg, g, ps = synth.get(name)
    assert check_safety_under(sc, Permissive(ps), cfg.dynamics, g.horizon).holds


def test_controller_undefined_is_reported():
    sc = load_fixture("straight_one_lanelet")
    dt = DecisionTree(("x", "y", "theta", "v", "t"), ("keep_straight",), Leaf(None))
    with pytest.raises(ControllerUndefined) as err:
        check_safety_under(sc, Tree(dt), P, 5)
    assert err.value.state.x == 5.0


# ---------------------------------------------------------------------------
# goal

def test_goal_reached_by_driving_straight():
    sc = load_fixture("straight_one_lanelet")
    v = check_goal_under(sc, Fixed(KEEP), P, 10)
    assert v.holds


def test_stalling_controller_misses_goal():
    sc = load_fixture("straight_one_lanelet")
    v = check_goal_under(sc, Fixed(BRAKE), P, 10)
    assert not v.holds
    trace = v.counterexample
    assert trace[-1][0].t == 10
    assert trace[-1][0].v == 0.0
    assert not any(goal(s, sc.planning_problem.goal) for s, _, _ in trace)


def test_reactive_goal_matches_enumeration():
    sc = load_fixture("reactive")
    world = World(sc, P)
    g = sc.planning_problem.goal
    H = 6

    def stop(s, o):
        if goal(s, g):
            return "done"
        return "fail" if s.t >= H else None

    for idx in (KEEP, FAST, BRAKE, 5):
        failed, _ = enumerate_paths(world, Fixed(idx), P, H, stop)
        assert check_goal_under(sc, Fixed(idx), P, H).holds == (not failed)


# ---------------------------------------------------------------------------
# exists

def test_exists_open_field():
    v = check_exists_safe(_open_field(), P, GridSpec(horizon=5))
    assert v.holds
    assert len(v.witness) == 6


def test_exists_start_colliding():
    sc = load_fixture("straight_one_lanelet")
    ob = sc.obstacles[0]
    moved = replace(ob, initial_state=replace(ob.initial_state, position=Point2(5.0, 2.5)))
    v = check_exists_safe(replace(sc, obstacles=(moved,)), P, GridSpec(horizon=5))
    assert not v.holds
    assert len(v.counterexample) == 1


@pytest.mark.parametrize("name,horizon", [("corridor", 3), ("blocked", 3), ("straight_one_lanelet", 3)])
def test_exists_matches_exhaustive_search(name, horizon):
    sc = load_fixture(name)
    g = GridSpec.for_scenario(sc, P, horizon=horizon)
    want = exists_safe_search(World(sc, P), P, horizon)
    assert check_exists_safe(sc, P, g, memo="concrete").holds == want
    v = check_exists_safe(sc, P, g)
    # abstract memo may only lose witnesses
    assert v.holds <= want
    if v.holds:
        assert not any(replay(sc, P, v.witness))


def test_blocked_has_no_safe_sequence():
    sc = load_fixture("blocked")
    assert not check_exists_safe(sc, P, GridSpec.for_scenario(sc, P, horizon=3), memo="concrete").holds


# ---------------------------------------------------------------------------
# simulation and injection

def test_simulate_length_and_determinism(synth):
    sc, cfg, g, ps = synth.get("corridor")
    a = simulate(sc, Permissive(ps), cfg.dynamics, seed=5, horizon=10)
    b = simulate(sc, Permissive(ps), cfg.dynamics, seed=5, horizon=10)
    assert len(a.states) == 11
    assert [s.time_step for s in a.states] == list(range(11))
    assert a == b
    assert trajectory_to_json(a) == trajectory_to_json(b)
    world = World(sc, cfg.dynamics)
    from roadgame.dynamics import EgoState
    for r in a.states:
        s = EgoState(r.position.x, r.position.y, r.orientation, r.velocity, r.acceleration, r.time_step)
        assert not world.unsafe(s)


def test_simulate_reactive_seeded():
    sc = load_fixture("reactive")
    a = simulate(sc, Fixed(KEEP), P, seed=1, horizon=8)
    assert a == simulate(sc, Fixed(KEEP), P, seed=1, horizon=8)


def test_inject_counts_ids_and_round_trip():
    sc = load_fixture("straight_one_lanelet")
    tr = simulate(sc, Fixed(KEEP), P, seed=0, horizon=10)
    once = inject_trajectory(sc, tr)
    assert len(once.obstacles) == 2
    assert len(sc.obstacles) == 1
    new = once.obstacles[-1]
    assert new.id == max(sc.all_ids()) + 1 and new.role == "dynamic"
    back = parse_scenario(serialize_scenario(once))
    assert back == once
    assert back.obstacles[-1].behaviour.states == tr.states
    twice = inject_trajectory(once, tr, shape=Circle(1.0))
    assert twice.obstacles[-1].id == new.id + 1
    assert len({o.id for o in twice.obstacles}) == 3


def test_trajectory_json_round_trip():
    tr = simulate(load_fixture("corridor"), Fixed(KEEP), P, seed=0, horizon=10)
    text = trajectory_to_json(tr)
    assert trajectory_from_json(text) == tr
