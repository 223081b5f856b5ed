import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_fixpoint_explicit, brute_fixpoint_grid, scalar_cell
from roadgame.dynamics import DynamicsParams, EgoState
from roadgame.errors import OutsideWinningRegion, SchemaError, Unrealizable
from roadgame.fixtures import load_fixture
from roadgame.game import (ExplicitGame, GridSpec, build_game, shield, shield_indices, solve_safety,
                           strategy_from_json, strategy_to_json)
from roadgame.scenario import Point2, StateRecord

P = DynamicsParams()
SMALL = dict(nx=16, ny=10, ntheta=5, nv=3, horizon=3)


@pytest.fixture(scope="module")
def small_corridor():
    sc = load_fixture("corridor")
    g = GridSpec.for_scenario(sc, P, **SMALL)
    gg = build_game(sc, g, P, "corners")
    return gg, solve_safety(gg, require_initial=False)


def _all_cells(g):
    return [(ix, iy, it, iv) for ix in range(g.nx) for iy in range(g.ny)
            for it in range(g.ntheta) for iv in range(g.nv)]


# ---------------------------------------------------------------------------
# game construction

def test_rest_fixpoint_on_empty_road():
    base = load_fixture("straight_one_lanelet")
    pp = base.planning_problem
    init = replace(pp.initial_state, velocity=0.0)
    sc = replace(base, obstacles=(), planning_problems=(replace(pp, initial_state=init),))
    g = GridSpec.for_scenario(sc, P, nx=12, ny=4, ntheta=5, nv=4, horizon=3)
    gg = build_game(sc, g, P, "corners", action_indices=[4])
    assert g.has_rest_cell
    for ix in range(g.nx):
        for iy in range(g.ny):
            for it in range(g.ntheta):
                for t in range(g.horizon):
                    succ, esc = gg.successors((ix, iy, it, 0), t, 0)
                    assert not esc
                    assert succ == [((ix, iy, it, 0), t + 1)]


@pytest.mark.parametrize("mode", ["center", "corners"])
def test_obstacle_cell_is_bad(mode):
    sc = load_fixture("straight_one_lanelet")
    g = GridSpec.for_scenario(sc, P, nx=60, ny=5, ntheta=8, nv=4, horizon=2)
    gg = build_game(sc, g, P, mode)
    car = sc.obstacles[0].initial_state.position
    cell = g.cell_of(car.x, car.y, 0.0, 5.0)
    for t in range(g.horizon + 1):
        assert gg.bad[(t,) + cell]


def test_corners_contain_center_successors():
    sc = load_fixture("corridor")
    g = GridSpec.for_scenario(sc, P, nx=20, ny=10, ntheta=8, nv=4, horizon=2)
    corners = build_game(sc, g, P, "corners")
    center = build_game(sc, g, P, "center")
    rng = np.random.default_rng(11)
    for _ in range(100):
        cell = tuple(int(rng.integers(n)) for n in g.shape)
        a = int(rng.integers(9))
        cs, cesc = center.successors(cell, 0, a)
        ks, kesc = corners.successors(cell, 0, a)
        assert set(cs) <= set(ks)
        assert kesc or not cesc


def test_unknown_mode_rejected():
    sc = load_fixture("corridor")
    with pytest.raises(ValueError):
        build_game(sc, GridSpec.for_scenario(sc, P, horizon=2), P, "zones")


# ---------------------------------------------------------------------------
# solving

def test_no_bad_states_allows_everything():
    n = 6
    succ = [[[s]] * 9 for s in range(n)]
    ps = solve_safety(ExplicitGame(succ, np.zeros(n, bool), initial=0))
    assert ps.winning.all()
    assert all(ps.allowed(s) == list(range(9)) for s in range(n))


def test_all_bad_is_unrealizable():
    succ = [[[0], [1]], [[1], [0]]]
    with pytest.raises(Unrealizable, match="^no safe path"):
        solve_safety(ExplicitGame(succ, np.ones(2, bool), initial=0))


def test_all_bad_grid_is_unrealizable():
    # the one-lane road is narrower than the conservative footprint at this resolution
    sc = load_fixture("straight_one_lanelet")
    g = GridSpec.for_scenario(sc, P, nx=12, ny=4, ntheta=5, nv=4, horizon=3)
    gg = build_game(sc, g, P, "corners")
    assert gg.bad.all()
    with pytest.raises(Unrealizable):
        solve_safety(gg)


def _corridor_toy():
    # actions: 0 = stay, 1 = right; cell 4 is a wall
    succ = [[[s], [min(s + 1, 4)]] for s in range(5)]
    bad = np.array([False, False, False, False, True])
    return ExplicitGame(succ, bad, initial=0)


def test_corridor_toy_forbids_right_before_wall():
    gg = _corridor_toy()
    ps = solve_safety(gg)
    assert ps.allowed(3) == [0]
    assert ps.allowed(0) == [0, 1]
    W, allowed = brute_fixpoint_explicit(gg.succ, gg.bad)
    assert set(np.flatnonzero(ps.winning)) == W
    assert all(set(ps.allowed(s)) == allowed[s] for s in W)


def test_grid_game_matches_brute_fixpoint(small_corridor):
    gg, ps = small_corridor
    assert gg.n_states <= 10_000
    oracle = brute_fixpoint_grid(gg)
    assert len(oracle) == int(ps.winning.sum()) > 0
    for (t, cell), ok in oracle.items():
        assert set(ps.allowed((t,) + cell)) == {gg.actions[i] for i in ok}


def test_grid_closure(small_corridor):
    gg, ps = small_corridor
    H = gg.grid.horizon
    for t in range(H):
        for cell in _all_cells(gg.grid):
            for a in ps.allowed((t,) + cell):
                succ, esc = gg.successors(cell, t, gg.actions.index(a))
                assert not esc
                assert all(ps.masks[(t2,) + c2] for c2, t2 in succ)


def test_grid_monotone_under_extra_bad(small_corridor):
    gg, ps = small_corridor
    rng = np.random.default_rng(2)
    win = np.argwhere(ps.winning[1])
    for k in rng.choice(len(win), 5, replace=False):
        bad = gg.bad.copy()
        bad[(1,) + tuple(win[k])] = True
        ps2 = solve_safety(replace(gg, bad=bad), require_initial=False)
        assert not (ps2.winning & ~ps.winning).any()
        assert ps2.winning.sum() < ps.winning.sum()


@st.composite
def explicit_games(draw):
    n = draw(st.integers(1, 25))
    n_act = draw(st.integers(1, 4))
    succ = [[draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=3, unique=True)) for _ in range(n_act)]
            for _ in range(n)]
    bad = np.array(draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    return ExplicitGame(succ, bad)


@settings(max_examples=300, deadline=None)
@given(explicit_games())
def test_explicit_matches_oracle_and_is_closed(gg):
    ps = solve_safety(gg, require_initial=False)
    W, allowed = brute_fixpoint_explicit(gg.succ, gg.bad)
    assert set(np.flatnonzero(ps.winning).tolist()) == W
    for s in W:
        assert set(ps.allowed(s)) == allowed[s]
        for a in ps.allowed(s):
            assert all(ps.winning[t] for t in gg.succ[s][a])
    # termination: each sweep that changes W removes a state
    assert ps.iterations - 1 <= gg.n_states


@settings(max_examples=200, deadline=None)
@given(explicit_games(), st.integers(0, 24))
def test_explicit_monotone(gg, extra):
    ps = solve_safety(gg, require_initial=False)
    bad = gg.bad.copy()
    bad[extra % gg.n_states] = True
    ps2 = solve_safety(ExplicitGame(gg.succ, bad), require_initial=False)
    assert not (ps2.winning & ~ps.winning).any()


# ---------------------------------------------------------------------------
# shield

def _centre_state(g, cell, t):
    c = [g.centers(d)[i] for d, i in enumerate(cell)]
    return EgoState(c[0], c[1], c[2], c[3], 0.0, t)


def test_shield_all_actions_cell(small_corridor):
    gg, ps = small_corridor
    full = np.argwhere(ps.masks == 0x1FF)
    assert len(full)
    t, cell = int(full[0][0]), tuple(full[0][1:])
    s = _centre_state(gg.grid, cell, t)
    assert len(shield(ps, s)) == 9
    assert shield_indices(ps, s) == tuple(range(9))


def test_shield_losing_cell(small_corridor):
    gg, ps = small_corridor
    lose = np.argwhere(ps.masks[0] == 0)
    with pytest.raises(OutsideWinningRegion):
        shield(ps, _centre_state(gg.grid, tuple(lose[0]), 0))
    with pytest.raises(OutsideWinningRegion):
        shield(ps, EgoState(-1000.0, 0.0, 0.0, 5.0, 0.0, 0))


def test_shield_edge_state_goes_to_higher_cell(small_corridor):
    gg, ps = small_corridor
    g = gg.grid
    ex = g.edges[0]
    for t in range(g.horizon + 1):
        for cell in np.argwhere(ps.masks[t] != 0):
            ix, iy, it, iv = (int(i) for i in cell)
            if ix == 0:
                continue
            s = EgoState(float(ex[ix]), g.centers(1)[iy], g.centers(2)[it], g.centers(3)[iv], 0.0, t)
            assert scalar_cell(ex.tolist(), s.x) == ix
            assert g.cell_of(s.x, s.y, s.theta, s.v)[0] == ix
            assert set(shield_indices(ps, s)) == set(ps.allowed((t, ix, iy, it, iv)))
            return
    pytest.fail("no winning cell with a lower neighbour")


def test_theta_edge_at_pi_is_last_cell():
    g = GridSpec(ntheta=8)
    assert g.cell_of(50.0, 0.0, math.pi, 5.0)[2] == 7
    assert g.cell_of(50.0, 0.0, -math.pi, 5.0)[2] == 0


@settings(max_examples=300)
@given(st.integers(0, 4), st.integers(0, 40), st.floats(-0.5, 0.5), st.booleans())
def test_cell_of_matches_scalar_rule(dim, k, jitter, on_edge):
    g = GridSpec(nx=40, ny=40, ntheta=8, nv=8)
    dim = min(dim, 3)
    e = g.edges[dim].tolist()
    k = min(k, len(e) - 1)
    val = e[k] if on_edge else min(max(e[k] + jitter * (e[1] - e[0]), e[0]), e[-1])
    point = [g.centers(d)[0] for d in range(4)]
    point[dim] = val
    assert g.cell_of(*point)[dim] == scalar_cell(e, val)


# ---------------------------------------------------------------------------
# persistence

def test_strategy_json_round_trip(small_corridor):
    gg, ps = small_corridor
    back = strategy_from_json(strategy_to_json(ps))
    assert np.array_equal(back.masks, ps.masks)
    assert back.grid == ps.grid and back.params == ps.params
    assert back.actions == ps.actions and back.mode == "corners"
    assert strategy_to_json(back) == strategy_to_json(ps)


def test_strategy_json_rejects_wrong_format():
    with pytest.raises(SchemaError):
        strategy_from_json('{"format": "other"}')
    with pytest.raises(SchemaError):
        strategy_from_json("not json")


def test_initial_state_lookup(small_corridor):
    gg, _ = small_corridor
    s0 = load_fixture("corridor").planning_problem.initial_state
    assert gg.initial == (0,) + gg.grid.cell_of(s0.position.x, s0.position.y, s0.orientation, s0.velocity)
    assert isinstance(s0, StateRecord) and isinstance(s0.position, Point2)
