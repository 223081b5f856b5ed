"""Tabular Q-learning for goal reaching, optionally restricted by a shield.

Rollouts run in concrete state space; the Q-table is keyed by the abstract
state (time step plus the grid cell containing the concrete state), the
same cells the shield uses.  Unvisited pairs count as 0 when bootstrapping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import N_ACTIONS, ACTION_LABELS, DynamicsParams, EgoState, actions as all_actions, step
from .errors import NotWinning, OutsideWinningRegion, ShieldEmpty
from .geometry import shape_contains, shape_contains_batch
from .scenario import GoalRegion, Scenario
from .world import World


@dataclass(frozen=True)
class LearnConfig:
    episodes: int = 5000
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    max_steps: Optional[int] = None   # defaults to the grid horizon
    seed: int = 0
    goal_reward: float = 100.0
    violation_reward: float = -100.0
    step_cost: float = 1.0
    accel_cost: float = 0.1

    def __post_init__(self):
        if int(self.episodes) != self.episodes or self.episodes < 0:
            raise ValueError("episodes must be a non-negative integer")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def epsilon(self, episode: int) -> float:
        if self.episodes <= 1:
            return self.epsilon_start
        frac = episode / (self.episodes - 1)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


# ---------------------------------------------------------------------------
# goal and reward

def goal(s: EgoState, g: GoalRegion) -> bool:
    """Centre inside the goal shape and every given interval satisfied."""
    if g.position is not None and not shape_contains(g.position, s.x, s.y):
        return False
    if not g.time.contains(s.t):
        return False
    if g.orientation is not None and not g.orientation.contains(s.theta):
        return False
    if g.velocity is not None and not g.velocity.contains(s.v):
        return False
    return True


def goal_batch(g: GoalRegion, x, y, theta, v, t) -> np.ndarray:
    x, y, theta, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, theta, v)))
    ok = np.full(x.shape, bool(g.time.start <= t <= g.time.end))
    if g.position is not None:
        ok &= shape_contains_batch(g.position, x, y)
    if g.orientation is not None:
        ok &= (theta >= g.orientation.start) & (theta <= g.orientation.end)
    if g.velocity is not None:
        ok &= (v >= g.velocity.start) & (v <= g.velocity.end)
    return ok


def reward(s: EgoState, act, s_next: EgoState, sc: Scenario, cfg: LearnConfig = LearnConfig(),
           world: Optional[World] = None, reactive_states=()) -> float:
    """Violation beats goal: a colliding transition is never rewarded."""
    world = world or World(sc, DynamicsParams())
    if world.unsafe(s_next, reactive_states):
        return cfg.violation_reward
    if sc.planning_problems and goal(s_next, sc.planning_problems[0].goal):
        return cfg.goal_reward
    return -cfg.step_cost - cfg.accel_cost * abs(act.accel_cmd)


# ---------------------------------------------------------------------------
# Q-table and the learning loop

@dataclass
class QTable:
    values: dict = field(default_factory=dict)   # (state key, action) -> Q
    visits: dict = field(default_factory=dict)
    n_actions: int = N_ACTIONS
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)

    def get(self, key, a: int, default: float = 0.0) -> float:
        return self.values.get((key, a), default)

    def greedy(self, key, allowed) -> int:
        best, best_q = None, -math.inf
        for a in sorted(allowed):
            q = self.values.get((key, a), 0.0)
            if best is None or q > best_q:
                best, best_q = a, q
        return best

    def update(self, key, a: int, target: float, alpha: float) -> float:
        q = self.values.get((key, a), 0.0)
        q += alpha * (target - q)
        self.values[(key, a)] = q
        self.visits[(key, a)] = self.visits.get((key, a), 0) + 1
        return q

    def states(self) -> set:
        return {k for k, _ in self.values}


@dataclass
class Transition:
    obs: object
    reward: float
    done: bool
    violation: bool = False
    reached: bool = False


def q_learning(env, cfg: LearnConfig, shield_fn: Optional[Callable] = None, log=None) -> QTable:
    """ε-greedy Q-learning over ``env``.

    ``env`` provides ``reset(rng)``, ``key(obs)``, ``step(obs, a, rng)`` and
    ``n_actions``; ``shield_fn(obs)`` returns the allowed action indices.
    ``log`` is an optional callable receiving one dict per transition.
    """
    rng = np.random.default_rng(cfg.seed)
    qt = QTable(n_actions=env.n_actions)
    everything = tuple(range(env.n_actions))
    max_steps = cfg.max_steps or env.horizon
    violations = goals = steps = 0

    def allowed_at(obs, first=False):
        if shield_fn is None:
            return everything
        try:
            acts = tuple(shield_fn(obs))
        except OutsideWinningRegion as exc:
            if first:
                raise NotWinning(str(exc)) from None
            raise ShieldEmpty(f"shield has no entry for a reached state: {exc}") from None
        if not acts:
            raise ShieldEmpty("shield returned no action")
        return acts

    for ep in range(cfg.episodes):
        eps = cfg.epsilon(ep)
        obs = env.reset(rng)
        allowed = allowed_at(obs, first=True)
        for t in range(max_steps):
            key = env.key(obs)
            if rng.random() < eps:
                a = allowed[int(rng.integers(len(allowed)))]
            else:
                a = qt.greedy(key, allowed)
            tr = env.step(obs, a, rng)
            steps += 1
            violations += tr.violation
            goals += tr.reached
            terminal = tr.done or t + 1 >= max_steps
            if terminal:
                target = tr.reward
                next_allowed = ()
            else:
                next_allowed = allowed_at(tr.obs)
                nk = env.key(tr.obs)
                target = tr.reward + cfg.gamma * max(qt.get(nk, b) for b in next_allowed)
            qt.update(key, a, target, cfg.alpha)
            if log is not None:
                log({"episode": ep, "step": t, "state": env.describe(obs), "action": a,
                     "reward": tr.reward, "shield_size": len(allowed),
                     "violation": bool(tr.violation), "goal": bool(tr.reached)})
            if terminal:
                break
            obs, allowed = tr.obs, next_allowed
    qt.stats = {"episodes": cfg.episodes, "steps": steps, "violations": violations, "goals": goals}
    return qt


class ChainEnv:
    """Deterministic 1-D chain: actions left/stay/right, goal ``length`` cells right."""

    n_actions = 3

    def __init__(self, length: int = 3, horizon: int = 10, step_reward: float = -1.0,
                 goal_reward: float = 100.0):
        self.length = length
        self.horizon = horizon
        self.step_reward = step_reward
        self.goal_reward = goal_reward

    def reset(self, rng):
        return (0, 0)   # (position, time)

    def key(self, obs):
        return obs

    def describe(self, obs):
        return list(obs)

    def step(self, obs, a, rng):
        pos, t = obs
        pos = max(0, pos + (a - 1))
        if pos == self.length:
            return Transition((pos, t + 1), self.goal_reward, True, reached=True)
        return Transition((pos, t + 1), self.step_reward, False)


class ScenarioEnv:
    """The ego in a scenario; reactive obstacles move uniformly at random."""

    n_actions = N_ACTIONS

    def __init__(self, sc: Scenario, p: DynamicsParams, grid, cfg: LearnConfig = LearnConfig()):
        if not sc.planning_problems:
            raise ValueError("scenario has no planning problem")
        self.world = World(sc, p)
        self.params = p
        self.grid = grid
        self.cfg = cfg
        self.horizon = grid.horizon
        self.goal = sc.planning_problems[0].goal
        self.actions = all_actions(p)
        self.n_choices = 3

    def reset(self, rng):
        return (self.world.initial_ego(), self.world.initial_reactive())

    def key(self, obs):
        s = obs[0]
        cell = self.grid.cell_of(s.x, s.y, s.theta, s.v)
        return None if cell is None else (int(s.t),) + cell

    def describe(self, obs):
        s = obs[0]
        return [s.x, s.y, s.theta, s.v, s.t]

    def step(self, obs, a, rng):
        ego, others = obs
        act = self.actions[a]
        nxt = step(ego, act, self.params)
        if others:
            choice = tuple(int(c) for c in rng.integers(self.n_choices, size=len(others)))
            others = self.world.advance(others, choice)
        cfg = self.cfg
        if self.world.unsafe(nxt, others):
            return Transition((nxt, others), cfg.violation_reward, True, violation=True)
        if goal(nxt, self.goal):
            return Transition((nxt, others), cfg.goal_reward, True, reached=True)
        return Transition((nxt, others), -cfg.step_cost - cfg.accel_cost * abs(act.accel_cmd), False)


def learn(sc: Scenario, cfg: LearnConfig, shield=None, p: DynamicsParams = DynamicsParams(),
          grid=None, log=None) -> QTable:
    """Q-learning on a scenario; with ``shield`` every choice is restricted to its allowed set."""
    from .game import GridSpec, shield_indices

    if shield is not None:
        grid = shield.grid
        p = shield.params or p
    if grid is None:
        grid = GridSpec.for_scenario(sc, p)
    env = ScenarioEnv(sc, p, grid, cfg)
    shield_fn = None
    if shield is not None:
        def shield_fn(obs):
            return shield_indices(shield, obs[0])
    qt = q_learning(env, cfg, shield_fn, log)
    qt.stats["grid"] = grid
    return qt


def jsonl_logger(fh):
    def write(record):
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    return write


# ---------------------------------------------------------------------------
# Q-table to Q-trees

STATE_DIMS = ("x", "y", "theta", "v", "t")


def qtable_to_qtrees(qt: QTable, g):
    """One axis-aligned tree per action over (x, y, theta, v, t).

    Thresholds are interior grid edges (and 1..horizon for t); regions with
    a single value collapse into one leaf; unvisited cells hold -inf.
    """
    from .qtree import Branch, Leaf, QTreeStrategy

    H = g.horizon
    shape = g.shape + (H + 1,)
    edges = [e for e in g.edges] + [np.arange(H + 2, dtype=float)]
    tables = np.full((qt.n_actions,) + shape, -np.inf)
    for (key, a), q in qt.values.items():
        if key is None:   # off-grid states have no cell
            continue
        t, ix, iy, ith, iv = key
        tables[(a, ix, iy, ith, iv, t)] = q

    def build(vals, lo, hi):
        block = vals[tuple(slice(l, h) for l, h in zip(lo, hi))]
        first = block.flat[0]
        if (block == first).all():
            return Leaf(float(first))
        d = max(range(5), key=lambda k: (hi[k] - lo[k], -k))
        mid = (lo[d] + hi[d]) // 2
        left_hi = list(hi)
        left_hi[d] = mid
        right_lo = list(lo)
        right_lo[d] = mid
        return Branch(d, float(edges[d][mid]), build(vals, lo, left_hi), build(vals, right_lo, hi))

    trees = tuple(build(tables[a], [0] * 5, list(shape)) for a in range(qt.n_actions))
    labels = ACTION_LABELS if qt.n_actions == N_ACTIONS else tuple(str(i) for i in range(qt.n_actions))
    return QTreeStrategy(STATE_DIMS, labels, trees)
