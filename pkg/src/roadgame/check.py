"""Closed-loop verification, simulation and trajectory injection.

Checks run on concrete states.  The ego move is fixed by the controller,
so the only branching comes from reactive obstacles, each picking one of a
finite set of moves per period.  States are deduplicated on a quantized
key (x, y, theta, v, t plus the reactive obstacle states).
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import ACTION_LABELS, DynamicsParams, EgoState, actions as all_actions, ego_to_record, step
from .errors import ControllerUndefined, OutsideWinningRegion, UnassignedRegion
from .game import GridSpec, PermissiveStrategy, shield_indices
from .learning import goal
from .qtree import DecisionTree, QTreeStrategy, decide, q_values
from .scenario import Obstacle, ObstacleType, Rectangle, Scenario, Trajectory
from .world import QUANTUM, World, quantize, record_key


# ---------------------------------------------------------------------------
# controllers

class Controller:
    def __call__(self, s: EgoState) -> int:
        raise NotImplementedError


class Permissive(Controller):
    """Lowest allowed action of a permissive strategy."""

    def __init__(self, ps: PermissiveStrategy):
        self.ps = ps

    def __call__(self, s):
        try:
            return shield_indices(self.ps, s)[0]
        except OutsideWinningRegion as exc:
            raise ControllerUndefined(s, str(exc)) from None


def _label_to_index(labels) -> list:
    out = []
    for lab in labels:
        if lab in ACTION_LABELS:
            out.append(ACTION_LABELS.index(lab))
        else:
            try:
                out.append(int(lab))
            except ValueError:
                raise ValueError(f"unknown action label {lab!r}") from None
    return out


class Greedy(Controller):
    """Argmax over Q-trees; with a shield the argmax runs over allowed actions only.

    Without a shield a state where every Q is -inf is outside the domain.
    With a shield the lowest allowed action is used there instead.
    """

    def __init__(self, qs: QTreeStrategy, shield: Optional[PermissiveStrategy] = None):
        self.qs = qs
        self.shield = shield
        self.index = _label_to_index(qs.actions)

    def __call__(self, s):
        qv = q_values(self.qs, s.vector())
        candidates = range(len(qv))
        if self.shield is not None:
            try:
                allowed = set(shield_indices(self.shield, s))
            except OutsideWinningRegion as exc:
                raise ControllerUndefined(s, str(exc)) from None
            candidates = [i for i in candidates if self.index[i] in allowed]
            if not candidates:
                return min(allowed)
        best = None
        for i in candidates:
            if best is None or qv[i] > qv[best]:
                best = i
        if qv[best] == -math.inf:
            if self.shield is not None:
                return min(self.index[i] for i in candidates)
            raise ControllerUndefined(s, "no learned Q-value")
        return self.index[best]


class Tree(Controller):
    def __init__(self, dt: DecisionTree):
        self.dt = dt
        self.index = _label_to_index(dt.actions)

    def __call__(self, s):
        try:
            return self.index[decide(self.dt, s.vector())]
        except UnassignedRegion as exc:
            raise ControllerUndefined(s, str(exc)) from None


class Fixed(Controller):
    """Always the same action; handy for constructed checks."""

    def __init__(self, index: int):
        self.index = index

    def __call__(self, s):
        return self.index


# ---------------------------------------------------------------------------
# verdicts

@dataclass
class Verdict:
    holds: bool
    counterexample: Optional[list] = None   # [(EgoState, action or None, choice vector or None)]
    states_explored: int = 0
    witness: Optional[list] = None

    def trace_records(self) -> list:
        trace = self.counterexample if self.counterexample is not None else (self.witness or [])
        return [{"t": s.t, "x": s.x, "y": s.y, "theta": s.theta, "v": s.v, "a": s.a,
                 "action": a, "choice": list(c) if c is not None else None} for s, a, c in trace]


def write_trace_jsonl(trace_records, fh) -> None:
    for rec in trace_records:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _key(s: EgoState, others, quantum=QUANTUM):
    return (int(s.t), quantize(s.x, quantum), quantize(s.y, quantum), quantize(s.theta, quantum),
            quantize(s.v, quantum)) + tuple(record_key(o, quantum) for o in others)


def _trace(parents, node):
    out = []
    while node is not None:
        s, a, c, prev = parents[node]
        out.append((s, a, c))
        node = prev
    out.reverse()
    # shift: each entry holds the action/choice taken *from* that state
    states = [s for s, _, _ in out]
    moves = [(a, c) for _, a, c in out[1:]] + [(None, None)]
    return [(s, a, c) for s, (a, c) in zip(states, moves)]


def _explore(world: World, c: Controller, p: DynamicsParams, horizon: int, quantum: float, stop):
    """Breadth-first closed-loop exploration.

    ``stop(s, others)`` returns "fail", "done" (do not expand) or None.
    Returns (failing node id or None, parent table, number of states seen).
    """
    acts = all_actions(p)
    choices = world.choices()
    s0 = world.initial_ego()
    o0 = world.initial_reactive()
    parents = {0: (s0, None, None, None)}
    seen = {_key(s0, o0, quantum)}
    queue = deque([(0, s0, o0)])
    counter = 1
    while queue:
        nid, s, others = queue.popleft()
        verdict = stop(s, others)
        if verdict == "fail":
            return nid, parents, len(seen)
        if verdict == "done":
            continue
        a = c(s)
        nxt = step(s, acts[a], p)
        for ch in choices:
            o2 = world.advance(others, ch) if others else others
            k = _key(nxt, o2, quantum)
            if k in seen:
                continue
            seen.add(k)
            parents[counter] = (nxt, a, ch, nid)
            queue.append((counter, nxt, o2))
            counter += 1
    return None, parents, len(seen)


def check_safety_under(sc: Scenario, c: Controller, p: DynamicsParams, horizon: int,
                       quantum: float = QUANTUM) -> Verdict:
    """Holds iff no reachable closed-loop state within the horizon collides or leaves the road."""
    world = World(sc, p)

    def stop(s, others):
        if world.unsafe(s, others):
            return "fail"
        return "done" if s.t >= horizon else None

    bad, parents, n = _explore(world, c, p, horizon, quantum, stop)
    if bad is None:
        return Verdict(True, None, n)
    return Verdict(False, _trace(parents, bad), n)


def check_goal_under(sc: Scenario, c: Controller, p: DynamicsParams, horizon: int,
                     quantum: float = QUANTUM) -> Verdict:
    """Holds iff every closed-loop path reaches the goal within the horizon (collisions ignored)."""
    world = World(sc, p)
    g = sc.planning_problem.goal

    def stop(s, others):
        if goal(s, g):
            return "done"
        return "fail" if s.t >= horizon else None

    bad, parents, n = _explore(world, c, p, horizon, quantum, stop)
    if bad is None:
        return Verdict(True, None, n)
    return Verdict(False, _trace(parents, bad), n)


def check_exists_safe(sc: Scenario, p: DynamicsParams, g: GridSpec, memo: str = "abstract",
                      quantum: float = QUANTUM) -> Verdict:
    """Holds iff some ego action sequence, with cooperative obstacle choices, stays safe
    for ``g.horizon`` steps.

    Depth-first search.  Failed states are memoized on the grid cell (``memo="abstract"``,
    fast, may miss a witness that needs two different states of one cell) or on the
    quantized concrete state (``memo="concrete"``, exact).  A positive verdict always
    carries a concrete witness trace.
    """
    if memo not in ("abstract", "concrete"):
        raise ValueError("memo must be 'abstract' or 'concrete'")
    world = World(sc, p)
    acts = all_actions(p)
    choices = world.choices()
    horizon = g.horizon
    failed = set()

    def mkey(s, others):
        if memo == "concrete":
            return _key(s, others, quantum)
        cell = g.cell_of(s.x, s.y, s.theta, s.v)
        return (int(s.t), cell) + tuple(record_key(o, quantum) for o in others)

    s0 = world.initial_ego()
    o0 = world.initial_reactive()
    if world.unsafe(s0, o0):
        return Verdict(False, [(s0, None, None)], 1)
    if horizon == 0:
        return Verdict(True, None, 1, witness=[(s0, None, None)])

    def successors(s, others):
        for a in range(len(acts)):
            nxt = step(s, acts[a], p)
            for ch in choices:
                yield a, ch, nxt, (world.advance(others, ch) if others else others)

    explored = 1
    deepest = [(s0, None, None)]
    stack = [(s0, o0, successors(s0, o0))]
    trail = [[s0, None, None]]   # entry i: state, action and choice taken from it
    while stack:
        s, others, it = stack[-1]
        pushed = False
        for a, ch, nxt, o2 in it:
            k = mkey(nxt, o2)
            if k in failed:
                continue
            explored += 1
            if world.unsafe(nxt, o2):
                failed.add(k)
                cand = [tuple(e) for e in trail[:-1]] + [(s, a, ch), (nxt, None, None)]
                if len(cand) > len(deepest):
                    deepest = cand
                continue
            trail[-1][1], trail[-1][2] = a, ch
            trail.append([nxt, None, None])
            if nxt.t >= horizon:
                return Verdict(True, None, explored, witness=[tuple(e) for e in trail])
            stack.append((nxt, o2, successors(nxt, o2)))
            pushed = True
            break
        if not pushed:
            stack.pop()
            trail.pop()
            failed.add(mkey(s, others))
            if trail:
                trail[-1][1] = trail[-1][2] = None
    return Verdict(False, deepest, explored)


def replay(sc: Scenario, p: DynamicsParams, trace) -> list:
    """Re-step a trace and return, per entry, whether the state is unsafe."""
    world = World(sc, p)
    acts = all_actions(p)
    s, others = trace[0][0], world.initial_reactive()
    out = []
    for i, (recorded, a, ch) in enumerate(trace):
        if i > 0 and not _same(s, recorded):
            raise AssertionError(f"replay diverged at entry {i}")
        out.append(world.unsafe(s, others))
        if a is not None:
            s = step(s, acts[a], p)
            others = world.advance(others, ch) if others else others
    return out


def _same(a: EgoState, b: EgoState) -> bool:
    return a.t == b.t and all(abs(x - y) <= 1e-9 for x, y in
                              ((a.x, b.x), (a.y, b.y), (a.theta, b.theta), (a.v, b.v)))


# ---------------------------------------------------------------------------
# simulation and injection

def simulate(sc: Scenario, c: Controller, p: DynamicsParams, seed: int, horizon: int) -> Trajectory:
    """One closed-loop rollout; obstacle choices uniform from a seeded generator."""
    world = World(sc, p)
    acts = all_actions(p)
    rng = np.random.default_rng(seed)
    s, others = world.initial_ego(), world.initial_reactive()
    records = [ego_to_record(s)]
    for _ in range(horizon):
        a = c(s)
        s = step(s, acts[a], p)
        if others:
            ch = tuple(int(x) for x in rng.integers(3, size=len(others)))
            others = world.advance(others, ch)
        records.append(ego_to_record(s))
    return Trajectory(tuple(records))


def inject_trajectory(sc: Scenario, tr: Trajectory, shape=None,
                      obstacle_type: ObstacleType = ObstacleType.CAR) -> Scenario:
    """Add ``tr`` as a new dynamic obstacle with id one above every id in use."""
    if not tr.states:
        raise ValueError("empty trajectory")
    if shape is None:
        p = DynamicsParams()
        shape = Rectangle(p.length, p.width)
    new_id = max(sc.all_ids(), default=0) + 1
    ob = Obstacle(new_id, obstacle_type, shape, "dynamic", tr.states[0], tr)
    return sc.with_obstacle(ob)


TRAJECTORY_FORMAT = "roadgame.trajectory/1"


def trajectory_to_json(tr: Trajectory) -> str:
    states = [{"time_step": st.time_step, "x": st.position.x, "y": st.position.y,
               "orientation": st.orientation, "velocity": st.velocity, "acceleration": st.acceleration}
              for st in tr.states]
    return json.dumps({"format": TRAJECTORY_FORMAT, "states": states}, indent=1, sort_keys=True) + "\n"


def trajectory_from_json(text: str) -> Trajectory:
    from .errors import SchemaError
    from .scenario import Point2, StateRecord

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("/", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != TRAJECTORY_FORMAT:
        raise SchemaError("/format", f"expected {TRAJECTORY_FORMAT!r}")
    try:
        return Trajectory(tuple(StateRecord(int(d["time_step"]), Point2(float(d["x"]), float(d["y"])),
                                            float(d["orientation"]), float(d["velocity"]),
                                            float(d.get("acceleration", 0.0)))
                                for d in doc["states"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError("/states", f"bad state record: {exc}") from None
