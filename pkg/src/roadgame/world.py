"""Closed-loop world: ego, road and obstacles stepped together.

Obstacles with a fixed behaviour (static or trajectory) are looked up by
time step.  Reactive obstacles carry concrete state; at each period the
environment picks one move per reactive obstacle, a *choice vector*.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .dynamics import DynamicsParams, EgoState, REACTIVE_MOVES, ego_from_record, obstacle_moves, obstacle_state_at
from .geometry import Capsule, OrientedBox, Road, circle_cover, min_circle_distance, sample_points, shape_cover
from .scenario import Point2, Reactive, Scenario

QUANTUM = 1e-6


def quantize(value: float, quantum: float = QUANTUM) -> int:
    return int(round(value / quantum))


def record_key(st, quantum: float = QUANTUM):
    return (quantize(st.position.x, quantum), quantize(st.position.y, quantum),
            quantize(st.orientation, quantum), quantize(st.velocity, quantum))


class World:
    def __init__(self, sc: Scenario, p: DynamicsParams):
        self.scenario = sc
        self.params = p
        self.road = Road.from_lanelets(sc.lanelets)
        self.fixed = [o for o in sc.obstacles if not isinstance(o.behaviour, Reactive)]
        self.reactive = [o for o in sc.obstacles if isinstance(o.behaviour, Reactive)]
        self.problem = sc.planning_problems[0] if sc.planning_problems else None
        self._n = p.circle_count

    # -- ego ----------------------------------------------------------------

    def initial_ego(self) -> EgoState:
        if self.problem is None:
            raise ValueError("scenario has no planning problem")
        return ego_from_record(self.problem.initial_state)

    def initial_reactive(self) -> tuple:
        return tuple(o.initial_state for o in self.reactive)

    def ego_box(self, s: EgoState) -> OrientedBox:
        return OrientedBox(Point2(s.x, s.y), self.params.length, self.params.width, s.theta)

    # -- obstacles ----------------------------------------------------------

    @lru_cache(maxsize=None)
    def fixed_covers(self, t: int) -> tuple:
        return tuple(shape_cover(o.shape, st.position.x, st.position.y, st.orientation, self._n)
                     for o in self.fixed for st in (obstacle_state_at(o, t),))

    def reactive_covers(self, states) -> tuple:
        return tuple(shape_cover(o.shape, st.position.x, st.position.y, st.orientation, self._n)
                     for o, st in zip(self.reactive, states))

    def choices(self) -> list:
        """All choice vectors, in lexicographic order of move indices."""
        return list(itertools.product(range(len(REACTIVE_MOVES)), repeat=len(self.reactive)))

    def advance(self, states, choice) -> tuple:
        return tuple(obstacle_moves(o, st, self.params)[c]
                     for o, st, c in zip(self.reactive, states, choice))

    def reactive_reachable(self, horizon: int) -> list:
        """Per obstacle, per step 0..horizon: deduplicated reachable states."""
        out = []
        for o in self.reactive:
            layers = [[o.initial_state]]
            for _ in range(horizon):
                seen = {}
                for st in layers[-1]:
                    for nxt in obstacle_moves(o, st, self.params):
                        seen.setdefault(record_key(nxt), nxt)
                layers.append([seen[k] for k in sorted(seen)])
            out.append(layers)
        return out

    def hazards(self, horizon: int) -> list:
        """Per step, capsules covering every obstacle circle the environment can produce."""
        reach = self.reactive_reachable(horizon) if self.reactive else []
        out = []
        for t in range(horizon + 1):
            caps = [Capsule(tuple(c), tuple(c), cov.radius) for cov in self.fixed_covers(t) for c in cov.centers]
            for o, layers in zip(self.reactive, reach):
                covers = [shape_cover(o.shape, st.position.x, st.position.y, st.orientation, self._n)
                          for st in layers[t]]
                # straight-heading moves keep every circle on one line; sweep the extremes
                for k in range(covers[0].count):
                    pts = np.array([cov.centers[k] for cov in covers])
                    d = pts - pts[0]
                    u = np.array([math.cos(o.initial_state.orientation), math.sin(o.initial_state.orientation)])
                    proj = d @ u
                    lateral = float(np.abs(d @ np.array([-u[1], u[0]])).max())
                    a = pts[0] + proj.min() * u
                    b = pts[0] + proj.max() * u
                    caps.append(Capsule(tuple(a), tuple(b), covers[0].radius + lateral))
            out.append(caps)
        return out

    # -- predicates ---------------------------------------------------------

    def collides(self, s: EgoState, reactive_states=()) -> bool:
        mine = circle_cover(self.ego_box(s), self._n)
        margin = self.params.margin
        for cov in self.fixed_covers(int(s.t)):
            if min_circle_distance(mine, cov) < margin:
                return True
        for cov in self.reactive_covers(reactive_states):
            if min_circle_distance(mine, cov) < margin:
                return True
        return False

    def offroad(self, s: EgoState) -> bool:
        contains = self.road.contains
        return not all(contains(p.x, p.y) for p in sample_points(self.ego_box(s)))

    def unsafe(self, s: EgoState, reactive_states=()) -> bool:
        return self.offroad(s) or self.collides(s, reactive_states)
