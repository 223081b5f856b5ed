"""Bundled example scenarios.

Each builder returns a Scenario; ``write_all`` regenerates the XML files
shipped in ``roadgame/fixtures``.  Run ``python -m roadgame.fixtures DIR``.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

from .scenario import (Circle, GoalRegion, Interval, Lanelet, Obstacle, ObstacleType, PlanningProblem,
                       Point2, Reactive, Rectangle, Scenario, StateRecord, Trajectory, load_scenario,
                       serialize_scenario)

FIXTURE_DIR = Path(__file__).parent / "fixtures"
W = 5.0   # lane width in metres


def _pts(*xy):
    return tuple(Point2(float(x), float(y)) for x, y in xy)


def straight_lanelet(lid, x0, x1, y_right, y_left, n=2, preds=(), succs=()):
    xs = [x0 + (x1 - x0) * i / (n - 1) for i in range(n)]
    return Lanelet(lid, _pts(*[(x, y_left) for x in xs]), _pts(*[(x, y_right) for x in xs]),
                   tuple(preds), tuple(succs))


def _ego(x, y, theta, v):
    return StateRecord(0, Point2(x, y), theta, v, 0.0)


def _car(oid, x, y, theta=0.0, v=0.0, role="static", behaviour=None, length=4.0, width=2.0):
    init = behaviour.states[0] if isinstance(behaviour, Trajectory) else StateRecord(0, Point2(x, y), theta, v, 0.0)
    return Obstacle(oid, ObstacleType.CAR, Rectangle(length, width), role, init, behaviour)


def _linear_trajectory(x0, y0, theta, v, steps, dt=1.0):
    """Constant-velocity trajectory over steps 0..steps; step 0 is the initial state."""
    c, s = math.cos(theta), math.sin(theta)
    return Trajectory(tuple(StateRecord(k, Point2(round(x0 + c * v * k * dt, 6), round(y0 + s * v * k * dt, 6)),
                                        theta, v, 0.0) for k in range(steps + 1)))


def _goal(x, y, length, width, t_end=10, theta=0.0):
    return GoalRegion(Rectangle(length, width, Point2(x, y), theta), Interval(0, t_end))


def straight_one_lanelet() -> Scenario:
    """One lanelet, one parked car, one planning problem."""
    return Scenario(
        "ROAD_straight-1_1_T-1", 1.0,
        lanelets=(straight_lanelet(100, 0, 60, 0, W),),
        obstacles=(_car(1, 45, W / 2),),
        planning_problems=(PlanningProblem(200, _ego(5, W / 2, 0, 4), _goal(30, W / 2, 10, W)),),
    )


def dynamic_trajectory() -> Scenario:
    """A car driving ahead of the ego with a ten-state trajectory (steps 0..9)."""
    return Scenario(
        "ROAD_dynamic-1_1_T-1", 1.0,
        lanelets=(straight_lanelet(100, 0, 120, 0, W),),
        obstacles=(_car(1, 20, W / 2, 0, 6, "dynamic", _linear_trajectory(20, W / 2, 0, 6, 9)),),
        planning_problems=(PlanningProblem(200, _ego(5, W / 2, 0, 4), _goal(40, W / 2, 10, W)),),
    )


def three_lanelets() -> Scenario:
    """Three chained lanelets; the middle one has four boundary points."""
    return Scenario(
        "ROAD_chain-1_1_T-1", 1.0,
        lanelets=(straight_lanelet(100, 0, 20, 0, W, succs=(101,)),
                  straight_lanelet(101, 20, 50, 0, W, n=4, preds=(100,), succs=(102,)),
                  straight_lanelet(102, 50, 70, 0, W, preds=(101,))),
        obstacles=(Obstacle(1, ObstacleType.PEDESTRIAN, Circle(0.5), "static",
                            StateRecord(0, Point2(60, 4.2), 0.0)),),
        planning_problems=(PlanningProblem(200, _ego(5, W / 2, 0, 4), _goal(45, W / 2, 10, W)),),
    )


def corridor() -> Scenario:
    """Two-lane road: a parked car blocks the ego lane, a car drives ahead in the other lane."""
    return Scenario(
        "ROAD_corridor-1_1_T-1", 1.0,
        lanelets=(straight_lanelet(100, 0, 80, 0, W),
                  straight_lanelet(101, 0, 80, W, 2 * W)),
        obstacles=(_car(1, 40, W / 2),
                   _car(2, 25, 1.5 * W, 0, 4, "dynamic", _linear_trajectory(25, 1.5 * W, 0, 4, 10))),
        planning_problems=(PlanningProblem(200, _ego(5, W / 2, 0, 5), _goal(30, 1.5 * W, 10, W)),),
    )


def _arc(cx, cy, r, a0, a1, n):
    return [(round(cx + r * math.cos(a0 + (a1 - a0) * i / (n - 1)), 6),
             round(cy + r * math.sin(a0 + (a1 - a0) * i / (n - 1)), 6)) for i in range(n)]


def left_turn() -> Scenario:
    """Two-lane approach, a quarter-circle left turn and a two-lane exit heading north.

    Each stretch is split into a right and a left lanelet sharing one bound.
    """
    r_in, r_mid, r_out = 8.0, 8.0 + W, 8.0 + 2 * W
    cx, cy = 20.0, 2 * W + r_in
    arcs = [_arc(cx, cy, r, -math.pi / 2, 0.0, 9) for r in (r_in, r_mid, r_out)]
    lanelets = (
        straight_lanelet(100, 0, cx, 0, W, succs=(102,)),
        straight_lanelet(101, 0, cx, W, 2 * W, succs=(103,)),
        Lanelet(102, _pts(*arcs[1]), _pts(*arcs[2]), (100,), (104,)),
        Lanelet(103, _pts(*arcs[0]), _pts(*arcs[1]), (101,), (105,)),
        Lanelet(104, _pts((cx + r_mid, cy), (cx + r_mid, cy + 12)),
                _pts((cx + r_out, cy), (cx + r_out, cy + 12)), (102,), ()),
        Lanelet(105, _pts((cx + r_in, cy), (cx + r_in, cy + 12)),
                _pts((cx + r_mid, cy), (cx + r_mid, cy + 12)), (103,), ()),
    )
    return Scenario(
        "ROAD_leftturn-1_1_T-1", 1.0,
        lanelets=lanelets,
        obstacles=(_car(1, cx + r_out - W / 2, cy + 8, math.pi / 2, 0.0),),
        planning_problems=(PlanningProblem(200, _ego(8, 1.5 * W, 0, 4),
                                           _goal(cx + r_mid, cy + 6, 12, 2 * W, t_end=10,
                                                 theta=math.pi / 2)),),
    )


def blocked() -> Scenario:
    """A wall of parked cars too close to stop for: no safe path exists."""
    return Scenario(
        "ROAD_blocked-1_1_T-1", 1.0,
        lanelets=(straight_lanelet(100, 0, 60, 0, W),),
        obstacles=(_car(1, 20, W / 2, math.pi / 2, length=4.0, width=2.0),),
        planning_problems=(PlanningProblem(200, _ego(5, W / 2, 0, 14), _goal(50, W / 2, 10, W)),),
    )


def reactive() -> Scenario:
    """Corridor with a reactive car in the left lane choosing its acceleration each period."""
    return Scenario(
        "ROAD_reactive-1_1_T-1", 1.0,
        lanelets=(straight_lanelet(100, 0, 80, 0, W),
                  straight_lanelet(101, 0, 80, W, 2 * W)),
        obstacles=(_car(1, 40, W / 2),
                   _car(2, 25, 1.5 * W, 0, 4, "dynamic", Reactive())),
        planning_problems=(PlanningProblem(200, _ego(5, W / 2, 0, 5), _goal(30, 1.5 * W, 10, W)),),
    )


def trend(horizon: int) -> Scenario:
    """Corridor stretched with the horizon: road length, obstacle offsets and goal
    distance all grow with ``horizon`` (used for the scalability experiment)."""
    H = int(horizon)
    length = 8.0 * H + 20
    return Scenario(
        f"ROAD_trend-1_{H}_T-1", 1.0,
        lanelets=(straight_lanelet(100, 0, length, 0, W),
                  straight_lanelet(101, 0, length, W, 2 * W)),
        obstacles=(_car(1, 4.0 * H + 20, W / 2),
                   _car(2, 2.5 * H + 10, 1.5 * W, 0, 4, "dynamic",
                        _linear_trajectory(2.5 * H + 10, 1.5 * W, 0, 4, H))),
        planning_problems=(PlanningProblem(200, _ego(5, W / 2, 0, 5),
                                           _goal(5.0 * H + 10, 1.5 * W, 2 * H, W, t_end=H)),),
    )


def trend_grid_overrides(horizon: int) -> dict:
    """Cell counts for :func:`trend`; x cells grow with the road (2 m each)."""
    return {"nx": 4 * int(horizon) + 10, "ny": 40, "ntheta": 51, "nv": 16, "horizon": int(horizon)}


BUILDERS = {
    "straight_one_lanelet": straight_one_lanelet,
    "dynamic_trajectory": dynamic_trajectory,
    "three_lanelets": three_lanelets,
    "corridor": corridor,
    "left_turn": left_turn,
    "blocked": blocked,
    "reactive": reactive,
}


def fixture_path(name: str) -> Path:
    return FIXTURE_DIR / f"{name}.xml"


def load_fixture(name: str) -> Scenario:
    return load_scenario(fixture_path(name))


def write_all(directory=FIXTURE_DIR) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, build in BUILDERS.items():
        path = directory / f"{name}.xml"
        path.write_text(serialize_scenario(build()), encoding="utf-8")
        out.append(path)
    return out


if __name__ == "__main__":
    for p in write_all(sys.argv[1] if len(sys.argv) > 1 else FIXTURE_DIR):
        print(p)
