"""Periodic ego dynamics and obstacle behaviour.

The ego is a kinematic unicycle.  Once per period it picks one of nine
actions (longitudinal acceleration times yaw rate); the action is held for
the whole period and the ODE

    x' = v cos(theta),  y' = v sin(theta),  theta' = yaw,  v' = accel

is integrated with ``substeps`` forward-Euler steps.  Speed is clamped to
``[0, v_max]`` after every sub-step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoBehaviour, UnsupportedFeature
from .scenario import Obstacle, Point2, Reactive, StateRecord, Trajectory

TWO_PI = 2.0 * math.pi

_ACCEL_NAMES = ("brake", "keep", "accel")
_YAW_NAMES = ("right", "straight", "left")


@dataclass(frozen=True)
class DynamicsParams:
    accel: float = 2.0       # A, m/s^2
    yaw_rate: float = 0.4    # Omega, rad/s
    v_max: float = 15.0
    period: float = 1.0
    substeps: int = 10
    # ego footprint and the collision margin used by the drivability checks
    length: float = 4.0
    width: float = 2.0
    margin: float = 0.5
    circles: int = 0         # 0 selects the default count ceil(length / width)

    def __post_init__(self):
        for name in ("accel", "yaw_rate", "v_max", "period", "length", "width"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")
        if not (math.isfinite(self.margin) and self.margin >= 0):
            raise ValueError("margin must be non-negative")
        if self.circles < 0:
            raise ValueError("circles must be >= 0")

    @property
    def circle_count(self) -> int:
        return self.circles or max(1, math.ceil(self.length / self.width))


@dataclass(frozen=True)
class EgoAction:
    index: int
    accel_cmd: float
    yaw_cmd: float

    @property
    def label(self) -> str:
        return f"{_ACCEL_NAMES[self.index // 3]}_{_YAW_NAMES[self.index % 3]}"


@dataclass(frozen=True)
class EgoState:
    x: float
    y: float
    theta: float
    v: float
    a: float = 0.0
    t: int = 0

    def vector(self):
        return (self.x, self.y, self.theta, self.v, float(self.t))


N_ACTIONS = 9


def actions(p: DynamicsParams) -> list:
    """The nine ego actions; index = 3 * accel_slot + yaw_slot."""
    out = []
    for ai, acc in enumerate((-p.accel, 0.0, p.accel)):
        for yi, yaw in enumerate((-p.yaw_rate, 0.0, p.yaw_rate)):
            out.append(EgoAction(3 * ai + yi, acc, yaw))
    return out


def action(index: int, p: DynamicsParams) -> EgoAction:
    if not 0 <= index < N_ACTIONS:
        raise ValueError(f"action index {index} out of range")
    return actions(p)[index]


ACTION_LABELS = tuple(EgoAction(i, 0.0, 0.0).label for i in range(N_ACTIONS))


def _wrap(th):
    # one period never turns by more than 2*pi per sub-step, so a single shift suffices
    if th > math.pi:
        return th - TWO_PI
    if th <= -math.pi:
        return th + TWO_PI
    return th


def integrate(x, y, th, v, accel, yaw, p: DynamicsParams):
    """Scalar forward-Euler integration over one period."""
    dt = p.period / p.substeps
    vmax = p.v_max
    for _ in range(p.substeps):
        x += v * math.cos(th) * dt
        y += v * math.sin(th) * dt
        th = _wrap(th + yaw * dt)
        v += accel * dt
        v = 0.0 if v < 0.0 else vmax if v > vmax else v
    return x, y, th, v


def step(s: EgoState, act: EgoAction, p: DynamicsParams) -> EgoState:
    x, y, th, v = integrate(s.x, s.y, s.theta, s.v, act.accel_cmd, act.yaw_cmd, p)
    return EgoState(x, y, th, v, act.accel_cmd, s.t + 1)


def integrate_batch(x, y, th, v, accel, yaw, p: DynamicsParams):
    """Vectorized :func:`integrate`; arguments broadcast against each other."""
    x, y, th, v, accel, yaw = (np.array(a, dtype=float)
                               for a in np.broadcast_arrays(x, y, th, v, accel, yaw))
    dt = p.period / p.substeps
    for _ in range(p.substeps):
        x += v * np.cos(th) * dt
        y += v * np.sin(th) * dt
        th = th + yaw * dt
        th = np.where(th > math.pi, th - TWO_PI, np.where(th <= -math.pi, th + TWO_PI, th))
        v = np.clip(v + accel * dt, 0.0, p.v_max)
    return x, y, th, v


def ego_from_record(st: StateRecord) -> EgoState:
    return EgoState(st.position.x, st.position.y, st.orientation, st.velocity, st.acceleration, st.time_step)


def ego_to_record(s: EgoState) -> StateRecord:
    return StateRecord(int(s.t), Point2(float(s.x), float(s.y)), float(s.theta), float(s.v), float(s.a))


# ---------------------------------------------------------------------------
# obstacles

def obstacle_state_at(o: Obstacle, t: int) -> StateRecord:
    """Fixed-behaviour obstacle state at step ``t``; trajectories hold their last record."""
    if o.is_static:
        return o.initial_state
    if isinstance(o.behaviour, Reactive):
        raise NoBehaviour(f"obstacle {o.id} is reactive; use obstacle_moves")
    if not isinstance(o.behaviour, Trajectory):
        raise NoBehaviour(f"obstacle {o.id} has no behaviour")
    current = o.behaviour.states[0]
    for st in o.behaviour.states:
        if st.time_step > t:
            break
        current = st
    return current


REACTIVE_MOVES = ("maintain", "brake", "accelerate")


def obstacle_moves(o: Obstacle, s: StateRecord, p: DynamicsParams) -> list:
    """Successor states of a reactive obstacle, in the order of ``REACTIVE_MOVES``."""
    if not isinstance(o.behaviour, Reactive):
        raise NoBehaviour(f"obstacle {o.id} is not reactive")
    if o.behaviour.action_set != "default":
        raise UnsupportedFeature(f"reactive action set {o.behaviour.action_set!r}")
    out = []
    for acc in (0.0, -p.accel, p.accel):
        x, y, th, v = integrate(s.position.x, s.position.y, s.orientation, s.velocity, acc, 0.0, p)
        out.append(StateRecord(s.time_step + 1, Point2(x, y), th, v, acc))
    return out
