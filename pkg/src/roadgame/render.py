"""SVG frames of a scenario, one per time step, plus a JSON manifest.

World coordinates are drawn inside a group that flips the y axis, so every
element carries plain world coordinates.  Frames can be joined into a GIF
with an external tool, e.g. ``convert -delay 100 frame_*.svg out.gif``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional
from xml.sax.saxutils import quoteattr

from .dynamics import DynamicsParams, obstacle_state_at
from .errors import NoBehaviour
from .geometry import lanelet_polygon, shape_outline
from .scenario import Circle, Point2, Polygon, Reactive, Rectangle, Scenario, Trajectory

FRAMES_FORMAT = "roadgame.frames/1"
CANVAS = 800.0     # width of the drawing in pixels
PAD = 10.0


def _f(v: float) -> str:
    v = round(float(v), 6)
    if v == 0:
        v = 0.0
    return f"{v:.6f}".rstrip("0").rstrip(".")


def _points(pts) -> str:
    return " ".join(f"{_f(p.x)},{_f(p.y)}" for p in pts)


def _extent(sc: Scenario, trajectory: Optional[Trajectory]):
    xs, ys = [], []
    for ll in sc.lanelets:
        for q in ll.left_bound + ll.right_bound:
            xs.append(q.x)
            ys.append(q.y)
    for o in sc.obstacles:
        states = o.behaviour.states if isinstance(o.behaviour, Trajectory) else (o.initial_state,)
        for st in states:
            xs.append(st.position.x)
            ys.append(st.position.y)
    for pp in sc.planning_problems:
        xs.append(pp.initial_state.position.x)
        ys.append(pp.initial_state.position.y)
    for st in trajectory.states if trajectory else ():
        xs.append(st.position.x)
        ys.append(st.position.y)
    if not xs:
        return 0.0, 0.0, 100.0, 100.0
    m = 5.0
    x0, x1, y0, y1 = min(xs) - m, max(xs) + m, min(ys) - m, max(ys) + m
    return x0, y0, max(x1 - x0, 1.0), max(y1 - y0, 1.0)


def _placed(shape, x: float, y: float, theta: float):
    """Outline points of ``shape`` at pose (x, y, theta)."""
    c, s = math.cos(theta), math.sin(theta)
    return [Point2(x + q.x * c - q.y * s, y + q.x * s + q.y * c) for q in shape_outline(shape)]


def _shape_element(shape, x, y, theta, cls: str, oid=None) -> str:
    attr = f' class="{cls}"' + (f' data-id="{oid}"' if oid is not None else "")
    if isinstance(shape, Circle):
        c, s = math.cos(theta), math.sin(theta)
        cx = x + shape.center.x * c - shape.center.y * s
        cy = y + shape.center.x * s + shape.center.y * c
        return f'<circle{attr} cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(shape.radius)}"/>'
    if isinstance(shape, Rectangle):
        return _rect(cls, oid, shape.length, shape.width, x, y, theta, shape.center, shape.orientation)
    if isinstance(shape, Polygon):
        return f'<polygon{attr} points="{_points(_placed(shape, x, y, theta))}"/>'
    raise TypeError(f"unsupported shape {shape!r}")


def _rect(cls, oid, length, width, x, y, theta, offset=Point2(0.0, 0.0), rot=0.0) -> str:
    """Axis-aligned rect around the pose, rotated about the pose by ``theta``."""
    attr = f' class="{cls}"' + (f' data-id="{oid}"' if oid is not None else "")
    c, s = math.cos(theta), math.sin(theta)
    cx = x + offset.x * c - offset.y * s
    cy = y + offset.x * s + offset.y * c
    deg = math.degrees(theta + rot)
    return (f'<rect{attr} x="{_f(cx - length / 2)}" y="{_f(cy - width / 2)}" width="{_f(length)}" '
            f'height="{_f(width)}" transform="rotate({_f(deg)} {_f(cx)} {_f(cy)})"/>')


def _goal_element(goal) -> str:
    pos = goal.position
    if pos is None:
        return ""
    if isinstance(pos, Rectangle):
        return _rect("goal", None, pos.length, pos.width, pos.center.x, pos.center.y, pos.orientation)
    if isinstance(pos, Circle):
        return f'<circle class="goal" cx="{_f(pos.center.x)}" cy="{_f(pos.center.y)}" r="{_f(pos.radius)}"/>'
    return f'<polygon class="goal" points="{_points(pos.vertices)}"/>'


_STYLE = (".lanelet{fill:#d9d9d9;stroke:#666;stroke-width:0.1}"
          ".goal{fill:#ffe08a;fill-opacity:0.6}"
          ".obstacle{fill:#1f77b4}"
          ".ego{fill:#d62728}")


def render_frame(sc: Scenario, t: int, ego=None, p: DynamicsParams = DynamicsParams(),
                 extent=None, reactive_states=None) -> str:
    """One SVG document for time step ``t``; ``ego`` is a StateRecord or None."""
    x0, y0, w, h = extent or _extent(sc, None)
    scale = CANVAS / w
    width, height = CANVAS + 2 * PAD, h * scale + 2 * PAD
    # world (x, y) -> ((x - x0) * scale + PAD, (y0 + h - y) * scale + PAD)
    tf = f"matrix({_f(scale)} 0 0 {_f(-scale)} {_f(PAD - x0 * scale)} {_f(PAD + (y0 + h) * scale)})"
    out = ['<?xml version="1.0" encoding="utf-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
           f'viewBox="0 0 {_f(width)} {_f(height)}" data-time-step="{int(t)}">',
           f"<title>{_esc(sc.benchmark_id)} t={int(t)}</title>",
           f"<style>{_STYLE}</style>",
           f'<g id="world" transform="{tf}">']
    for ll in sc.lanelets:
        ring = [Point2(float(a), float(b)) for a, b in lanelet_polygon(ll).ring]
        out.append(f'<polygon class="lanelet" data-id="{ll.id}" points="{_points(ring)}"/>')
    for pp in sc.planning_problems[:1]:
        el = _goal_element(pp.goal)
        if el:
            out.append(el)
    reactive_states = dict(reactive_states or {})
    for o in sc.obstacles:
        if isinstance(o.behaviour, Reactive):
            st = reactive_states.get(o.id, o.initial_state)
        else:
            try:
                st = obstacle_state_at(o, t)
            except NoBehaviour:
                st = o.initial_state
        out.append(_shape_element(o.shape, st.position.x, st.position.y, st.orientation, "obstacle", o.id))
    if ego is not None:
        out.append(_rect("ego", None, p.length, p.width, ego.position.x, ego.position.y, ego.orientation))
    out += ["</g>", "</svg>", ""]
    return "\n".join(out)


def _esc(text: str) -> str:
    return quoteattr(text)[1:-1]


def frame_count(sc: Scenario, trajectory: Optional[Trajectory]) -> int:
    if trajectory is not None and trajectory.states:
        return max(st.time_step for st in trajectory.states) + 1
    last = 0
    for o in sc.obstacles:
        if isinstance(o.behaviour, Trajectory) and o.behaviour.states:
            last = max(last, max(st.time_step for st in o.behaviour.states))
    return last + 1


def render_frames(sc: Scenario, trajectory: Optional[Trajectory] = None,
                  p: DynamicsParams = DynamicsParams()) -> list:
    """SVG text per time step.  Without a trajectory the ego is drawn at its
    initial state in the first frame only."""
    extent = _extent(sc, trajectory)
    by_t = {}
    if trajectory is not None:
        by_t = {st.time_step: st for st in trajectory.states}
    elif sc.planning_problems:
        by_t = {0: sc.planning_problems[0].initial_state}
    return [render_frame(sc, t, by_t.get(t), p, extent) for t in range(frame_count(sc, trajectory))]


def write_frames(sc: Scenario, out_dir, trajectory: Optional[Trajectory] = None,
                 p: DynamicsParams = DynamicsParams()) -> Path:
    """Write ``frame_NNN.svg`` files and ``manifest.json``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames = render_frames(sc, trajectory, p)
    names = []
    for t, svg in enumerate(frames):
        name = f"frame_{t:03d}.svg"
        (out / name).write_text(svg, encoding="utf-8")
        names.append({"time_step": t, "file": name})
    manifest = {
        "format": FRAMES_FORMAT,
        "benchmark_id": sc.benchmark_id,
        "time_step_size": sc.time_step_size,
        "frames": names,
        "assemble": "convert -delay {} frame_*.svg animation.gif".format(int(round(sc.time_step_size * 100))),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
