"""CommonRoad scenario data model and XML I/O.

Only the subset needed for planning is interpreted: lanelets, static and
dynamic obstacles, and planning problems.  Every other element is kept as
opaque XML text in ``extras`` so that a parse/serialize cycle loses nothing.
The supported dialect is documented in ``docs/xml-subset.md``.
"""

from __future__ import annotations

import enum
import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from typing import Optional, Union

from .errors import InvariantViolation, MalformedXml, SchemaViolation

log = logging.getLogger(__name__)

COMMONROAD_VERSION = "2020a"

Extras = tuple  # tuple[tuple[str, str], ...]: (parent path, canonical xml)


def normalize_angle(a: float) -> float:
    """Map an angle to (-pi, pi]; values already in range are returned unchanged."""
    if -math.pi < a <= math.pi:
        return a
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


def _tuple(value):
    return tuple(value) if not isinstance(value, tuple) else value


@dataclass(frozen=True)
class Point2:
    x: float
    y: float


@dataclass(frozen=True)
class Interval:
    start: float
    end: float

    def contains(self, value: float) -> bool:
        return self.start <= value <= self.end


class ObstacleType(str, enum.Enum):
    CAR = "car"
    TRUCK = "truck"
    BUS = "bus"
    BICYCLE = "bicycle"
    PEDESTRIAN = "pedestrian"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Rectangle:
    length: float
    width: float
    center: Point2 = Point2(0.0, 0.0)
    orientation: float = 0.0


@dataclass(frozen=True)
class Circle:
    radius: float
    center: Point2 = Point2(0.0, 0.0)


@dataclass(frozen=True)
class Polygon:
    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", _tuple(self.vertices))


Shape = Union[Rectangle, Circle, Polygon]


@dataclass(frozen=True)
class StateRecord:
    time_step: int
    position: Point2
    orientation: float
    velocity: float = 0.0
    acceleration: float = 0.0
    extras: Extras = ()

    def __post_init__(self):
        object.__setattr__(self, "extras", _tuple(self.extras))


@dataclass(frozen=True)
class Trajectory:
    states: tuple

    def __post_init__(self):
        object.__setattr__(self, "states", _tuple(self.states))

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class Reactive:
    """Obstacle that picks one of a finite set of moves every period."""
    action_set: str = "default"


@dataclass(frozen=True)
class Obstacle:
    id: int
    obstacle_type: ObstacleType
    shape: Shape
    role: str  # "static" | "dynamic"
    initial_state: StateRecord
    behaviour: Optional[Union[Trajectory, Reactive]] = None
    raw_type: Optional[str] = None  # original <type> text when not a known ObstacleType
    extras: Extras = ()

    def __post_init__(self):
        object.__setattr__(self, "extras", _tuple(self.extras))

    @property
    def is_static(self) -> bool:
        return self.role == "static"


@dataclass(frozen=True)
class GoalRegion:
    position: Optional[Shape]
    time: Interval
    orientation: Optional[Interval] = None
    velocity: Optional[Interval] = None
    extras: Extras = ()

    def __post_init__(self):
        object.__setattr__(self, "extras", _tuple(self.extras))


@dataclass(frozen=True)
class PlanningProblem:
    id: int
    initial_state: StateRecord
    goal: GoalRegion
    extras: Extras = ()

    def __post_init__(self):
        object.__setattr__(self, "extras", _tuple(self.extras))


@dataclass(frozen=True)
class Lanelet:
    id: int
    left_bound: tuple
    right_bound: tuple
    predecessors: tuple = ()
    successors: tuple = ()
    extras: Extras = ()

    def __post_init__(self):
        for name in ("left_bound", "right_bound", "predecessors", "successors", "extras"):
            object.__setattr__(self, name, _tuple(getattr(self, name)))


@dataclass(frozen=True)
class Scenario:
    benchmark_id: str
    time_step_size: float
    lanelets: tuple = ()
    obstacles: tuple = ()
    planning_problems: tuple = ()
    version: str = COMMONROAD_VERSION
    attributes: tuple = ()  # extra root attributes as (name, value) pairs
    extras: Extras = ()

    def __post_init__(self):
        for name in ("lanelets", "obstacles", "planning_problems", "attributes", "extras"):
            object.__setattr__(self, name, _tuple(getattr(self, name)))

    def lanelet(self, lanelet_id: int) -> Lanelet:
        for ll in self.lanelets:
            if ll.id == lanelet_id:
                return ll
        raise KeyError(lanelet_id)

    def obstacle(self, obstacle_id: int) -> Obstacle:
        for ob in self.obstacles:
            if ob.id == obstacle_id:
                return ob
        raise KeyError(obstacle_id)

    @property
    def planning_problem(self) -> PlanningProblem:
        if not self.planning_problems:
            raise KeyError("scenario has no planning problem")
        return self.planning_problems[0]

    def all_ids(self) -> list:
        return ([ll.id for ll in self.lanelets] + [o.id for o in self.obstacles]
                + [p.id for p in self.planning_problems])

    def with_obstacle(self, obstacle: Obstacle) -> "Scenario":
        return replace(self, obstacles=self.obstacles + (obstacle,))


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Diagnostic:
    entity_id: Optional[int]
    message: str
    code: str = "invariant"  # "invariant" | "reference"

    def __str__(self):
        who = "scenario" if self.entity_id is None else f"id {self.entity_id}"
        return f"{who}: {self.message}"


def _finite(*values) -> bool:
    return all(math.isfinite(v) for v in values)


def _is_convex(vertices) -> bool:
    n = len(vertices)
    if n < 3:
        return False
    sign = 0
    turning = 0.0
    for i in range(n):
        a, b, c = vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]
        e1x, e1y = b.x - a.x, b.y - a.y
        e2x, e2y = c.x - b.x, c.y - b.y
        if (e1x == 0 and e1y == 0) or (e2x == 0 and e2y == 0):
            return False
        cross = e1x * e2y - e1y * e2x
        if cross != 0:
            s = 1 if cross > 0 else -1
            if sign and s != sign:
                return False
            sign = s
        turning += math.atan2(cross, e1x * e2x + e1y * e2y)
    # rules out star polygons that turn consistently but wind twice
    return sign != 0 and abs(abs(turning) - 2 * math.pi) < 1e-6


def _shape_diagnostics(shape, owner) -> list:
    out = []
    if isinstance(shape, Rectangle):
        if not _finite(shape.length, shape.width, shape.center.x, shape.center.y, shape.orientation):
            out.append(Diagnostic(owner, "rectangle has non-finite values"))
        elif shape.length <= 0 or shape.width <= 0:
            out.append(Diagnostic(owner, "rectangle dimensions must be positive"))
    elif isinstance(shape, Circle):
        if not _finite(shape.radius, shape.center.x, shape.center.y):
            out.append(Diagnostic(owner, "circle has non-finite values"))
        elif shape.radius <= 0:
            out.append(Diagnostic(owner, "circle radius must be positive"))
    elif isinstance(shape, Polygon):
        if not all(_finite(p.x, p.y) for p in shape.vertices):
            out.append(Diagnostic(owner, "polygon has non-finite vertices"))
        elif len(shape.vertices) < 3:
            out.append(Diagnostic(owner, "polygon needs at least 3 vertices"))
        elif not _is_convex(shape.vertices):
            out.append(Diagnostic(owner, "polygon is not convex"))
    else:
        out.append(Diagnostic(owner, f"unsupported shape {type(shape).__name__}"))
    return out


def _state_diagnostics(st: StateRecord, owner) -> list:
    out = []
    if not _finite(st.position.x, st.position.y, st.orientation, st.velocity, st.acceleration):
        out.append(Diagnostic(owner, f"state at time step {st.time_step} has non-finite values"))
        return out
    if st.time_step < 0:
        out.append(Diagnostic(owner, "negative time step"))
    if not -math.pi < st.orientation <= math.pi:
        out.append(Diagnostic(owner, f"orientation {st.orientation} not in (-pi, pi]"))
    if st.velocity < 0:
        out.append(Diagnostic(owner, f"negative velocity {st.velocity}"))
    return out


def _interval_diagnostics(iv, owner, name) -> list:
    if iv is None:
        return []
    if not _finite(iv.start, iv.end):
        return [Diagnostic(owner, f"{name} interval has non-finite bounds")]
    if iv.start > iv.end:
        return [Diagnostic(owner, f"{name} interval [{iv.start}, {iv.end}] is empty")]
    return []


def validate_scenario(sc: Scenario) -> list:
    """Return every invariant or cross-reference problem found in ``sc``."""
    diags = []
    if not (math.isfinite(sc.time_step_size) and sc.time_step_size > 0):
        diags.append(Diagnostic(None, f"time step size {sc.time_step_size} must be positive"))

    seen = {}
    for category, ids in (("lanelet", [ll.id for ll in sc.lanelets]),
                          ("obstacle", [o.id for o in sc.obstacles]),
                          ("planning problem", [p.id for p in sc.planning_problems])):
        for i in ids:
            if i <= 0:
                diags.append(Diagnostic(i, f"{category} id must be positive"))
            if i in seen:
                diags.append(Diagnostic(i, f"duplicate id ({seen[i]} and {category})"))
            else:
                seen[i] = category

    lanelet_ids = {ll.id for ll in sc.lanelets}
    for ll in sc.lanelets:
        if len(ll.left_bound) < 2 or len(ll.right_bound) < 2:
            diags.append(Diagnostic(ll.id, "each bound needs at least 2 points"))
        if len(ll.left_bound) != len(ll.right_bound):
            diags.append(Diagnostic(ll.id, f"bound lengths differ ({len(ll.left_bound)} "
                                           f"left vs {len(ll.right_bound)} right)"))
        if not all(_finite(p.x, p.y) for p in ll.left_bound + ll.right_bound):
            diags.append(Diagnostic(ll.id, "bound has non-finite points"))
        for kind, refs in (("predecessor", ll.predecessors), ("successor", ll.successors)):
            for ref in refs:
                if ref not in lanelet_ids:
                    diags.append(Diagnostic(ref, f"{kind} {ref} of lanelet {ll.id} does not exist",
                                            code="reference"))

    for ob in sc.obstacles:
        diags += _shape_diagnostics(ob.shape, ob.id)
        diags += _state_diagnostics(ob.initial_state, ob.id)
        if ob.role not in ("static", "dynamic"):
            diags.append(Diagnostic(ob.id, f"unknown role {ob.role!r}"))
        if ob.is_static:
            if ob.behaviour is not None:
                diags.append(Diagnostic(ob.id, "static obstacle must not have a behaviour"))
        elif ob.behaviour is None:
            diags.append(Diagnostic(ob.id, "dynamic obstacle needs a trajectory or reactive behaviour"))
        if isinstance(ob.behaviour, Trajectory):
            states = ob.behaviour.states
            if not states:
                diags.append(Diagnostic(ob.id, "empty trajectory"))
            else:
                if states[0].time_step != 0:
                    diags.append(Diagnostic(ob.id, "trajectory must start at time step 0"))
                if states[0] != ob.initial_state:
                    diags.append(Diagnostic(ob.id, "trajectory must begin with the initial state"))
                for prev, cur in zip(states, states[1:]):
                    if cur.time_step <= prev.time_step:
                        diags.append(Diagnostic(ob.id, f"trajectory time step {cur.time_step} does not "
                                                       f"increase (after {prev.time_step})"))
                for st in states[1:]:
                    diags += _state_diagnostics(st, ob.id)
        elif ob.initial_state.time_step != 0:
            diags.append(Diagnostic(ob.id, "initial state must be at time step 0"))

    for pp in sc.planning_problems:
        diags += _state_diagnostics(pp.initial_state, pp.id)
        if pp.initial_state.time_step != 0:
            diags.append(Diagnostic(pp.id, "planning problem must start at time step 0"))
        if pp.goal.position is not None:
            diags += _shape_diagnostics(pp.goal.position, pp.id)
        diags += _interval_diagnostics(pp.goal.time, pp.id, "time")
        diags += _interval_diagnostics(pp.goal.orientation, pp.id, "orientation")
        diags += _interval_diagnostics(pp.goal.velocity, pp.id, "velocity")
    return diags


# ---------------------------------------------------------------------------
# parsing

_KNOWN_TYPES = {t.value for t in ObstacleType}


def _canonical(elem: ET.Element) -> str:
    """Serialize an opaque element with whitespace-only text stripped, so that
    indentation added on output does not change it on the next parse."""
    clone = ET.fromstring(ET.tostring(elem))
    for e in clone.iter():
        if e.text is not None and not e.text.strip():
            e.text = None
        e.tail = None
    return ET.tostring(clone, encoding="unicode")


class _Reader:
    def child(self, elem, tag, path):
        found = elem.find(tag)
        if found is None:
            raise SchemaViolation(f"{path}/{tag}", "missing mandatory element")
        return found

    def text(self, elem, path):
        if elem.text is None or not elem.text.strip():
            raise SchemaViolation(path, "empty value")
        return elem.text.strip()

    def float(self, elem, tag, path):
        p = f"{path}/{tag}"
        raw = self.text(self.child(elem, tag, path), p)
        try:
            value = float(raw)
        except ValueError:
            raise SchemaViolation(p, f"not a number: {raw!r}") from None
        if not math.isfinite(value):
            raise SchemaViolation(p, f"value {raw!r} is not finite")
        return value

    def int(self, elem, tag, path):
        p = f"{path}/{tag}"
        raw = self.text(self.child(elem, tag, path), p)
        try:
            return int(raw)
        except ValueError:
            raise SchemaViolation(p, f"not an integer: {raw!r}") from None

    def attr_int(self, elem, name, path):
        raw = elem.get(name)
        if raw is None:
            raise SchemaViolation(f"{path}/@{name}", "missing attribute")
        try:
            return int(raw)
        except ValueError:
            raise SchemaViolation(f"{path}/@{name}", f"not an integer: {raw!r}") from None

    def point(self, elem, path):
        return Point2(self.float(elem, "x", path), self.float(elem, "y", path))

    def exact(self, elem, tag, path, integer=False):
        node = self.child(elem, tag, path)
        p = f"{path}/{tag}"
        if node.find("exact") is None:
            raise SchemaViolation(f"{p}/exact", "only exact values are supported here")
        return self.int(node, "exact", p) if integer else self.float(node, "exact", p)

    def interval(self, elem, tag, path, integer=False):
        node = elem.find(tag)
        if node is None:
            return None
        p = f"{path}/{tag}"
        if node.find("exact") is not None:
            v = self.int(node, "exact", p) if integer else self.float(node, "exact", p)
            return Interval(v, v)
        conv = self.int if integer else self.float
        return Interval(conv(node, "intervalStart", p), conv(node, "intervalEnd", p))

    def state(self, elem, path):
        pos = self.child(elem, "position", path)
        pt = self.child(pos, "point", f"{path}/position")
        extras = tuple(("", _canonical(c)) for c in elem
                       if c.tag not in ("position", "orientation", "time", "velocity", "acceleration"))
        return StateRecord(
            time_step=self.exact(elem, "time", path, integer=True),
            position=self.point(pt, f"{path}/position/point"),
            orientation=normalize_angle(self.exact(elem, "orientation", path)),
            velocity=self.exact(elem, "velocity", path) if elem.find("velocity") is not None else 0.0,
            acceleration=(self.exact(elem, "acceleration", path)
                          if elem.find("acceleration") is not None else 0.0),
            extras=extras,
        )

    def shape(self, elem, path):
        for node in elem:
            p = f"{path}/{node.tag}"
            if node.tag == "rectangle":
                center = node.find("center")
                return Rectangle(
                    self.float(node, "length", p), self.float(node, "width", p),
                    self.point(center, f"{p}/center") if center is not None else Point2(0.0, 0.0),
                    normalize_angle(self.float(node, "orientation", p))
                    if node.find("orientation") is not None else 0.0)
            if node.tag == "circle":
                center = node.find("center")
                return Circle(self.float(node, "radius", p),
                              self.point(center, f"{p}/center") if center is not None else Point2(0.0, 0.0))
            if node.tag == "polygon":
                return Polygon(tuple(self.point(pt, f"{p}/point[{i}]")
                                     for i, pt in enumerate(node.findall("point"))))
        raise SchemaViolation(f"{path}/rectangle|circle|polygon", "no supported shape")

    def bound(self, elem, path):
        return tuple(self.point(pt, f"{path}/point[{i}]") for i, pt in enumerate(elem.findall("point")))

    def lanelet(self, elem, path):
        lid = self.attr_int(elem, "id", path)
        path = f"{path}[@id={lid}]"
        left = self.child(elem, "leftBound", path)
        right = self.child(elem, "rightBound", path)
        extras = []
        for name, bound in (("leftBound", left), ("rightBound", right)):
            extras += [(name, _canonical(c)) for c in bound if c.tag != "point"]
        extras += [("", _canonical(c)) for c in elem
                   if c.tag not in ("leftBound", "rightBound", "predecessor", "successor")]
        return Lanelet(
            id=lid,
            left_bound=self.bound(left, f"{path}/leftBound"),
            right_bound=self.bound(right, f"{path}/rightBound"),
            predecessors=tuple(self.attr_int(e, "ref", f"{path}/predecessor") for e in elem.findall("predecessor")),
            successors=tuple(self.attr_int(e, "ref", f"{path}/successor") for e in elem.findall("successor")),
            extras=tuple(extras),
        )

    def obstacle(self, elem, path, role):
        oid = self.attr_int(elem, "id", path)
        path = f"{path}[@id={oid}]"
        raw = self.text(self.child(elem, "type", path), f"{path}/type")
        if raw in _KNOWN_TYPES:
            otype, raw_type = ObstacleType(raw), None
        else:
            log.warning("obstacle %d: unknown type %r mapped to 'unknown'", oid, raw)
            otype, raw_type = ObstacleType.UNKNOWN, raw
        shape = self.shape(self.child(elem, "shape", path), f"{path}/shape")
        initial = self.state(self.child(elem, "initialState", path), f"{path}/initialState")
        behaviour = None
        if role == "dynamic":
            traj = elem.find("trajectory")
            reactive = elem.find("reactive")
            if traj is not None:
                states = [initial] + [self.state(s, f"{path}/trajectory/state[{i}]")
                                      for i, s in enumerate(traj.findall("state"))]
                behaviour = Trajectory(tuple(states))
            elif reactive is not None:
                behaviour = Reactive(reactive.get("actionSet", "default"))
            else:
                raise SchemaViolation(f"{path}/trajectory", "dynamic obstacle needs trajectory or reactive")
        known = {"type", "shape", "initialState", "trajectory", "reactive"}
        extras = tuple(("", _canonical(c)) for c in elem if c.tag not in known)
        return Obstacle(oid, otype, shape, role, initial, behaviour, raw_type, extras)

    def goal(self, elem, path):
        pos = elem.find("position")
        extras = []
        position = None
        if pos is not None:
            if any(c.tag in ("rectangle", "circle", "polygon") for c in pos):
                position = self.shape(pos, f"{path}/position")
            else:
                extras.append(("", _canonical(pos)))
        time = self.interval(elem, "time", path, integer=True)
        if time is None:
            raise SchemaViolation(f"{path}/time", "missing mandatory element")
        extras += [("", _canonical(c)) for c in elem
                   if c.tag not in ("position", "time", "orientation", "velocity")]
        return GoalRegion(position, time,
                          self.interval(elem, "orientation", path),
                          self.interval(elem, "velocity", path),
                          tuple(extras))

    def planning_problem(self, elem, path):
        pid = self.attr_int(elem, "id", path)
        path = f"{path}[@id={pid}]"
        initial = self.state(self.child(elem, "initialState", path), f"{path}/initialState")
        goals = elem.findall("goalState")
        if not goals:
            raise SchemaViolation(f"{path}/goalState", "missing mandatory element")
        goal = self.goal(goals[0], f"{path}/goalState")
        extras = [("", _canonical(c)) for c in elem if c.tag not in ("initialState", "goalState")]
        extras += [("", _canonical(g)) for g in goals[1:]]
        return PlanningProblem(pid, initial, goal, tuple(extras))


_ROOT = "commonRoad"
_ROOT_ATTRS = ("commonRoadVersion", "benchmarkID", "timeStepSize")


def parse_scenario(xml_text) -> Scenario:
    """Parse a CommonRoad scenario document.

    ``xml_text`` may be a ``str``, ``bytes`` or a readable file object.  Raises
    ``MalformedXml``, ``SchemaViolation`` (with the element path) or
    ``InvariantViolation`` (with the offending id).
    """
    if hasattr(xml_text, "read"):
        xml_text = xml_text.read()
    try:
        root = ET.fromstring(xml_text)
    except (ET.ParseError, ValueError, TypeError) as exc:
        raise MalformedXml(str(exc)) from None
    try:
        return _parse_root(root)
    except RecursionError:
        raise MalformedXml("element nesting too deep") from None


def _parse_root(root) -> Scenario:
    if root.tag != _ROOT:
        raise SchemaViolation(f"/{_ROOT}", f"unexpected root element <{root.tag}>")
    rd = _Reader()
    path = f"/{_ROOT}"
    raw_step = root.get("timeStepSize")
    if raw_step is None:
        raise SchemaViolation(f"{path}/@timeStepSize", "missing attribute")
    try:
        step = float(raw_step)
    except ValueError:
        raise SchemaViolation(f"{path}/@timeStepSize", f"not a number: {raw_step!r}") from None
    if root.find("lanelet") is None:
        raise SchemaViolation(f"{path}/lanelet", "scenario has no lanelet section")

    lanelets, obstacles, problems, extras = [], [], [], []
    for elem in root:
        tag = elem.tag
        if tag == "lanelet":
            lanelets.append(rd.lanelet(elem, f"{path}/lanelet"))
        elif tag == "staticObstacle":
            obstacles.append(rd.obstacle(elem, f"{path}/staticObstacle", "static"))
        elif tag == "dynamicObstacle":
            obstacles.append(rd.obstacle(elem, f"{path}/dynamicObstacle", "dynamic"))
        elif tag == "planningProblem":
            problems.append(rd.planning_problem(elem, f"{path}/planningProblem"))
        else:
            extras.append(("", _canonical(elem)))

    sc = Scenario(
        benchmark_id=root.get("benchmarkID", ""),
        time_step_size=step,
        lanelets=tuple(lanelets),
        obstacles=tuple(obstacles),
        planning_problems=tuple(problems),
        version=root.get("commonRoadVersion", COMMONROAD_VERSION),
        attributes=tuple((k, v) for k, v in root.attrib.items() if k not in _ROOT_ATTRS),
        extras=tuple(extras),
    )
    # cross-reference problems are left to validate_scenario; everything else is fatal
    for diag in validate_scenario(sc):
        if diag.code != "reference":
            raise InvariantViolation(diag.entity_id, diag.message)
    return sc


# ---------------------------------------------------------------------------
# serialization

def _num(v) -> str:
    return repr(float(v))


def _sub(parent, tag, text=None, **attrib):
    e = ET.SubElement(parent, tag, attrib)
    if text is not None:
        e.text = text
    return e


def _put_point(parent, tag, p: Point2):
    e = _sub(parent, tag)
    _sub(e, "x", _num(p.x))
    _sub(e, "y", _num(p.y))
    return e


def _put_extras(parent, extras, where=""):
    for path, xml in extras:
        if path == where:
            parent.append(ET.fromstring(xml))


def _put_state(parent, tag, st: StateRecord):
    e = _sub(parent, tag)
    _put_point(_sub(e, "position"), "point", st.position)
    _sub(_sub(e, "orientation"), "exact", _num(st.orientation))
    _sub(_sub(e, "time"), "exact", str(int(st.time_step)))
    _sub(_sub(e, "velocity"), "exact", _num(st.velocity))
    _sub(_sub(e, "acceleration"), "exact", _num(st.acceleration))
    _put_extras(e, st.extras)
    return e


def _put_shape(parent, shape):
    if isinstance(shape, Rectangle):
        r = _sub(parent, "rectangle")
        _sub(r, "length", _num(shape.length))
        _sub(r, "width", _num(shape.width))
        _sub(r, "orientation", _num(shape.orientation))
        _put_point(r, "center", shape.center)
    elif isinstance(shape, Circle):
        c = _sub(parent, "circle")
        _sub(c, "radius", _num(shape.radius))
        _put_point(c, "center", shape.center)
    else:
        poly = _sub(parent, "polygon")
        for v in shape.vertices:
            _put_point(poly, "point", v)


def _put_interval(parent, tag, iv: Interval, integer=False):
    e = _sub(parent, tag)
    fmt = (lambda v: str(int(v))) if integer else _num
    _sub(e, "intervalStart", fmt(iv.start))
    _sub(e, "intervalEnd", fmt(iv.end))


def serialize_scenario(sc: Scenario) -> str:
    """Serialize to XML text; element order is fixed, output is deterministic."""
    attrib = {"commonRoadVersion": sc.version, "benchmarkID": sc.benchmark_id,
              "timeStepSize": _num(sc.time_step_size)}
    attrib.update(dict(sc.attributes))
    root = ET.Element(_ROOT, attrib)
    _put_extras(root, sc.extras)

    for ll in sc.lanelets:
        e = _sub(root, "lanelet", id=str(ll.id))
        for tag, bound in (("leftBound", ll.left_bound), ("rightBound", ll.right_bound)):
            b = _sub(e, tag)
            for p in bound:
                _put_point(b, "point", p)
            _put_extras(b, ll.extras, tag)
        for ref in ll.predecessors:
            _sub(e, "predecessor", ref=str(ref))
        for ref in ll.successors:
            _sub(e, "successor", ref=str(ref))
        _put_extras(e, ll.extras)

    for ob in sc.obstacles:
        e = _sub(root, "staticObstacle" if ob.is_static else "dynamicObstacle", id=str(ob.id))
        _sub(e, "type", ob.raw_type or ob.obstacle_type.value)
        _put_shape(_sub(e, "shape"), ob.shape)
        _put_state(e, "initialState", ob.initial_state)
        if isinstance(ob.behaviour, Trajectory):
            tr = _sub(e, "trajectory")
            for st in ob.behaviour.states[1:]:
                _put_state(tr, "state", st)
        elif isinstance(ob.behaviour, Reactive):
            _sub(e, "reactive", actionSet=ob.behaviour.action_set)
        _put_extras(e, ob.extras)

    for pp in sc.planning_problems:
        e = _sub(root, "planningProblem", id=str(pp.id))
        _put_state(e, "initialState", pp.initial_state)
        g = _sub(e, "goalState")
        if pp.goal.position is not None:
            _put_shape(_sub(g, "position"), pp.goal.position)
        _put_interval(g, "time", pp.goal.time, integer=True)
        if pp.goal.orientation is not None:
            _put_interval(g, "orientation", pp.goal.orientation)
        if pp.goal.velocity is not None:
            _put_interval(g, "velocity", pp.goal.velocity)
        _put_extras(g, pp.goal.extras)
        _put_extras(e, pp.extras)

    ET.indent(root, space="  ")
    return "<?xml version='1.0' encoding='UTF-8'?>\n" + ET.tostring(root, encoding="unicode") + "\n"


def load_scenario(path) -> Scenario:
    with open(path, "rb") as fh:
        return parse_scenario(fh.read())


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_scenario(sc))
