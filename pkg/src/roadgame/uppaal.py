"""UPPAAL 5 model and query emission.

The model has three templates running in lock step:

* ``CM`` keeps the decision clock: it waits exactly one period in ``L3``,
  then lets obstacles react, lets the controller perceive and finally hands
  the decision to the controller through channel ``ego``.
* ``VD`` carries the ego dynamics as rate equations on hybrid clocks, with
  self-loops for perception (sampling) and obstacle reaction.
* ``AA`` offers the nine ego actions as controllable edges on ``ego``.

Scenario data goes into global declarations as constant arrays.  The
``offroad()`` and ``collide()`` functions follow the geometry module: nine
sample points tested against every lanelet ring, and circle covers compared
against the safety margin.
"""

from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from decimal import Decimal

from .dynamics import ACTION_LABELS, DynamicsParams, actions as all_actions, obstacle_state_at
from .errors import UnsupportedFeature
from .game import GridSpec
from .geometry import BOUNDARY_EPS, shape_box
from .scenario import Circle, Polygon, Reactive, Rectangle, Scenario

DOCTYPE = ("<!DOCTYPE nta PUBLIC '-//Uppaal Team//DTD Flat System 1.6//EN' "
           "'http://www.it.uu.se/research/group/darts/uppaal/flat-1_6.dtd'>")
TEMPLATE_NAMES = ("CM", "VD", "AA")
SAFE_QUERY = "strategy safe = control: A[] !collide() && !offroad()"
EXISTS_QUERY = "E[] !collide() && !offroad()"


def generate_queries(sc: Scenario = None, maxt: int = 10) -> str:
    """The query file: existence of a safe path, the safety strategy, and the
    reward-optimal goal strategy under it."""
    if int(maxt) != maxt or maxt < 1:
        raise ValueError("MAXT must be a positive integer")
    reach = f"strategy reachS = maxE(reward)[<={int(maxt)}]: <> goal() under safe"
    return "\n".join((EXISTS_QUERY, SAFE_QUERY, reach)) + "\n"


# ---------------------------------------------------------------------------
# document model

@dataclass(frozen=True)
class Location:
    id: str
    name: str
    x: int
    y: int
    invariant: str = ""
    urgent: bool = False


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    controllable: bool = True
    select: str = ""
    guard: str = ""
    sync: str = ""
    assignment: str = ""


@dataclass(frozen=True)
class Template:
    name: str
    locations: tuple
    init: str
    edges: tuple
    declaration: str = ""


@dataclass
class ModelDocument:
    declarations: str
    templates: tuple
    system: str
    queries: list = field(default_factory=list)

    def template(self, name: str) -> Template:
        for t in self.templates:
            if t.name == name:
                return t
        raise KeyError(name)

    def to_xml(self) -> str:
        root = ET.Element("nta")
        ET.SubElement(root, "declaration").text = self.declarations
        for t in self.templates:
            _template_xml(root, t)
        ET.SubElement(root, "system").text = self.system
        qs = ET.SubElement(root, "queries")
        for q in self.queries:
            ET.SubElement(ET.SubElement(qs, "query"), "formula").text = q
        ET.indent(root, space="  ")
        body = ET.tostring(root, encoding="unicode")
        return '<?xml version="1.0" encoding="utf-8"?>\n' + DOCTYPE + "\n" + body + "\n"


def _template_xml(root, t: Template):
    el = ET.SubElement(root, "template")
    ET.SubElement(el, "name").text = t.name
    if t.declaration:
        ET.SubElement(el, "declaration").text = t.declaration
    for loc in t.locations:
        le = ET.SubElement(el, "location", id=loc.id, x=str(loc.x), y=str(loc.y))
        ET.SubElement(le, "name", x=str(loc.x - 10), y=str(loc.y - 30)).text = loc.name
        if loc.invariant:
            ET.SubElement(le, "label", kind="invariant", x=str(loc.x - 10), y=str(loc.y + 15)).text = loc.invariant
        if loc.urgent:
            ET.SubElement(le, "urgent")
    ET.SubElement(el, "init", ref=t.init)
    for e in t.edges:
        attrs = {} if e.controllable else {"controllable": "false"}
        te = ET.SubElement(el, "transition", attrs)
        ET.SubElement(te, "source", ref=e.source)
        ET.SubElement(te, "target", ref=e.target)
        for kind in ("select", "guard", "sync", "assignment"):
            text = getattr(e, kind)
            if text:
                ET.SubElement(te, "label", kind=kind).text = text


# ---------------------------------------------------------------------------
# declarations

def _num(v) -> str:
    """Exact fixed-point literal for a float (no exponent, always a dot)."""
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"cannot emit non-finite constant {v}")
    if v == 0.0:
        return "0.0"
    text = format(Decimal(repr(v)), "f")
    return text if "." in text else text + ".0"


def _array(values) -> str:
    return "{" + ", ".join(values) + "}"


def _pt(x, y) -> str:
    return "{" + _num(x) + ", " + _num(y) + "}"


def _pad(points, n):
    points = list(points)
    return points + [points[-1]] * (n - len(points))


def _obstacle_geometry(o):
    """(kind, length, width, radius, dx, dy, dtheta) of the obstacle's cover."""
    if isinstance(o.shape, Circle):
        return 1, 0.0, 0.0, o.shape.radius, o.shape.center.x, o.shape.center.y, 0.0
    if isinstance(o.shape, (Rectangle, Polygon)):
        box = shape_box(o.shape, 0.0, 0.0, 0.0)
        return 0, box.length, box.width, 0.0, box.center.x, box.center.y, box.orientation
    raise UnsupportedFeature(f"obstacle {o.id}: unsupported shape")


def _goal_lines(goal) -> list:
    pos = goal.position
    lines = []
    if pos is None:
        lines.append("const int GOAL_KIND = 0;   // no spatial constraint")
        kind_args = ("0.0",) * 5
    elif isinstance(pos, Rectangle):
        lines.append("const int GOAL_KIND = 1;   // rectangle")
        kind_args = (_num(pos.center.x), _num(pos.center.y), _num(pos.length), _num(pos.width),
                     _num(pos.orientation))
    elif isinstance(pos, Circle):
        lines.append("const int GOAL_KIND = 2;   // circle")
        kind_args = (_num(pos.center.x), _num(pos.center.y), _num(pos.radius), "0.0", "0.0")
    else:
        lines.append("const int GOAL_KIND = 3;   // polygon")
        kind_args = ("0.0",) * 5
    lines.append("const double GOAL_SHAPE[5] = " + _array(kind_args) + ";")
    ring = list(pos.vertices) if isinstance(pos, Polygon) else []
    lines.append(f"const int GOAL_NPOLY = {max(1, len(ring))};")
    lines.append("const double GOAL_POLY[GOAL_NPOLY][2] = "
                 + _array([_pt(q.x, q.y) for q in ring] or [_pt(0, 0)]) + ";")
    lines.append(f"const int GOAL_T0 = {int(math.ceil(goal.time.start))};")
    lines.append(f"const int GOAL_T1 = {int(math.floor(goal.time.end))};")
    for name, iv, lo, hi in (("THETA", goal.orientation, -math.pi, math.pi),
                             ("V", goal.velocity, 0.0, 1e6)):
        lo_v, hi_v = (iv.start, iv.end) if iv is not None else (lo, hi)
        lines.append(f"const double GOAL_{name}[2] = {{{_num(lo_v)}, {_num(hi_v)}}};")
    return lines


def _declarations(sc: Scenario, p: DynamicsParams, g: GridSpec) -> str:
    H = g.horizon
    acts = all_actions(p)
    reactive = [o for o in sc.obstacles if isinstance(o.behaviour, Reactive)]
    for o in reactive:
        if o.behaviour.action_set != "default":
            raise UnsupportedFeature(f"obstacle {o.id}: reactive action set {o.behaviour.action_set!r}")
    out = [f"// scenario {sc.benchmark_id}", ""]

    out += ["// timing", f"const int MAXT = {H};", f"const double PERIOD = {_num(p.period)};",
            f"const int SUBSTEPS = {p.substeps};", "clock time;", "int[0, MAXT] step = 0;", ""]

    out += ["// ego dynamics and footprint",
            f"const double A = {_num(p.accel)};", f"const double OMEGA = {_num(p.yaw_rate)};",
            f"const double VMAX = {_num(p.v_max)};", f"const double LEN = {_num(p.length)};",
            f"const double WID = {_num(p.width)};", f"const double MARGIN = {_num(p.margin)};",
            f"const int NCIRCLE = {p.circle_count};", f"const double EPS = {_num(BOUNDARY_EPS)};",
            "const int NACT = 9;",
            "const double ACT_ACC[NACT] = " + _array(_num(a.accel_cmd) for a in acts) + ";",
            "const double ACT_YAW[NACT] = " + _array(_num(a.yaw_cmd) for a in acts) + ";",
            "// action order: " + ", ".join(ACTION_LABELS), ""]

    # lanelets: bounds padded to a common length by repeating the last point
    lls = sc.lanelets
    npt = max([max(len(ll.left_bound), len(ll.right_bound)) for ll in lls] or [1])
    out += ["// lanelets", f"const int NLANELET = {max(1, len(lls))};", f"const int NPOINT = {npt};"]
    if lls:
        out.append("const int LANELET_ID[NLANELET] = " + _array(str(ll.id) for ll in lls) + ";")
        out.append("const int NLEFT[NLANELET] = " + _array(str(len(ll.left_bound)) for ll in lls) + ";")
        out.append("const int NRIGHT[NLANELET] = " + _array(str(len(ll.right_bound)) for ll in lls) + ";")
        for name, attr in (("LEFT", "left_bound"), ("RIGHT", "right_bound")):
            rows = [_array(_pt(q.x, q.y) for q in _pad(getattr(ll, attr), npt)) for ll in lls]
            out.append(f"const double {name}[NLANELET][NPOINT][2] = {{\n    "
                       + ",\n    ".join(rows) + "\n};")
        out.append("const bool HAS_ROAD = true;")
    else:
        out += ["const int LANELET_ID[NLANELET] = {-1};   // placeholder, no lanelets",
                "const int NLEFT[NLANELET] = {1};", "const int NRIGHT[NLANELET] = {1};",
                "const double LEFT[NLANELET][NPOINT][2] = {{{0.0, 0.0}}};",
                "const double RIGHT[NLANELET][NPOINT][2] = {{{0.0, 0.0}}};",
                "const bool HAS_ROAD = false;"]
    out.append("")

    # obstacles: cover geometry, poses over 0..MAXT for fixed behaviour
    obs = sc.obstacles
    out += ["// obstacles", f"const int NOBST = {max(1, len(obs))};"]
    if obs:
        geo = [_obstacle_geometry(o) for o in obs]
        out.append("const int OBSTACLE_ID[NOBST] = " + _array(str(o.id) for o in obs) + ";")
        out.append("const int OKIND[NOBST] = " + _array(str(k[0]) for k in geo) + ";   // 0 box, 1 circle")
        out.append("const double OGEOM[NOBST][6] = {\n    "
                   + ",\n    ".join(_array(_num(v) for v in k[1:]) for k in geo)
                   + "\n};   // length, width, radius, dx, dy, dtheta")
        out.append("const bool OREACT[NOBST] = "
                   + _array("true" if o in reactive else "false" for o in obs) + ";")
        rows = []
        for o in obs:
            states = ([o.initial_state] * (H + 1) if o in reactive
                      else [obstacle_state_at(o, t) for t in range(H + 1)])
            rows.append(_array("{" + ", ".join((_num(s.position.x), _num(s.position.y), _num(s.orientation),
                                                 _num(s.velocity))) + "}" for s in states))
        out.append("const double OPOSE[NOBST][MAXT + 1][4] = {\n    " + ",\n    ".join(rows) + "\n};")
    else:
        out += ["const int OBSTACLE_ID[NOBST] = {-1};   // placeholder, no obstacles",
                "const int OKIND[NOBST] = {0};",
                "const double OGEOM[NOBST][6] = {{0.0, 0.0, 0.0, 0.0, 0.0, 0.0}};",
                "const bool OREACT[NOBST] = {false};",
                "const double OPOSE[NOBST][MAXT + 1][4] = {{"
                + ", ".join(["{0.0, 0.0, 0.0, 0.0}"] * (H + 1)) + "}};"]
    out.append(f"const int NOBST_USED = {len(obs)};")
    out.append(f"const int NREACT = {len(reactive)};")
    out.append(f"const int NCHOICE = {3 ** len(reactive)};   // joint reactive moves")
    out.append("double ox[NOBST], oy[NOBST], oth[NOBST], ov[NOBST];")
    out.append("")

    # planning problem
    out.append("// planning problem")
    if sc.planning_problems:
        pp = sc.planning_problems[0]
        st = pp.initial_state
        out.append(f"const int PLANNING_ID = {pp.id};")
        out.append(f"const double INIT[4] = {{{_num(st.position.x)}, {_num(st.position.y)}, "
                   f"{_num(st.orientation)}, {_num(st.velocity)}}};")
        out += _goal_lines(pp.goal)
    else:
        out.append("const int PLANNING_ID = -1;   // placeholder, no planning problem")
        out.append("const double INIT[4] = {0.0, 0.0, 0.0, 0.0};")
        out += ["const int GOAL_KIND = 0;", "const double GOAL_SHAPE[5] = {0.0, 0.0, 0.0, 0.0, 0.0};",
                "const int GOAL_NPOLY = 1;", "const double GOAL_POLY[GOAL_NPOLY][2] = {{0.0, 0.0}};",
                "const int GOAL_T0 = 0;", "const int GOAL_T1 = -1;",
                f"const double GOAL_THETA[2] = {{{_num(-math.pi)}, {_num(math.pi)}}};",
                "const double GOAL_V[2] = {0.0, 1000000.0};"]
    out.append("")

    out += ["// sampled ego state and the current command",
            "double px = INIT[0], py = INIT[1], pth = INIT[2], pv = INIT[3];",
            "double acc = 0.0, yaw = 0.0;",
            "double reward = 0.0;",
            "broadcast chan perceive;", "chan ego, react;", ""]
    out.append(_FUNCTIONS)
    return "\n".join(out)


_FUNCTIONS = """\
// point on segment within EPS, then even-odd crossing (closed polygon)
bool in_lanelet(int i, double qx, double qy) {
    bool inside = false;
    int n = NLEFT[i] + NRIGHT[i];
    int k;
    for (k = 0; k < n; k++) {
        int k2 = (k + 1) % n;
        double ax, ay, bx, by, ex, ey, ll, t, dx, dy;
        if (k < NLEFT[i]) { ax = LEFT[i][k][0]; ay = LEFT[i][k][1]; }
        else { ax = RIGHT[i][n - 1 - k][0]; ay = RIGHT[i][n - 1 - k][1]; }
        if (k2 < NLEFT[i]) { bx = LEFT[i][k2][0]; by = LEFT[i][k2][1]; }
        else { bx = RIGHT[i][n - 1 - k2][0]; by = RIGHT[i][n - 1 - k2][1]; }
        ex = bx - ax; ey = by - ay;
        ll = ex * ex + ey * ey;
        t = 0.0;
        if (ll > 0.0) {
            t = ((qx - ax) * ex + (qy - ay) * ey) / ll;
            if (t < 0.0) t = 0.0;
            if (t > 1.0) t = 1.0;
        }
        dx = ax + t * ex - qx; dy = ay + t * ey - qy;
        if (sqrt(dx * dx + dy * dy) <= EPS) return true;
        if ((ay > qy) != (by > qy)) {
            if (qx < ax + (qy - ay) * ex / ey) inside = !inside;
        }
    }
    return inside;
}

bool on_road(double qx, double qy) {
    int i;
    if (!HAS_ROAD) return false;
    for (i = 0; i < NLANELET; i++) {
        if (in_lanelet(i, qx, qy)) return true;
    }
    return false;
}

// corners, edge midpoints and centre of the ego box must all be on the road
bool offroad() {
    const double SX[9] = {1.0, -1.0, -1.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0};
    const double SY[9] = {1.0, 1.0, -1.0, -1.0, 1.0, 0.0, -1.0, 0.0, 0.0};
    double c = cos(pth), s = sin(pth);
    int k;
    for (k = 0; k < 9; k++) {
        double lx = SX[k] * LEN / 2.0, ly = SY[k] * WID / 2.0;
        if (!on_road(px + lx * c - ly * s, py + lx * s + ly * c)) return true;
    }
    return false;
}

// equal circles spaced length/n along the box axis, against every obstacle cover
bool collide() {
    double seg = LEN / NCIRCLE;
    double r = 0.5 * sqrt(seg * seg + WID * WID);
    double c = cos(pth), s = sin(pth);
    int i, j, k, m;
    for (i = 0; i < NOBST_USED; i++) {
        double oc = cos(oth[i]), os = sin(oth[i]);
        double cx = ox[i] + OGEOM[i][3] * oc - OGEOM[i][4] * os;
        double cy = oy[i] + OGEOM[i][3] * os + OGEOM[i][4] * oc;
        double th = oth[i] + OGEOM[i][5];
        double olen = OGEOM[i][0], owid = OGEOM[i][1];
        double oseg = olen / NCIRCLE;
        double orad = 0.5 * sqrt(oseg * oseg + owid * owid);
        m = NCIRCLE;
        if (OKIND[i] == 1) { m = 1; orad = OGEOM[i][2]; }
        for (j = 0; j < NCIRCLE; j++) {
            double off = -LEN / 2.0 + seg * (j + 0.5);
            double ex = px + off * c, ey = py + off * s;
            for (k = 0; k < m; k++) {
                double ooff = 0.0, qx, qy;
                if (OKIND[i] == 0) ooff = -olen / 2.0 + oseg * (k + 0.5);
                qx = cx + ooff * cos(th); qy = cy + ooff * sin(th);
                if (sqrt((ex - qx) * (ex - qx) + (ey - qy) * (ey - qy)) - r - orad < MARGIN) return true;
            }
        }
    }
    return false;
}

bool goal() {
    double dx = px - GOAL_SHAPE[0], dy = py - GOAL_SHAPE[1];
    if (step < GOAL_T0 || step > GOAL_T1) return false;
    if (pth < GOAL_THETA[0] || pth > GOAL_THETA[1]) return false;
    if (pv < GOAL_V[0] || pv > GOAL_V[1]) return false;
    if (GOAL_KIND == 1) {
        double c = cos(GOAL_SHAPE[4]), s = sin(GOAL_SHAPE[4]);
        return fabs(dx * c + dy * s) <= GOAL_SHAPE[2] / 2.0 + EPS
            && fabs(-dx * s + dy * c) <= GOAL_SHAPE[3] / 2.0 + EPS;
    }
    if (GOAL_KIND == 2) return sqrt(dx * dx + dy * dy) <= GOAL_SHAPE[2] + EPS;
    if (GOAL_KIND == 3) {
        bool inside = false;
        int k;
        for (k = 0; k < GOAL_NPOLY; k++) {
            int k2 = (k + 1) % GOAL_NPOLY;
            double ay = GOAL_POLY[k][1], by = GOAL_POLY[k2][1];
            double ax = GOAL_POLY[k][0], bx = GOAL_POLY[k2][0];
            if ((ay > py) != (by > py) && px < ax + (py - ay) * (bx - ax) / (by - ay)) inside = !inside;
        }
        return inside;
    }
    return true;
}

// forward Euler over one period, velocity clamped to [0, VMAX]
void advance_obstacle(int i, double a) {
    double dt = PERIOD / SUBSTEPS;
    int k;
    for (k = 0; k < SUBSTEPS; k++) {
        ox[i] = ox[i] + ov[i] * cos(oth[i]) * dt;
        oy[i] = oy[i] + ov[i] * sin(oth[i]) * dt;
        ov[i] = ov[i] + a * dt;
        if (ov[i] < 0.0) ov[i] = 0.0;
        if (ov[i] > VMAX) ov[i] = VMAX;
    }
}

// choice encodes one move per reactive obstacle in base 3: maintain, brake, accelerate
void obstacles_step(int choice) {
    int i;
    for (i = 0; i < NOBST_USED; i++) {
        if (OREACT[i]) {
            int move = choice % 3;
            choice = choice / 3;
            advance_obstacle(i, move == 0 ? 0.0 : (move == 1 ? -A : A));
        } else {
            ox[i] = OPOSE[i][step][0]; oy[i] = OPOSE[i][step][1];
            oth[i] = OPOSE[i][step][2]; ov[i] = OPOSE[i][step][3];
        }
    }
}

void init_obstacles() {
    int i;
    for (i = 0; i < NOBST_USED; i++) {
        ox[i] = OPOSE[i][0][0]; oy[i] = OPOSE[i][0][1];
        oth[i] = OPOSE[i][0][2]; ov[i] = OPOSE[i][0][3];
    }
}
"""


# ---------------------------------------------------------------------------
# templates

def _cm() -> Template:
    locs = (Location("cm_l1", "L1", 0, 0, urgent=True),
            Location("cm_l2", "L2", 200, 0, urgent=True),
            Location("cm_l3", "L3", 100, 150, invariant="time <= PERIOD"),
            Location("cm_done", "Done", 300, 150))
    edges = (
        Edge("cm_l1", "cm_l2", controllable=False, sync="perceive!"),
        Edge("cm_l2", "cm_l3", controllable=True, sync="ego!", assignment="time = 0"),
        Edge("cm_l3", "cm_l1", controllable=False, guard="time == PERIOD && step < MAXT",
             sync="react!", assignment="step = step + 1"),
        Edge("cm_l3", "cm_done", controllable=False, guard="time == PERIOD && step == MAXT"),
    )
    return Template("CM", locs, "cm_l1", edges)


VD_ODE = "x' == v * cos(th) && y' == v * sin(th) && th' == yaw && v' == acc"


def _vd() -> Template:
    decl = "hybrid clock x = INIT[0], y = INIT[1], th = INIT[2], v = INIT[3];"
    locs = (Location("vd_init", "Start", 0, 0, urgent=True),
            Location("vd_drive", "Drive", 0, 150, invariant=VD_ODE))
    edges = (
        Edge("vd_init", "vd_drive", controllable=False, assignment="init_obstacles()"),
        Edge("vd_drive", "vd_drive", controllable=False, sync="perceive?",
             assignment="px = x, py = y, pth = th, pv = v"),
        Edge("vd_drive", "vd_drive", controllable=False, select="c : int[0, NCHOICE - 1]",
             sync="react?", assignment="obstacles_step(c)"),
    )
    return Template("VD", locs, "vd_init", edges, decl)


def _aa() -> Template:
    locs = (Location("aa_wait", "Wait", 0, 0),)
    edges = []
    for i, label in enumerate(ACTION_LABELS):
        edges.append(Edge("aa_wait", "aa_wait", controllable=True, sync="ego?",
                          assignment=f"acc = ACT_ACC[{i}], yaw = ACT_YAW[{i}], "
                                     f"reward = reward - 1.0 - 0.1 * fabs(ACT_ACC[{i}])   /* {label} */"))
    edges.append(Edge("aa_wait", "aa_wait", controllable=False, sync="perceive?",
                      assignment="reward = reward + (goal() ? 100.0 : 0.0)"))
    return Template("AA", locs, "aa_wait", tuple(edges))


def generate_model(sc: Scenario, p: DynamicsParams = DynamicsParams(), g: GridSpec = None) -> ModelDocument:
    """UPPAAL model for ``sc``; MAXT is the grid horizon."""
    g = g or GridSpec()
    decl = _declarations(sc, p, g)
    return ModelDocument(decl, (_cm(), _vd(), _aa()), "system " + ", ".join(TEMPLATE_NAMES) + ";",
                         generate_queries(sc, g.horizon).splitlines())


# ---------------------------------------------------------------------------
# structural checking

_ID_ARRAY = re.compile(r"const int (LANELET_ID|OBSTACLE_ID)\[\w+\] = \{([^}]*)\};")
_PLANNING = re.compile(r"const int PLANNING_ID = (-?\d+);")


def declared_ids(declarations: str) -> dict:
    """Entity ids listed in the id tables, by table name (placeholders dropped)."""
    out = {"LANELET_ID": [], "OBSTACLE_ID": [], "PLANNING_ID": []}
    for name, body in _ID_ARRAY.findall(declarations):
        out[name] += [int(v) for v in body.split(",") if v.strip() and int(v) >= 0]
    out["PLANNING_ID"] = [int(v) for v in _PLANNING.findall(declarations) if int(v) >= 0]
    return out


def check_model_xml(text: str, sc: Scenario = None) -> list:
    """Structural problems of an emitted model; empty when it is well formed.

    Checks the XML, the three templates, the system line, the nine
    controllable ``ego`` edges of AA and, given ``sc``, that every entity id
    appears exactly once in the id tables.
    """
    problems = []
    try:
        root = ET.fromstring(text.encode("utf-8"))
    except ET.ParseError as exc:
        return [f"not well-formed XML: {exc}"]
    if root.tag != "nta":
        return [f"root element is {root.tag!r}, expected 'nta'"]
    decl = root.find("declaration")
    if decl is None or not (decl.text or "").strip():
        problems.append("missing global declarations")
    names = [t.findtext("name") for t in root.findall("template")]
    if sorted(names) != sorted(TEMPLATE_NAMES):
        problems.append(f"templates {names}, expected {list(TEMPLATE_NAMES)}")
    system = root.findtext("system") or ""
    if not re.search(r"^\s*system\s+CM\s*,\s*VD\s*,\s*AA\s*;", system, re.M):
        problems.append("system line does not instantiate CM, VD, AA")
    for t in root.findall("template"):
        ids = {loc.get("id") for loc in t.findall("location")}
        init = t.find("init")
        if init is None or init.get("ref") not in ids:
            problems.append(f"template {t.findtext('name')}: init does not name a location")
        for tr in t.findall("transition"):
            for end in ("source", "target"):
                ref = tr.find(end)
                if ref is None or ref.get("ref") not in ids:
                    problems.append(f"template {t.findtext('name')}: dangling {end}")
        if t.findtext("name") == "AA":
            ctrl = [tr for tr in t.findall("transition") if tr.get("controllable") != "false"
                    and any(lab.get("kind") == "sync" and (lab.text or "").strip() == "ego?"
                            for lab in tr.findall("label"))]
            if len(ctrl) != 9:
                problems.append(f"AA has {len(ctrl)} controllable ego edges, expected 9")
    if sc is not None and decl is not None:
        ids = declared_ids(decl.text or "")
        for table, want in (("LANELET_ID", [ll.id for ll in sc.lanelets]),
                            ("OBSTACLE_ID", [o.id for o in sc.obstacles]),
                            ("PLANNING_ID", [pp.id for pp in sc.planning_problems[:1]])):
            got = ids[table]
            for i in want:
                if got.count(i) != 1:
                    problems.append(f"id {i} appears {got.count(i)} times in {table}")
            extra = sorted(set(got) - set(want))
            if extra:
                problems.append(f"{table} lists unknown ids {extra}")
    return problems


def write_uppaal(sc: Scenario, out_dir, stem: str, p: DynamicsParams = DynamicsParams(),
                 g: GridSpec = None) -> tuple:
    """Write ``stem.xml`` and ``stem.q``; returns both paths."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = generate_model(sc, p, g)
    model, query = out / f"{stem}.xml", out / f"{stem}.q"
    model.write_text(doc.to_xml(), encoding="utf-8")
    query.write_text("\n".join(doc.queries) + "\n", encoding="utf-8")
    return model, query


__all__ = ["ModelDocument", "Template", "Location", "Edge", "generate_model", "generate_queries",
           "check_model_xml", "declared_ids", "write_uppaal", "SAFE_QUERY", "EXISTS_QUERY", "VD_ODE"]
