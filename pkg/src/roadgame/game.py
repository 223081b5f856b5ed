"""Grid abstraction of the ego/environment game and its safety solution.

Abstract states are grid cells over (x, y, theta, v) paired with a time
step ``t`` in ``0..horizon``.  Cells are half-open intervals, except the
last cell of every dimension, which is closed; theta wraps around.

Two abstraction modes exist.  ``center`` steps each cell centre and checks
the drivability predicates there; it is cheap and used for statistics.
``corners`` is conservative: the successor set is every cell touched by
the exact one-period reach box of the whole cell (which contains all
stepped corners and the stepped centre), and a cell counts as bad when
any pose on a sub-cell lattice violates the predicates inflated by the
lattice's covering radius.  With ``corners`` every concrete state of a
winning cell stays winning under an allowed action, up to floating-point
rounding at cell edges.

``solve_safety`` computes the greatest fixpoint: by backward induction
over time layers for grid games, by Jacobi sweeps for explicit toy games.
"""

from __future__ import annotations

import base64
import bisect
import json
import math
import zlib
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .dynamics import N_ACTIONS, DynamicsParams, EgoAction, EgoState, actions as all_actions, integrate_batch
from .errors import GridTooCoarse, OutsideWinningRegion, SchemaError, Unrealizable
from .geometry import capsule_clearance_batch, cover_centers_batch, sample_points_batch
from .scenario import Scenario
from .world import World

STRATEGY_FORMAT = "roadgame.permissive/1"
TWO_PI = 2.0 * math.pi
ROUNDING = 1e-9   # relative widening of successor ranges


# ---------------------------------------------------------------------------
# grid

@dataclass(frozen=True)
class GridSpec:
    x_bounds: tuple = (0.0, 100.0)
    y_bounds: tuple = (-4.0, 4.0)
    v_bounds: tuple = (0.0, 15.0)
    nx: int = 40
    ny: int = 40
    ntheta: int = 8
    nv: int = 8
    horizon: int = 10
    # the lowest velocity gets a cell of its own, so a stopped car is an exact fixpoint
    rest_cell: bool = True
    # lattice spacing used by conservative bad marking
    sample_xy: float = 0.25
    sample_theta: float = 0.1
    raster: float = 0.05

    def __post_init__(self):
        for name in ("x_bounds", "y_bounds", "v_bounds"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"{name} must be finite and ordered, got {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))
        for name in ("nx", "ny", "ntheta", "nv", "horizon"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        for name in ("sample_xy", "sample_theta", "raster"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def for_scenario(cls, sc: Scenario, p: DynamicsParams, **overrides) -> "GridSpec":
        """Grid over the lanelet bounding box, velocities over [0, v_max]."""
        pts = [q for ll in sc.lanelets for q in ll.left_bound + ll.right_bound]
        kw = {}
        if pts:
            kw["x_bounds"] = (min(q.x for q in pts), max(q.x for q in pts))
            kw["y_bounds"] = (min(q.y for q in pts), max(q.y for q in pts))
        kw["v_bounds"] = (0.0, p.v_max)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny, self.ntheta, self.nv)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny * self.ntheta * self.nv

    @cached_property
    def edges(self) -> tuple:
        return (np.linspace(*self.x_bounds, self.nx + 1),
                np.linspace(*self.y_bounds, self.ny + 1),
                np.linspace(-math.pi, math.pi, self.ntheta + 1),
                self._v_edges())

    def _v_edges(self) -> np.ndarray:
        lo, hi = self.v_bounds
        if not self.rest_cell or self.nv < 2:
            return np.linspace(lo, hi, self.nv + 1)
        # [lo, next float) holds only lo itself; the rest of the range splits evenly
        return np.concatenate([[lo, np.nextafter(lo, math.inf)], np.linspace(lo, hi, self.nv)[1:]])

    @property
    def has_rest_cell(self) -> bool:
        return self.rest_cell and self.nv >= 2

    @cached_property
    def _edge_lists(self) -> tuple:
        return tuple(e.tolist() for e in self.edges)

    def centers(self, dim: int) -> np.ndarray:
        e = self.edges[dim]
        return (e[:-1] + e[1:]) / 2.0

    def cell_of(self, x: float, y: float, theta: float, v: float) -> Optional[tuple]:
        """Cell containing the point, or ``None`` outside the grid."""
        out = []
        for e, val in zip(self._edge_lists, (x, y, theta, v)):
            if not e[0] <= val <= e[-1]:
                return None
            i = bisect.bisect_right(e, val) - 1
            out.append(min(i, len(e) - 2))
        return tuple(out)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("x_bounds", "y_bounds", "v_bounds"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def cell_index(edges: np.ndarray, values, upper: bool = False) -> np.ndarray:
    """Vectorized cell lookup.

    Returns -1 below the grid and ``n`` above it.  With ``upper=True`` the
    value is an exclusive upper bound, so a value on an edge maps to the
    lower cell.
    """
    n = len(edges) - 1
    values = np.asarray(values, dtype=float)
    if upper:
        idx = np.searchsorted(edges, values, side="left") - 1
    else:
        idx = np.searchsorted(edges, values, side="right") - 1
        idx = np.where(values == edges[-1], n - 1, idx)
    return idx


def wrap_angle(a):
    """Vectorized map to (-pi, pi]."""
    a = np.remainder(np.asarray(a, dtype=float) + math.pi, TWO_PI) - math.pi
    return np.where(a <= -math.pi, a + TWO_PI, a)


# ---------------------------------------------------------------------------
# successor boxes

def _ramp(v, accel, k, dt, vmax):
    return np.clip(v + k * accel * dt, 0.0, vmax)


def _offset_vertices(v0: float, v1: float, act: EgoAction, p: DynamicsParams) -> np.ndarray:
    """Vertices of the polyline traced by the body-frame displacement d(v), v in [v0, v1].

    Within one period the speed at sub-step k is clamp(v + k*a*dt), which is
    piecewise linear in v; d(v) is therefore piecewise linear with kinks
    where some sub-step speed meets a clamp.
    """
    m = p.substeps
    dt = p.period / m
    a = act.accel_cmd
    cand = {v0, v1}
    for k in range(1, m):
        for b in (-k * a * dt, p.v_max - k * a * dt):
            if v0 < b < v1:
                cand.add(b)
    vs = np.array(sorted(cand))
    k = np.arange(m)
    speeds = _ramp(vs[:, None], a, k[None, :], dt, p.v_max)
    ang = k * act.yaw_cmd * dt
    return np.stack([(speeds * np.cos(ang)).sum(1) * dt, (speeds * np.sin(ang)).sum(1) * dt], axis=-1)


def _arc_range(r, phi, th0, th1):
    """Ranges of r*cos(psi), r*sin(psi) for psi in [phi+th0, phi+th1]."""
    lo, hi = phi + th0, phi + th1

    def hits(alpha):
        return np.ceil((lo - alpha) / TWO_PI) <= np.floor((hi - alpha) / TWO_PI)

    cx = np.stack([np.cos(lo), np.cos(hi)]) * r
    sy = np.stack([np.sin(lo), np.sin(hi)]) * r
    xmin = np.where(hits(math.pi), -r, cx.min(0))
    xmax = np.where(hits(0.0), r, cx.max(0))
    ymin = np.where(hits(-math.pi / 2), -r, sy.min(0))
    ymax = np.where(hits(math.pi / 2), r, sy.max(0))
    return xmin, xmax, ymin, ymax


def displacement_bounds(g: GridSpec, p: DynamicsParams, acts) -> tuple:
    """Bounds of the one-period position change, per (theta cell, v cell, action)."""
    th_e = g.edges[2]
    v_e = g.edges[3]
    shape = (g.ntheta, g.nv, len(acts))
    out = [np.empty(shape) for _ in range(4)]
    for ai, act in enumerate(acts):
        for iv in range(g.nv):
            # the rest cell holds v = v0 alone
            v1 = v_e[iv] if iv == 0 and g.has_rest_cell else v_e[iv + 1]
            verts = _offset_vertices(v_e[iv], v1, act, p)
            r = np.hypot(verts[:, 0], verts[:, 1])[None, :]
            phi = np.arctan2(verts[:, 1], verts[:, 0])[None, :]
            xmin, xmax, ymin, ymax = _arc_range(r, phi, th_e[:-1, None], th_e[1:, None])
            out[0][:, iv, ai] = xmin.min(1)
            out[1][:, iv, ai] = xmax.max(1)
            out[2][:, iv, ai] = ymin.min(1)
            out[3][:, iv, ai] = ymax.max(1)
    return tuple(out)


def _tol(edges) -> float:
    """Widening that absorbs rounding in the sub-stepped integration."""
    return ROUNDING * max(1.0, float(np.abs(edges).max()))


def _range(edges, lo, hi, hi_inclusive, tol=0.0):
    """Cell index ranges for value ranges; ``escape`` is decided before widening by ``tol``."""
    n = len(edges) - 1
    escape = (cell_index(edges, lo) < 0) | (cell_index(edges, hi) > n - 1)
    ilo = cell_index(edges, lo - tol)
    ihi = np.where(hi_inclusive, cell_index(edges, hi + tol), cell_index(edges, hi + tol, upper=True))
    return np.clip(ilo, 0, n - 1), np.clip(ihi, 0, n - 1), escape


@dataclass(eq=False)
class Boxes:
    """Successor cell ranges, factorized by the dimensions each depends on.

    x: (nx, ntheta, nv, A); y: (ny, ntheta, nv, A); theta: (ntheta, A) as a
    start cell plus a cyclic count; v: (nv, A).  ``escape`` marks ranges
    that leave the grid.
    """
    x_lo: np.ndarray
    x_hi: np.ndarray
    x_esc: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    y_esc: np.ndarray
    t_lo: np.ndarray
    t_cnt: np.ndarray
    v_lo: np.ndarray
    v_hi: np.ndarray
    v_esc: np.ndarray

    def escape(self) -> np.ndarray:
        return (self.x_esc[:, None, :, :, :] | self.y_esc[None, :, :, :, :]
                | self.v_esc[None, None, None, :, :])


def _theta_range(g: GridSpec, lo, hi, hi_inclusive, tol):
    e = g.edges[2]
    n = g.ntheta
    # a lower bound is inclusive, so it wraps into [-pi, pi)
    lw = np.remainder(np.asarray(lo - tol, dtype=float) + math.pi, TWO_PI) - math.pi
    ilo = np.clip(cell_index(e, lw), 0, n - 1)
    hw = wrap_angle(hi + tol)
    ihi = np.clip(np.where(hi_inclusive, cell_index(e, hw), cell_index(e, hw, upper=True)), 0, n - 1)
    cnt = np.mod(ihi - ilo, n) + 1
    return ilo, cnt


def _corner_boxes(g: GridSpec, p: DynamicsParams, acts) -> Boxes:
    """Exact one-period reach boxes, widened only where the integrator rounds.

    Speed changes by a nonzero command and heading changes by a nonzero
    yaw accumulate rounding over the sub-steps; clamped speeds, unchanged
    headings and a car at rest that does not accelerate are computed exactly
    and are not widened, so the rest state stays an exact fixpoint.
    """
    dxmin, dxmax, dymin, dymax = displacement_bounds(g, p, acts)
    xe, ye, te, ve = g.edges
    accel = np.array([a.accel_cmd for a in acts])
    yaw = np.array([a.yaw_cmd for a in acts])
    rest = (np.arange(g.nv) == 0) & g.has_rest_cell
    still = rest[:, None] & (accel <= 0)[None, :]                       # (nv, A)

    def pos_range(e, n, dmin, dmax):
        last = (np.arange(n) == n - 1)[:, None, None, None]
        tol = np.where(still, 0.0, _tol(e))[None, None]
        return _range(e, e[:-1, None, None, None] + dmin[None], e[1:, None, None, None] + dmax[None],
                      last, tol)

    x_lo, x_hi, x_esc = pos_range(xe, g.nx, dxmin, dxmax)
    y_lo, y_hi, y_esc = pos_range(ye, g.ny, dymin, dymax)

    turn = (yaw * p.period)[None, :]
    last_t = (np.arange(g.ntheta) == g.ntheta - 1)[:, None]
    t_tol = np.where(yaw != 0, _tol(te), 0.0)[None, :]
    t_lo, t_cnt = _theta_range(g, te[:-1, None] + turn, te[1:, None] + turn, last_t, t_tol)

    v_tol = np.where(accel != 0, _tol(ve), 0.0)[None, :]
    dv = (accel * p.period)[None, :]
    vlo_raw = ve[:-1, None] + dv - v_tol
    vhi_raw = np.where(rest, ve[:-1], ve[1:])[:, None] + dv + v_tol
    vlo = np.clip(vlo_raw, 0.0, p.v_max)
    vhi = np.clip(vhi_raw, 0.0, p.v_max)
    clamped = (vhi_raw >= p.v_max) | (vhi_raw <= 0.0)
    last_v = (np.arange(g.nv) == g.nv - 1)[:, None]
    # the rest cell is a single point, so its image is a closed point too
    v_lo, v_hi, v_esc = _range(ve, vlo, vhi, last_v | clamped | rest[:, None])
    return Boxes(x_lo, x_hi, x_esc, y_lo, y_hi, y_esc, t_lo, t_cnt, v_lo, v_hi, v_esc)


def _stepped_centers(g: GridSpec, p: DynamicsParams, acts):
    """Stepped cell centres, factorized: x' (nx, nth, nv, A), y' (ny, ...), theta' (nth, A), v' (nv, A)."""
    tc = g.centers(2)[:, None, None]
    vc = g.centers(3)[None, :, None]
    acc = np.array([a.accel_cmd for a in acts])[None, None, :]
    yaw = np.array([a.yaw_cmd for a in acts])[None, None, :]
    dx, dy, th, v = integrate_batch(0.0, 0.0, tc, vc, acc, yaw, p)
    xs = g.centers(0)[:, None, None, None] + dx[None]
    ys = g.centers(1)[:, None, None, None] + dy[None]
    return xs, ys, th[:, 0, :], v[0, :, :]


def _center_boxes(g: GridSpec, p: DynamicsParams, acts) -> Boxes:
    xs, ys, th, v = _stepped_centers(g, p, acts)
    x_lo, x_hi, x_esc = _range(g.edges[0], xs, xs, True)
    y_lo, y_hi, y_esc = _range(g.edges[1], ys, ys, True)
    t_lo = np.clip(cell_index(g.edges[2], th), 0, g.ntheta - 1)
    v_lo, v_hi, v_esc = _range(g.edges[3], v, v, True)
    return Boxes(x_lo, x_hi, x_esc, y_lo, y_hi, y_esc, t_lo, np.ones_like(t_lo), v_lo, v_hi, v_esc)


def _check_coverage(g: GridSpec, p: DynamicsParams, acts, world: World):
    """GridTooCoarse if a stepped centre leaves the grid while still on the road."""
    xs, ys, _, v = _stepped_centers(g, p, acts)
    xlo, xhi = g.x_bounds
    ylo, yhi = g.y_bounds
    if ((v < g.v_bounds[0]) | (v > g.v_bounds[1])).any():
        raise GridTooCoarse("stepped velocity leaves the velocity bounds")
    tol = 1e-9 * max(1.0, abs(xlo), abs(xhi), abs(ylo), abs(yhi))
    out_x = (xs < xlo - tol) | (xs > xhi + tol)
    out_y = (ys < ylo - tol) | (ys > yhi + tol)
    X = np.broadcast_to(xs[:, None], (g.nx, g.ny) + xs.shape[1:])
    Y = np.broadcast_to(ys[None, :], (g.nx, g.ny) + ys.shape[1:])
    out = out_x[:, None] | out_y[None, :]
    if not out.any():
        return
    pts = np.stack([X[out], Y[out]], axis=-1)
    on = world.road.contains_batch(pts)
    if on.any():
        k = int(np.flatnonzero(on)[0])
        raise GridTooCoarse(f"stepped state ({pts[k, 0]:.3f}, {pts[k, 1]:.3f}) is on the road "
                            "but outside the grid; enlarge the grid bounds")


# ---------------------------------------------------------------------------
# bad marking

def _pool(arr: np.ndarray, axis: int, s: int, cyclic: bool = False) -> np.ndarray:
    """Per cell, OR over the closed window of ``s + 1`` lattice points along ``axis``."""
    arr = np.moveaxis(arr, axis, 0)
    if cyclic:
        n = arr.shape[0] // s
        body = arr.reshape((n, s) + arr.shape[1:]).any(axis=1)
        out = body | np.roll(arr[::s], -1, axis=0)
    else:
        n = (arr.shape[0] - 1) // s
        body = arr[:-1].reshape((n, s) + arr.shape[1:]).any(axis=1)
        out = body | arr[s::s]
    return np.moveaxis(out, 0, axis)


class _Lattice:
    def __init__(self, g: GridSpec, p: DynamicsParams):
        wx = (g.x_bounds[1] - g.x_bounds[0]) / g.nx
        wy = (g.y_bounds[1] - g.y_bounds[0]) / g.ny
        wt = TWO_PI / g.ntheta
        self.sx = max(1, math.ceil(wx / g.sample_xy))
        self.sy = max(1, math.ceil(wy / g.sample_xy))
        self.st = max(1, math.ceil(wt / g.sample_theta))
        self.xs = np.linspace(*g.x_bounds, g.nx * self.sx + 1)
        self.ys = np.linspace(*g.y_bounds, g.ny * self.sy + 1)
        self.ts = np.linspace(-math.pi, math.pi, g.ntheta * self.st + 1)[:-1]
        hx, hy, ht = wx / self.sx, wy / self.sy, wt / self.st
        self.rho_xy = 0.5 * math.hypot(hx, hy)
        self.turn = 2.0 * math.sin(ht / 4.0)  # chord per unit radius for half a lattice step

    def pool(self, lat: np.ndarray) -> np.ndarray:
        """(X, Y, T) lattice flags to (nx, ny, ntheta) cell flags."""
        out = _pool(lat, 0, self.sx)
        out = _pool(out, 1, self.sy)
        return _pool(out, 2, self.st, cyclic=True)


def _offroad_lattice(g: GridSpec, p: DynamicsParams, world: World, lat: _Lattice) -> np.ndarray:
    radius = 0.5 * math.hypot(p.length, p.width)
    need = lat.rho_xy + radius * lat.turn
    res = g.raster
    pad = radius + need + res
    x0, y0 = g.x_bounds[0] - pad, g.y_bounds[0] - pad
    nrx = int(math.ceil((g.x_bounds[1] + pad - x0) / res))
    nry = int(math.ceil((g.y_bounds[1] + pad - y0) / res))
    cx = x0 + (np.arange(nrx) + 0.5) * res
    cy = y0 + (np.arange(nry) + 0.5) * res
    grid_pts = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1)
    clearance = world.road.clearance_batch(grid_pts)
    deep = clearance >= need + res / math.sqrt(2.0)

    X, Y = np.meshgrid(lat.xs, lat.ys, indexing="ij")
    out = np.empty((len(lat.xs), len(lat.ys), len(lat.ts)), dtype=bool)
    for k, th in enumerate(lat.ts):
        pts = sample_points_batch(X, Y, th, p.length, p.width)
        ix = np.floor((pts[..., 0] - x0) / res).astype(np.int64)
        iy = np.floor((pts[..., 1] - y0) / res).astype(np.int64)
        valid = (ix >= 0) & (ix < nrx) & (iy >= 0) & (iy < nry)
        ok = np.zeros(ix.shape, dtype=bool)
        ok[valid] = deep[ix[valid], iy[valid]]
        out[:, :, k] = ~ok.all(axis=-1)
    return out


def _collide_lattice(g: GridSpec, p: DynamicsParams, caps, lat: _Lattice) -> np.ndarray:
    n = p.circle_count
    seg = p.length / n
    reach = p.length / 2.0 - seg / 2.0
    need = p.margin + lat.rho_xy + reach * lat.turn
    X, Y = np.meshgrid(lat.xs, lat.ys, indexing="ij")
    out = np.zeros((len(lat.xs), len(lat.ys), len(lat.ts)), dtype=bool)
    if not caps:
        return out
    for k, th in enumerate(lat.ts):
        centers, r = cover_centers_batch(X, Y, np.full(X.shape, th), p.length, p.width, n)
        out[:, :, k] = capsule_clearance_batch(centers, r, caps) < need
    return out


def _center_bad(g: GridSpec, p: DynamicsParams, world: World, hazards) -> np.ndarray:
    X, Y, T = np.meshgrid(g.centers(0), g.centers(1), g.centers(2), indexing="ij")
    off = ~world.road.contains_batch(sample_points_batch(X, Y, T, p.length, p.width)).all(axis=-1)
    centers, r = cover_centers_batch(X, Y, T, p.length, p.width, p.circle_count)
    layers = []
    for caps in hazards:
        hit = capsule_clearance_batch(centers, r, caps) < p.margin if caps else np.zeros_like(off)
        layers.append(off | hit)
    return np.stack(layers)


def _goal_marks(sc: Scenario, g: GridSpec) -> np.ndarray:
    from .learning import goal_batch

    out = np.zeros((g.horizon + 1,) + g.shape, dtype=bool)
    if not sc.planning_problems:
        return out
    X, Y, T, V = np.meshgrid(*(g.centers(d) for d in range(4)), indexing="ij")
    for t in range(g.horizon + 1):
        out[t] = goal_batch(sc.planning_problems[0].goal, X, Y, T, V, t)
    return out


# ---------------------------------------------------------------------------
# games

@dataclass(eq=False)
class GridGame:
    grid: GridSpec
    params: DynamicsParams
    mode: str
    actions: tuple            # action indices available to the ego
    bad: np.ndarray           # (horizon + 1, nx, ny, ntheta, nv) bool
    goal: np.ndarray          # same shape
    boxes: Boxes
    initial: Optional[tuple] = None   # (t, ix, iy, itheta, iv) of the planning problem

    @property
    def n_states(self) -> int:
        return (self.grid.horizon + 1) * self.grid.n_cells

    def successors(self, cell: tuple, t: int, a: int):
        """Successor states of ``(cell, t)`` under action ``a`` (an index into ``actions``).

        Returns ``(states, escaped)``; ``escaped`` means some successor is
        outside the grid.
        """
        if t >= self.grid.horizon:
            return [], False
        b = self.boxes
        ix, iy, it, iv = cell
        esc = bool(b.x_esc[ix, it, iv, a] or b.y_esc[iy, it, iv, a] or b.v_esc[iv, a])
        xs = range(b.x_lo[ix, it, iv, a], b.x_hi[ix, it, iv, a] + 1)
        ys = range(b.y_lo[iy, it, iv, a], b.y_hi[iy, it, iv, a] + 1)
        ts = [(b.t_lo[it, a] + k) % self.grid.ntheta for k in range(b.t_cnt[it, a])]
        vs = range(b.v_lo[iv, a], b.v_hi[iv, a] + 1)
        out = [((x, y, th, v), t + 1) for x in xs for y in ys for th in ts for v in vs]
        return out, esc


@dataclass(eq=False)
class ExplicitGame:
    """Small game given by explicit successor lists: ``succ[s][a]`` is a list of states."""
    succ: list
    bad: np.ndarray
    initial: Optional[int] = None

    @property
    def n_states(self) -> int:
        return len(self.succ)


def build_game(sc: Scenario, g: GridSpec, p: DynamicsParams, mode: str = "corners",
               action_indices=None) -> GridGame:
    if mode not in ("center", "corners"):
        raise ValueError(f"unknown abstraction mode {mode!r}")
    if abs(g.v_bounds[0]) > 1e-12 or abs(g.v_bounds[1] - p.v_max) > 1e-12:
        raise ValueError("velocity bounds of the grid must be [0, v_max]")
    idx = tuple(range(N_ACTIONS)) if action_indices is None else tuple(sorted(set(action_indices)))
    acts = [all_actions(p)[i] for i in idx]
    world = World(sc, p)
    _check_coverage(g, p, acts, world)

    hazards = world.hazards(g.horizon)
    if mode == "center":
        boxes = _center_boxes(g, p, acts)
        bad3 = _center_bad(g, p, world, hazards)
    else:
        boxes = _corner_boxes(g, p, acts)
        lat = _Lattice(g, p)
        off = lat.pool(_offroad_lattice(g, p, world, lat))
        bad3 = np.stack([off | lat.pool(_collide_lattice(g, p, caps, lat)) for caps in hazards])
    bad = np.repeat(bad3[..., None], g.nv, axis=-1)

    initial = None
    if sc.planning_problems:
        s0 = world.initial_ego()
        cell = g.cell_of(s0.x, s0.y, s0.theta, s0.v)
        if cell is not None:
            initial = (0,) + cell
    return GridGame(g, p, mode, idx, bad, _goal_marks(sc, g), boxes, initial)


# ---------------------------------------------------------------------------
# solving

@dataclass(eq=False)
class PermissiveStrategy:
    """Allowed-action bitmask per abstract state; zero means losing.

    Bit ``i`` of a mask stands for ego action index ``i``.
    """
    masks: np.ndarray
    grid: Optional[GridSpec] = None
    params: Optional[DynamicsParams] = None
    mode: str = "explicit"
    actions: tuple = tuple(range(N_ACTIONS))
    iterations: int = 0
    initial: Optional[tuple] = None

    @property
    def winning(self) -> np.ndarray:
        return self.masks != 0

    def allowed(self, key) -> list:
        m = int(self.masks[key])
        return [i for i in range(16) if m >> i & 1]


def _bits(indices) -> np.ndarray:
    return np.array([1 << i for i in indices], dtype=np.uint16)


class _BoxQuery:
    """Counts losing cells inside every successor box.

    Two stages of prefix sums: first over the (theta, v) window, which only
    depends on (theta cell, v cell, action) and so is a block copy of whole
    (x, y) planes; then a 2-D box query over (x, y) with precomputed flat
    indices.  Arrays are laid out (theta, v, action, x, y).
    """

    def __init__(self, gg: GridGame):
        b = gg.boxes
        nx, ny, nt, nv = gg.grid.shape
        nA = len(gg.actions)
        self.dims = (nx, ny, nt, nv, nA)
        self.t0 = b.t_lo[:, None, :]
        self.t1 = (b.t_lo + b.t_cnt)[:, None, :]
        self.v0 = b.v_lo[None]
        self.v1 = (b.v_hi + 1)[None]
        x0 = np.moveaxis(b.x_lo, 0, -1)          # (nt, nv, A, nx)
        x1 = np.moveaxis(b.x_hi + 1, 0, -1)
        y0 = np.moveaxis(b.y_lo, 0, -1)          # (nt, nv, A, ny)
        y1 = np.moveaxis(b.y_hi + 1, 0, -1)
        plane = (nx + 1) * (ny + 1)
        itype = np.int32 if nt * nv * nA * plane < 2 ** 31 else np.int64
        base = (np.arange(nt * nv * nA, dtype=itype) * plane).reshape(nt, nv, nA)[..., None, None]

        def flat(xs, ys):
            return base + xs.astype(itype)[..., :, None] * (ny + 1) + ys.astype(itype)[..., None, :]

        self.corners = (flat(x1, y1), flat(x0, y1), flat(x1, y0), flat(x0, y0))
        self.escape = b.escape()

    def ok(self, winning_next: np.ndarray) -> np.ndarray:
        nx, ny, nt, nv, nA = self.dims
        losing = np.ascontiguousarray(np.transpose(~winning_next, (2, 3, 0, 1))).astype(np.int32)
        losing = np.concatenate([losing, losing], axis=0)  # unrolled theta for cyclic ranges
        P = np.zeros((2 * nt + 1, nv + 1, nx, ny), dtype=np.int32)
        P[1:, 1:] = losing.cumsum(0).cumsum(1)
        Q = P[self.t1, self.v1] - P[self.t0, self.v1] - P[self.t1, self.v0] + P[self.t0, self.v0]
        S = np.zeros((nt, nv, nA, nx + 1, ny + 1), dtype=np.int32)
        S[..., 1:, 1:] = Q.cumsum(3).cumsum(4)
        S = S.ravel()
        c11, c01, c10, c00 = self.corners
        total = S[c11] - S[c01] - S[c10] + S[c00]
        return (np.transpose(total, (3, 4, 0, 1, 2)) == 0) & ~self.escape


def _solve_grid(gg: GridGame) -> PermissiveStrategy:
    """Backward induction over the time layers.

    Every move goes from layer t to t + 1, so one pass from the last layer
    down yields the greatest fixpoint exactly.
    """
    H = gg.grid.horizon
    q = _BoxQuery(gg)
    W = [None] * (H + 1)
    ok = [None] * H
    W[H] = ~gg.bad[H]
    for t in range(H - 1, -1, -1):
        ok[t] = q.ok(W[t + 1])
        W[t] = ~gg.bad[t] & ok[t].any(axis=-1)
    sweeps = H
    bits = _bits(gg.actions)
    masks = np.zeros((H + 1,) + gg.grid.shape, dtype=np.uint16)
    for t in range(H):
        masks[t] = np.where(W[t][..., None] & ok[t], bits, 0).sum(axis=-1, dtype=np.uint16)
    masks[H] = np.where(W[H], bits.sum(dtype=np.uint16), 0)
    return PermissiveStrategy(masks, gg.grid, gg.params, gg.mode, gg.actions, sweeps, gg.initial)


def _solve_explicit(gg: ExplicitGame) -> PermissiveStrategy:
    n = gg.n_states
    pair_state, pair_action, ptr, flat = [], [], [0], []
    for s, per_action in enumerate(gg.succ):
        for a, targets in enumerate(per_action):
            pair_state.append(s)
            pair_action.append(a)
            flat.extend(targets)
            ptr.append(len(flat))
    pair_state = np.array(pair_state, dtype=np.int64)
    pair_action = np.array(pair_action, dtype=np.int64)
    ptr = np.array(ptr, dtype=np.int64)
    flat = np.array(flat, dtype=np.int64)
    counts = np.diff(ptr)
    owner = np.repeat(np.arange(len(counts)), counts)

    W = ~np.asarray(gg.bad, dtype=bool)
    sweeps = 0
    while True:
        sweeps += 1
        losing = np.zeros(len(counts), dtype=np.int64)
        np.add.at(losing, owner, (~W[flat]).astype(np.int64))
        pair_ok = losing == 0
        has_ok = np.zeros(n, dtype=bool)
        has_ok[pair_state[pair_ok]] = True
        new = W & has_ok
        if np.array_equal(new, W):
            break
        W = new
    masks = np.zeros(n, dtype=np.uint16)
    sel = pair_ok & W[pair_state]
    np.bitwise_or.at(masks, pair_state[sel], (1 << pair_action[sel]).astype(np.uint16))
    n_act = max((len(x) for x in gg.succ), default=0)
    return PermissiveStrategy(masks, actions=tuple(range(n_act)), iterations=sweeps,
                              initial=gg.initial)


def solve_safety(gg, require_initial: bool = True) -> PermissiveStrategy:
    """Greatest fixpoint of the safety game; raises Unrealizable if the start is losing."""
    ps = _solve_grid(gg) if isinstance(gg, GridGame) else _solve_explicit(gg)
    if require_initial:
        if isinstance(gg, GridGame):
            if gg.initial is None:
                raise Unrealizable("no safe path: initial state lies outside the grid")
            if ps.masks[gg.initial] == 0:
                raise Unrealizable("no safe path: initial state is not in the winning region")
        elif gg.initial is not None and ps.masks[gg.initial] == 0:
            raise Unrealizable("no safe path: initial state is not in the winning region")
        elif gg.initial is None and not ps.winning.any():
            raise Unrealizable("no safe path: winning region is empty")
    return ps


def shield_indices(ps: PermissiveStrategy, s: EgoState) -> tuple:
    g = ps.grid
    if g is None:
        raise OutsideWinningRegion("strategy has no grid")
    cell = g.cell_of(s.x, s.y, s.theta, s.v)
    if cell is None or not 0 <= s.t <= g.horizon:
        raise OutsideWinningRegion(f"state outside the grid: {s}")
    m = int(ps.masks[(int(s.t),) + cell])
    if m == 0:
        raise OutsideWinningRegion(f"cell {cell} at t={s.t} is not winning")
    return tuple(i for i in range(N_ACTIONS) if m >> i & 1)


def shield(ps: PermissiveStrategy, s: EgoState) -> frozenset:
    """Actions the permissive strategy allows in the cell containing ``s``."""
    acts = all_actions(ps.params or DynamicsParams())
    return frozenset(acts[i] for i in shield_indices(ps, s))


# ---------------------------------------------------------------------------
# persistence

def strategy_to_json(ps: PermissiveStrategy) -> str:
    raw = np.ascontiguousarray(ps.masks, dtype="<u2").tobytes()
    doc = {
        "format": STRATEGY_FORMAT,
        "mode": ps.mode,
        "actions": list(ps.actions),
        "iterations": ps.iterations,
        "initial": list(ps.initial) if ps.initial is not None else None,
        "grid": ps.grid.to_dict() if ps.grid is not None else None,
        "params": asdict(ps.params) if ps.params is not None else None,
        "shape": list(ps.masks.shape),
        "masks": base64.b64encode(zlib.compress(raw, 9)).decode("ascii"),
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def strategy_from_json(text: str) -> PermissiveStrategy:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("/", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("/", "expected an object")
    if doc.get("format") != STRATEGY_FORMAT:
        raise SchemaError("/format", f"expected {STRATEGY_FORMAT!r}")
    for key in ("shape", "masks", "actions"):
        if key not in doc:
            raise SchemaError(f"/{key}", "missing")
    try:
        raw = zlib.decompress(base64.b64decode(doc["masks"]))
        masks = np.frombuffer(raw, dtype="<u2").astype(np.uint16).reshape(doc["shape"])
    except Exception as exc:
        raise SchemaError("/masks", f"cannot decode: {exc}") from None
    try:
        grid = GridSpec.from_dict(doc["grid"]) if doc.get("grid") else None
    except (TypeError, ValueError) as exc:
        raise SchemaError("/grid", str(exc)) from None
    try:
        params = DynamicsParams(**doc["params"]) if doc.get("params") else None
    except (TypeError, ValueError) as exc:
        raise SchemaError("/params", str(exc)) from None
    if grid is not None and masks.shape != (grid.horizon + 1,) + grid.shape:
        raise SchemaError("/shape", "does not match the grid")
    initial = tuple(doc["initial"]) if doc.get("initial") is not None else None
    return PermissiveStrategy(masks, grid, params, doc.get("mode", "explicit"),
                              tuple(doc["actions"]), int(doc.get("iterations", 0)), initial)


def save_permissive(ps: PermissiveStrategy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(strategy_to_json(ps))


def load_permissive(path) -> PermissiveStrategy:
    with open(path, encoding="utf-8") as fh:
        return strategy_from_json(fh.read())
