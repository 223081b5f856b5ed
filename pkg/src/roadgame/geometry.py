"""Vehicle occupancy and the two drivability predicates.

``collide`` approximates each vehicle by a row of circles along its main
axis and compares centre distances against a safety margin.  ``offroad``
tests nine sample points of the vehicle box (corners, edge midpoints and
centre) against the lanelet polygons; boundary points count as on-road.

Scalar functions work on the dataclasses below; the ``*_batch`` variants
take numpy arrays and are used when whole grids of states are evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .scenario import Circle, Lanelet, Point2, Polygon, Rectangle, StateRecord

BOUNDARY_EPS = 1e-9


@dataclass(frozen=True)
class OrientedBox:
    center: Point2
    length: float
    width: float
    orientation: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError(f"box dimensions must be positive, got {self.length}x{self.width}")


@dataclass(frozen=True, eq=False)
class CircleCover:
    centers: np.ndarray  # (count, 2)
    radius: float

    @property
    def count(self) -> int:
        return len(self.centers)


@dataclass(frozen=True, eq=False)
class LaneletPolygon:
    lanelet_id: int
    ring: np.ndarray  # (m, 2), counter-clockwise, not closed

    @property
    def bbox(self):
        return (*self.ring.min(axis=0), *self.ring.max(axis=0))


def _rotate(lx, ly, c, s):
    return lx * c - ly * s, lx * s + ly * c


def box_corners(b: OrientedBox) -> list:
    """Corners in counter-clockwise order, starting front-left of the heading."""
    c, s = math.cos(b.orientation), math.sin(b.orientation)
    hl, hw = b.length / 2.0, b.width / 2.0
    out = []
    for lx, ly in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        dx, dy = _rotate(lx, ly, c, s)
        out.append(Point2(b.center.x + dx, b.center.y + dy))
    return out


def default_circle_count(length: float, width: float) -> int:
    return max(1, math.ceil(length / width))


def circle_cover(b: OrientedBox, n: Optional[int] = None) -> CircleCover:
    """Cover ``b`` with ``n`` equal circles spaced ``length/n`` along its axis."""
    if n is None:
        n = default_circle_count(b.length, b.width)
    if n < 1:
        raise ValueError("circle count must be >= 1")
    seg = b.length / n
    radius = 0.5 * math.hypot(seg, b.width)
    offsets = -b.length / 2.0 + seg * (np.arange(n) + 0.5)
    c, s = math.cos(b.orientation), math.sin(b.orientation)
    centers = np.column_stack([b.center.x + offsets * c, b.center.y + offsets * s])
    return CircleCover(centers, radius)


def min_circle_distance(a: CircleCover, b: CircleCover) -> float:
    """Smallest gap between the two covers; negative when they overlap."""
    d = np.linalg.norm(a.centers[:, None, :] - b.centers[None, :, :], axis=-1)
    return float(d.min() - a.radius - b.radius)


def collide(ego: OrientedBox, others: Sequence, margin: float, n: Optional[int] = None) -> bool:
    """True iff some obstacle cover comes closer than ``margin`` to the ego cover.

    ``others`` may hold ``OrientedBox`` or ready-made ``CircleCover`` items.
    """
    if margin < 0:
        raise ValueError("margin must be non-negative")
    mine = circle_cover(ego, n)
    for other in others:
        cover = other if isinstance(other, CircleCover) else circle_cover(other, n)
        if min_circle_distance(mine, cover) < margin:
            return True
    return False


# ---------------------------------------------------------------------------
# road membership

def lanelet_polygon(ll: Lanelet) -> LaneletPolygon:
    pts = [(p.x, p.y) for p in ll.left_bound] + [(p.x, p.y) for p in reversed(ll.right_bound)]
    ring = np.asarray(pts, dtype=float)
    x, y = ring[:, 0], ring[:, 1]
    area2 = float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    if area2 < 0:
        ring = ring[::-1].copy()
    return LaneletPolygon(ll.id, ring)


def road_polygons(lanelets) -> list:
    return [lanelet_polygon(ll) for ll in lanelets]


def _in_ring(px: float, py: float, ring) -> bool:
    inside = False
    n = len(ring)
    for i in range(n):
        ax, ay = ring[i]
        bx, by = ring[(i + 1) % n]
        # boundary test first: closed polygon
        ex, ey = bx - ax, by - ay
        ll = ex * ex + ey * ey
        if ll > 0:
            t = ((px - ax) * ex + (py - ay) * ey) / ll
            t = 0.0 if t < 0 else 1.0 if t > 1 else t
            if math.hypot(ax + t * ex - px, ay + t * ey - py) <= BOUNDARY_EPS:
                return True
        elif math.hypot(ax - px, ay - py) <= BOUNDARY_EPS:
            return True
        if (ay > py) != (by > py):
            xi = ax + (py - ay) * ex / ey
            if px < xi:
                inside = not inside
    return inside


class Road:
    """Union of lanelet polygons with fast scalar and batched membership."""

    def __init__(self, polygons):
        self.polygons = list(polygons)
        self._rings = [[(float(x), float(y)) for x, y in p.ring] for p in self.polygons]
        self._boxes = [p.bbox for p in self.polygons]
        self._edges = None

    @classmethod
    def from_lanelets(cls, lanelets) -> "Road":
        return cls(road_polygons(lanelets))

    def contains(self, px: float, py: float) -> bool:
        for ring, (x0, y0, x1, y1) in zip(self._rings, self._boxes):
            if (x0 - BOUNDARY_EPS <= px <= x1 + BOUNDARY_EPS
                    and y0 - BOUNDARY_EPS <= py <= y1 + BOUNDARY_EPS
                    and _in_ring(px, py, ring)):
                return True
        return False

    def contains_batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        shape = pts.shape[:-1]
        px = pts[..., 0].ravel()
        py = pts[..., 1].ravel()
        result = np.zeros(px.shape, dtype=bool)
        for poly in self.polygons:
            result |= _in_ring_batch(px, py, poly.ring)
        return result.reshape(shape)

    def boundary_edges(self) -> np.ndarray:
        """Polygon edges not shared with another lanelet, as an (E, 2, 2) array.

        Adjacent lanelets that share bound points cancel their common edge, so
        what remains contains the boundary of the union.
        """
        if self._edges is not None:
            return self._edges
        edges = []
        for k, poly in enumerate(self.polygons):
            ring = poly.ring
            for i in range(len(ring)):
                edges.append((k, ring[i], ring[(i + 1) % len(ring)]))

        def same(p, q):
            return abs(p[0] - q[0]) <= BOUNDARY_EPS and abs(p[1] - q[1]) <= BOUNDARY_EPS

        keep = []
        for i, (k, a, b) in enumerate(edges):
            shared = any(k2 != k and ((same(a, c) and same(b, d)) or (same(a, d) and same(b, c)))
                         for j, (k2, c, d) in enumerate(edges) if j != i)
            if not shared:
                keep.append((a, b))
        self._edges = np.asarray(keep, dtype=float).reshape(-1, 2, 2)
        return self._edges

    def clearance_batch(self, pts: np.ndarray) -> np.ndarray:
        """Distance from each point to the road edge; -1 for points off the road.

        A disk of radius ``r`` around a point with clearance >= r lies inside
        the lanelet union.
        """
        pts = np.asarray(pts, dtype=float)
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, 2)
        inside = self.contains_batch(flat)
        edges = self.boundary_edges()
        out = np.full(len(flat), -1.0)
        idx = np.flatnonzero(inside)
        chunk = max(1, 2_000_000 // max(1, len(edges)))
        for start in range(0, len(idx), chunk):
            sel = idx[start:start + chunk]
            out[sel] = segment_distance_batch(flat[sel], edges[:, 0], edges[:, 1]).min(axis=1)
        return out.reshape(shape)


def segment_distance_batch(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances (N, E) from points (N, 2) to segments a->b given as (E, 2) arrays."""
    pts = np.asarray(pts, dtype=float)[:, None, :]
    a = np.asarray(a, dtype=float)[None]
    e = np.asarray(b, dtype=float)[None] - a
    ll = (e * e).sum(axis=-1)
    t = ((pts - a) * e).sum(axis=-1) / np.where(ll > 0, ll, 1.0)
    t = np.clip(t, 0.0, 1.0)
    d = pts - (a + t[..., None] * e)
    return np.hypot(d[..., 0], d[..., 1])


def _in_ring_batch(px, py, ring) -> np.ndarray:
    x0, y0 = ring.min(axis=0) - BOUNDARY_EPS
    x1, y1 = ring.max(axis=0) + BOUNDARY_EPS
    cand = np.flatnonzero((px >= x0) & (px <= x1) & (py >= y0) & (py <= y1))
    out = np.zeros(px.shape, dtype=bool)
    if cand.size == 0:
        return out
    qx, qy = px[cand], py[cand]
    inside = np.zeros(cand.size, dtype=bool)
    boundary = np.zeros(cand.size, dtype=bool)
    n = len(ring)
    for i in range(n):
        ax, ay = ring[i]
        bx, by = ring[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        ll = ex * ex + ey * ey
        if ll > 0:
            t = np.clip(((qx - ax) * ex + (qy - ay) * ey) / ll, 0.0, 1.0)
            boundary |= np.hypot(ax + t * ex - qx, ay + t * ey - qy) <= BOUNDARY_EPS
        crosses = (ay > qy) != (by > qy)
        if ey != 0:
            xi = ax + (qy - ay) * ex / ey
            inside ^= crosses & (qx < xi)
    out[cand] = inside | boundary
    return out


def point_on_road(p: Point2, lanelets) -> bool:
    """True iff ``p`` lies inside or on the boundary of some lanelet polygon."""
    road = lanelets if isinstance(lanelets, Road) else Road(lanelets)
    return road.contains(p.x, p.y)


def sample_points(b: OrientedBox) -> list:
    """Corners, edge midpoints and centre of the box (9 points)."""
    corners = box_corners(b)
    mids = [Point2((corners[i].x + corners[(i + 1) % 4].x) / 2.0,
                   (corners[i].y + corners[(i + 1) % 4].y) / 2.0) for i in range(4)]
    return corners + mids + [b.center]


def offroad(ego: OrientedBox, lanelets) -> bool:
    road = lanelets if isinstance(lanelets, Road) else Road(lanelets)
    return not all(road.contains(p.x, p.y) for p in sample_points(ego))


# ---------------------------------------------------------------------------
# batched kernels

_SAMPLE_LOCAL = np.array([(1, 1), (-1, 1), (-1, -1), (1, -1),
                          (0, 1), (-1, 0), (0, -1), (1, 0), (0, 0)], dtype=float)


def sample_points_batch(x, y, theta, length: float, width: float) -> np.ndarray:
    """(N, 9, 2) sample points, same order as :func:`sample_points`."""
    x, y, theta = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float),
                                      np.asarray(theta, float))
    lx = _SAMPLE_LOCAL[:, 0] * (length / 2.0)
    ly = _SAMPLE_LOCAL[:, 1] * (width / 2.0)
    c, s = np.cos(theta)[..., None], np.sin(theta)[..., None]
    px = x[..., None] + lx * c - ly * s
    py = y[..., None] + lx * s + ly * c
    return np.stack([px, py], axis=-1)


def offroad_batch(x, y, theta, length: float, width: float, road: Road) -> np.ndarray:
    pts = sample_points_batch(x, y, theta, length, width)
    return ~road.contains_batch(pts).all(axis=-1)


def cover_centers_batch(x, y, theta, length: float, width: float, n: int):
    """Circle centres (N, n, 2) and the common radius for boxes at the given poses."""
    seg = length / n
    radius = 0.5 * math.hypot(seg, width)
    offsets = -length / 2.0 + seg * (np.arange(n) + 0.5)
    x, y, theta = (np.asarray(v, float) for v in (x, y, theta))
    cx = x[..., None] + offsets * np.cos(theta)[..., None]
    cy = y[..., None] + offsets * np.sin(theta)[..., None]
    return np.stack([cx, cy], axis=-1), radius


@dataclass(frozen=True)
class Capsule:
    """Set of points within ``radius`` of the segment a-b (a swept circle)."""
    a: tuple
    b: tuple
    radius: float


def capsule_clearance_batch(centers: np.ndarray, radius: float, capsules) -> np.ndarray:
    """Like :func:`clearance_batch` but against capsules; centers has shape (..., n, 2)."""
    out = np.full(centers.shape[:-2], np.inf)
    cx, cy = centers[..., 0], centers[..., 1]
    for cap in capsules:
        ax, ay = cap.a
        ex, ey = cap.b[0] - ax, cap.b[1] - ay
        ll = ex * ex + ey * ey
        if ll > 0:
            t = np.clip(((cx - ax) * ex + (cy - ay) * ey) / ll, 0.0, 1.0)
            d = np.hypot(cx - ax - t * ex, cy - ay - t * ey)
        else:
            d = np.hypot(cx - ax, cy - ay)
        np.minimum(out, d.min(axis=-1) - radius - cap.radius, out=out)
    return out


def clearance_batch(centers: np.ndarray, radius: float, covers) -> np.ndarray:
    """Minimum gap between each ego cover (rows of ``centers``) and any of ``covers``.

    Returns +inf where there are no obstacles.
    """
    out = np.full(centers.shape[:-2], np.inf)
    for cover in covers:
        for ox, oy in cover.centers:
            d = np.hypot(centers[..., 0] - ox, centers[..., 1] - oy).min(axis=-1)
            np.minimum(out, d - radius - cover.radius, out=out)
    return out


# ---------------------------------------------------------------------------
# obstacles

def shape_box(shape, x: float, y: float, theta: float) -> OrientedBox:
    """Oriented box enclosing ``shape`` placed at pose (x, y, theta)."""
    c, s = math.cos(theta), math.sin(theta)
    if isinstance(shape, Rectangle):
        dx, dy = _rotate(shape.center.x, shape.center.y, c, s)
        return OrientedBox(Point2(x + dx, y + dy), shape.length, shape.width, theta + shape.orientation)
    if isinstance(shape, Circle):
        dx, dy = _rotate(shape.center.x, shape.center.y, c, s)
        d = 2.0 * shape.radius
        return OrientedBox(Point2(x + dx, y + dy), d, d, theta)
    if isinstance(shape, Polygon):
        xs = [v.x for v in shape.vertices]
        ys = [v.y for v in shape.vertices]
        mx, my = (min(xs) + max(xs)) / 2.0, (min(ys) + max(ys)) / 2.0
        dx, dy = _rotate(mx, my, c, s)
        return OrientedBox(Point2(x + dx, y + dy), max(xs) - min(xs), max(ys) - min(ys), theta)
    raise TypeError(f"unsupported shape {shape!r}")


def shape_cover(shape, x: float, y: float, theta: float, n: Optional[int] = None) -> CircleCover:
    """Circle cover of an obstacle shape at a pose; circles stay exact."""
    if isinstance(shape, Circle):
        c, s = math.cos(theta), math.sin(theta)
        dx, dy = _rotate(shape.center.x, shape.center.y, c, s)
        return CircleCover(np.array([[x + dx, y + dy]]), shape.radius)
    return circle_cover(shape_box(shape, x, y, theta), n)


def state_cover(shape, st: StateRecord, n: Optional[int] = None) -> CircleCover:
    return shape_cover(shape, st.position.x, st.position.y, st.orientation, n)


def shape_contains(shape, px: float, py: float) -> bool:
    """Point membership for a shape in absolute coordinates (closed)."""
    if isinstance(shape, Rectangle):
        c, s = math.cos(shape.orientation), math.sin(shape.orientation)
        dx, dy = px - shape.center.x, py - shape.center.y
        lx, ly = dx * c + dy * s, -dx * s + dy * c
        return (abs(lx) <= shape.length / 2.0 + BOUNDARY_EPS
                and abs(ly) <= shape.width / 2.0 + BOUNDARY_EPS)
    if isinstance(shape, Circle):
        return math.hypot(px - shape.center.x, py - shape.center.y) <= shape.radius + BOUNDARY_EPS
    if isinstance(shape, Polygon):
        return _in_ring(px, py, [(v.x, v.y) for v in shape.vertices])
    raise TypeError(f"unsupported shape {shape!r}")


def shape_contains_batch(shape, px, py) -> np.ndarray:
    """Vectorized :func:`shape_contains`."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    if isinstance(shape, Rectangle):
        c, s = math.cos(shape.orientation), math.sin(shape.orientation)
        dx, dy = px - shape.center.x, py - shape.center.y
        lx, ly = dx * c + dy * s, -dx * s + dy * c
        return ((np.abs(lx) <= shape.length / 2.0 + BOUNDARY_EPS)
                & (np.abs(ly) <= shape.width / 2.0 + BOUNDARY_EPS))
    if isinstance(shape, Circle):
        return np.hypot(px - shape.center.x, py - shape.center.y) <= shape.radius + BOUNDARY_EPS
    if isinstance(shape, Polygon):
        ring = np.array([(v.x, v.y) for v in shape.vertices])
        return _in_ring_batch(px.ravel(), py.ravel(), ring).reshape(px.shape)
    raise TypeError(f"unsupported shape {shape!r}")


def shape_outline(shape) -> list:
    """Absolute outline points of a placed shape (circles as 24-gons)."""
    if isinstance(shape, Rectangle):
        return box_corners(OrientedBox(shape.center, shape.length, shape.width, shape.orientation))
    if isinstance(shape, Circle):
        return [Point2(shape.center.x + shape.radius * math.cos(a), shape.center.y + shape.radius * math.sin(a))
                for a in np.linspace(0.0, 2 * math.pi, 24, endpoint=False)]
    return list(shape.vertices)
