"""Reference implementations used only by the tests.

Each oracle is written independently of the package code it checks: plain
loops, no shared helpers, no vectorization.
"""

import itertools
import math


# ---------------------------------------------------------------------------
# geometry

def rect_polygon(cx, cy, length, width, theta):
    c, s = math.cos(theta), math.sin(theta)
    pts = []
    for lx, ly in ((length / 2, width / 2), (-length / 2, width / 2),
                   (-length / 2, -width / 2), (length / 2, -width / 2)):
        pts.append((cx + lx * c - ly * s, cy + lx * s + ly * c))
    return pts


def _project(poly, ax, ay):
    vals = [x * ax + y * ay for x, y in poly]
    return min(vals), max(vals)


def convex_overlap(p, q):
    """Separating-axis test for two convex polygons (touching counts as overlap)."""
    for poly in (p, q):
        n = len(poly)
        for i in range(n):
            x0, y0 = poly[i]
            x1, y1 = poly[(i + 1) % n]
            ax, ay = y0 - y1, x1 - x0
            a0, a1 = _project(p, ax, ay)
            b0, b1 = _project(q, ax, ay)
            if a1 < b0 or b1 < a0:
                return False
    return True


def point_segment_distance(px, py, ax, ay, bx, by):
    ex, ey = bx - ax, by - ay
    ll = ex * ex + ey * ey
    t = 0.0 if ll == 0 else max(0.0, min(1.0, ((px - ax) * ex + (py - ay) * ey) / ll))
    return math.hypot(ax + t * ex - px, ay + t * ey - py)


def convex_distance(p, q):
    """Exact distance between convex polygons: 0 on overlap, otherwise the
    minimum over vertex-edge pairs in both directions."""
    if convex_overlap(p, q):
        return 0.0
    best = math.inf
    for a, b in ((p, q), (q, p)):
        n = len(b)
        for vx, vy in a:
            for i in range(n):
                ax, ay = b[i]
                bx, by = b[(i + 1) % n]
                best = min(best, point_segment_distance(vx, vy, ax, ay, bx, by))
    return best


def point_in_polygon_closed(px, py, poly, eps=1e-9):
    """Crossing-number test with the boundary counted inside."""
    n = len(poly)
    for i in range(n):
        if point_segment_distance(px, py, *poly[i], *poly[(i + 1) % n]) <= eps:
            return True
    inside = False
    for i in range(n):
        (ax, ay), (bx, by) = poly[i], poly[(i + 1) % n]
        if (ay > py) != (by > py) and px < ax + (py - ay) * (bx - ax) / (by - ay):
            inside = not inside
    return inside


# ---------------------------------------------------------------------------
# dynamics

def fine_euler(x, y, th, v, acc, yaw, duration, steps, v_max=15.0):
    dt = duration / steps
    for _ in range(steps):
        x += v * math.cos(th) * dt
        y += v * math.sin(th) * dt
        th += yaw * dt
        v = min(max(v + acc * dt, 0.0), v_max)
    return x, y, th, v


def exact_arc(x, y, th, v, yaw, duration):
    """Closed-form unicycle motion at constant speed and yaw rate."""
    if yaw == 0:
        return x + v * duration * math.cos(th), y + v * duration * math.sin(th)
    th1 = th + yaw * duration
    r = v / yaw
    return x + r * (math.sin(th1) - math.sin(th)), y - r * (math.cos(th1) - math.cos(th))


# ---------------------------------------------------------------------------
# safety games

def brute_fixpoint_explicit(succ, bad):
    """Greatest fixpoint by repeated set filtering over ``succ[s][a]``."""
    W = {s for s in range(len(succ)) if not bad[s]}
    while True:
        new = {s for s in W if any(all(t in W for t in targets) for targets in succ[s])}
        if new == W:
            break
        W = new
    allowed = {s: {a for a, targets in enumerate(succ[s]) if all(t in W for t in targets)} for s in W}
    return W, allowed


def brute_fixpoint_grid(gg):
    """Greatest fixpoint of a grid game by plain iteration over all states,
    using only ``gg.successors`` and ``gg.bad``.

    Returns {(t, cell): allowed action positions} for winning states.
    """
    H = gg.grid.horizon
    cells = list(itertools.product(*(range(n) for n in gg.grid.shape)))
    states = [(t, c) for t in range(H + 1) for c in cells]
    W = {st for st in states if not gg.bad[(st[0],) + st[1]]}
    succ = {}
    for t, c in states:
        if t < H:
            for a in range(len(gg.actions)):
                succ[(t, c, a)] = gg.successors(c, t, a)
    while True:
        new = set()
        for t, c in W:
            if t == H:
                new.add((t, c))
                continue
            for a in range(len(gg.actions)):
                targets, escaped = succ[(t, c, a)]
                if not escaped and all((t2, c2) in W for c2, t2 in targets):
                    new.add((t, c))
                    break
        if new == W:
            break
        W = new
    out = {}
    for t, c in W:
        if t == H:
            out[(t, c)] = set(range(len(gg.actions)))
            continue
        ok = set()
        for a in range(len(gg.actions)):
            targets, escaped = succ[(t, c, a)]
            if not escaped and all((t2, c2) in W for c2, t2 in targets):
                ok.add(a)
        out[(t, c)] = ok
    return out


# ---------------------------------------------------------------------------
# learning

def chain_value_iteration(length, horizon, gamma=1.0, step_reward=-1.0, goal_reward=100.0, n_actions=3):
    """Optimal finite-horizon Q for the chain: actions move -1/0/+1, the goal is terminal.

    Q[(pos, t)][a] for t < horizon; the last step's target is its reward alone.
    """
    Q = {}
    V = {}
    for t in range(horizon - 1, -1, -1):
        for pos in range(length):
            row = []
            for a in range(n_actions):
                nxt = max(0, pos + a - 1)
                if nxt == length:
                    row.append(goal_reward)
                elif t + 1 >= horizon:
                    row.append(step_reward)
                else:
                    row.append(step_reward + gamma * V[(nxt, t + 1)])
            Q[(pos, t)] = row
            V[(pos, t)] = max(row)
    return Q


# ---------------------------------------------------------------------------
# closed-loop path enumeration

def enumerate_paths(world, controller, params, horizon, stop):
    """Every obstacle choice sequence, expanded without deduplication.

    ``stop(s, others)`` returns "fail", "done" or None.  Returns
    (any path failed, number of expanded nodes).
    """
    from roadgame.dynamics import actions, step

    acts = actions(params)
    choices = world.choices()
    nodes = 0
    stack = [(world.initial_ego(), world.initial_reactive())]
    while stack:
        s, others = stack.pop()
        nodes += 1
        verdict = stop(s, others)
        if verdict == "fail":
            return True, nodes
        if verdict == "done":
            continue
        nxt = step(s, acts[controller(s)], params)
        for ch in choices:
            stack.append((nxt, world.advance(others, ch) if others else others))
    return False, nodes


def exists_safe_search(world, params, horizon):
    """Exhaustive search over ego actions and obstacle choices (both existential)."""
    from roadgame.dynamics import actions, step

    acts = actions(params)
    choices = world.choices()
    s0, o0 = world.initial_ego(), world.initial_reactive()
    if world.unsafe(s0, o0):
        return False

    def rec(s, others, depth):
        if depth == horizon:
            return True
        for act in acts:
            nxt = step(s, act, params)
            for ch in choices:
                o2 = world.advance(others, ch) if others else others
                if not world.unsafe(nxt, o2) and rec(nxt, o2, depth + 1):
                    return True
        return False

    return rec(s0, o0, 0)


# ---------------------------------------------------------------------------
# grids and trees

def scalar_cell(edges, value):
    """Half-open cells [e_i, e_i+1), the last one closed; None outside."""
    n = len(edges) - 1
    if value < edges[0] or value > edges[-1]:
        return None
    if value == edges[-1]:
        return n - 1
    for i in range(n):
        if edges[i] <= value < edges[i + 1]:
            return i
    return None


def eval_flat_nodes(nodes, leaf_key, s):
    """Evaluate a tree in its serialized flat-list form (see docs/strategy-json.md)."""
    i = 0
    while True:
        node = nodes[i]
        if leaf_key in node:
            return node[leaf_key]
        i = node["low"] if s[node["dim"]] < node["threshold"] else node["high"]
