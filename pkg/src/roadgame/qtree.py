"""Per-action Q-value trees and their compilation into one decision tree.

Trees are binary and axis aligned.  A branch sends a state to its low child
iff ``s[dim] < threshold``, so every leaf covers a box of half-open
intervals ``[lo, hi)``.  The greedy policy is the argmax over the action
trees, ties going to the lowest action index.

The conversion enumerates the leaves of all action trees, sorts them by Q
(descending; then action index, then box bounds) and inserts them one by
one into a growing tree.  Each insertion carves the box out of whatever
unassigned space remains, using at most two branches per bounded
dimension; space already assigned to an earlier (better) leaf is left
alone.  Leaves with value -inf are never inserted, so space that is -inf
for every action stays ``unassigned``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ArityMismatch, SchemaError, UnassignedRegion

QTREE_FORMAT = "roadgame.qtree/1"
DTREE_FORMAT = "roadgame.dtree/1"


@dataclass(frozen=True)
class Leaf:
    value: object   # Q-value (float) in Q-trees; action index or None in decision trees


@dataclass(frozen=True)
class Branch:
    dim: int
    threshold: float
    low: "Node"
    high: "Node"


Node = Union[Leaf, Branch]


@dataclass(frozen=True)
class QTreeStrategy:
    state_dims: tuple
    actions: tuple
    trees: tuple

    def __post_init__(self):
        object.__setattr__(self, "state_dims", tuple(self.state_dims))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "trees", tuple(self.trees))
        if len(self.trees) != len(self.actions):
            raise ValueError("one tree per action is required")


@dataclass(frozen=True)
class DecisionTree:
    state_dims: tuple
    actions: tuple
    root: Node

    def __post_init__(self):
        object.__setattr__(self, "state_dims", tuple(self.state_dims))
        object.__setattr__(self, "actions", tuple(self.actions))


@dataclass(frozen=True)
class LeafBox:
    lo: tuple
    hi: tuple
    q: float
    action: int
    rank: int = 0


# ---------------------------------------------------------------------------
# evaluation

def evaluate(node: Node, s) -> object:
    while isinstance(node, Branch):
        node = node.low if s[node.dim] < node.threshold else node.high
    return node.value


def _check_arity(dims, s):
    if len(s) != len(dims):
        raise ArityMismatch(f"state has {len(s)} components, expected {len(dims)} {tuple(dims)}")


def q_values(qs: QTreeStrategy, s) -> list:
    _check_arity(qs.state_dims, s)
    return [evaluate(t, s) for t in qs.trees]


def predict(qs: QTreeStrategy, s) -> int:
    """Index of the action whose tree gives the largest Q at ``s``; lowest index on ties."""
    qv = q_values(qs, s)
    best = 0
    for i, q in enumerate(qv):
        if q > qv[best]:
            best = i
    return best


def decide(dt: DecisionTree, s) -> int:
    _check_arity(dt.state_dims, s)
    a = evaluate(dt.root, s)
    if a is None:
        raise UnassignedRegion(f"no action assigned at {tuple(s)}")
    return a


class FlatTree:
    """Array form of a tree for vectorized evaluation."""

    def __init__(self, root: Node, missing=np.nan):
        dims, thr, low, high, val = [], [], [], [], []

        stack = [(root, -1, False)]
        while stack:
            node, parent, is_high = stack.pop()
            i = len(dims)
            if parent >= 0:
                (high if is_high else low)[parent] = i
            if isinstance(node, Branch):
                dims.append(node.dim)
                thr.append(node.threshold)
                low.append(-1)
                high.append(-1)
                val.append(missing)
                stack.append((node.high, i, True))
                stack.append((node.low, i, False))
            else:
                dims.append(-1)
                thr.append(0.0)
                low.append(-1)
                high.append(-1)
                val.append(missing if node.value is None else node.value)
        self.dim = np.array(dims, dtype=np.int64)
        self.threshold = np.array(thr, dtype=float)
        self.low = np.array(low, dtype=np.int64)
        self.high = np.array(high, dtype=np.int64)
        self.value = np.array(val, dtype=float)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            d = self.dim[node]
            active = d >= 0
            if not active.any():
                return self.value[node]
            idx = np.flatnonzero(active)
            go_low = X[rows[idx], d[idx]] < self.threshold[node[idx]]
            node[idx] = np.where(go_low, self.low[node[idx]], self.high[node[idx]])


def predict_batch(qs: QTreeStrategy, X: np.ndarray):
    """Greedy actions and best Q for each row of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(qs.state_dims):
        raise ArityMismatch(f"expected rows of {len(qs.state_dims)} components")
    Q = np.stack([FlatTree(t, missing=-np.inf)(X) for t in qs.trees], axis=1)
    return Q.argmax(axis=1), Q.max(axis=1)


def decide_batch(dt: DecisionTree, X: np.ndarray) -> np.ndarray:
    """Actions per row; -1 where the region is unassigned."""
    out = FlatTree(dt.root, missing=-1.0)(X)
    return out.astype(np.int64)


# ---------------------------------------------------------------------------
# conversion

def leaf_boxes(qs: QTreeStrategy) -> list:
    k = len(qs.state_dims)
    out = []
    for a, root in enumerate(qs.trees):
        stack = [(root, (-math.inf,) * k, (math.inf,) * k)]
        while stack:
            node, lo, hi = stack.pop()
            if isinstance(node, Leaf):
                out.append(LeafBox(lo, hi, float(node.value), a))
                continue
            d, t = node.dim, node.threshold
            if t < hi[d]:
                stack.append((node.high, lo[:d] + (max(lo[d], t),) + lo[d + 1:], hi))
            if t > lo[d]:
                stack.append((node.low, lo, hi[:d] + (min(hi[d], t),) + hi[d + 1:]))
    return out


def sort_boxes(boxes) -> list:
    ordered = sorted(boxes, key=lambda b: (-b.q, b.action, b.lo, b.hi))
    return [LeafBox(b.lo, b.hi, b.q, b.action, i) for i, b in enumerate(ordered)]


class _Mut:
    """Mutable node used while the decision tree grows."""
    __slots__ = ("dim", "threshold", "low", "high", "action", "assigned")

    def __init__(self):
        self.dim = -1
        self.threshold = 0.0
        self.low = self.high = None
        self.action = None
        self.assigned = False


def _carve(node: _Mut, lo, hi, box: LeafBox):
    """Turn the unassigned leaf ``node`` (region [lo, hi)) into splits isolating ``box``."""
    cur = node
    for d in range(len(lo)):
        if box.lo[d] > lo[d]:
            cur.dim, cur.threshold = d, box.lo[d]
            cur.low = _Mut()
            cur.high = _Mut()
            cur = cur.high
        if box.hi[d] < hi[d]:
            cur.dim, cur.threshold = d, box.hi[d]
            cur.low = _Mut()
            cur.high = _Mut()
            cur = cur.low
    cur.action = box.action
    cur.assigned = True


def qtrees_to_decision_tree(qs: QTreeStrategy) -> DecisionTree:
    if not qs.trees:
        raise ValueError("strategy has no action trees")
    k = len(qs.state_dims)
    root = _Mut()
    for box in sort_boxes(leaf_boxes(qs)):
        if box.q == -math.inf:
            break   # sorted: everything after is -inf too
        stack = [(root, (-math.inf,) * k, (math.inf,) * k, box.lo, box.hi)]
        while stack:
            node, lo, hi, blo, bhi = stack.pop()
            if node.dim < 0:
                if not node.assigned:
                    _carve(node, lo, hi, LeafBox(blo, bhi, box.q, box.action))
                continue
            d, t = node.dim, node.threshold
            if blo[d] < t:
                stack.append((node.low, lo, hi[:d] + (min(hi[d], t),) + hi[d + 1:],
                              blo, bhi[:d] + (min(bhi[d], t),) + bhi[d + 1:]))
            if bhi[d] > t:
                stack.append((node.high, lo[:d] + (max(lo[d], t),) + lo[d + 1:], hi,
                              blo[:d] + (max(blo[d], t),) + blo[d + 1:], bhi))
    return DecisionTree(qs.state_dims, qs.actions, _freeze(root))


def _freeze(root: _Mut) -> Node:
    # post-order without recursion
    done = {}
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if node.dim < 0:
            done[id(node)] = Leaf(node.action if node.assigned else None)
        elif expanded:
            done[id(node)] = Branch(node.dim, node.threshold, done.pop(id(node.low)), done.pop(id(node.high)))
        else:
            stack.append((node, True))
            stack.append((node.high, False))
            stack.append((node.low, False))
    return done[id(root)]


def count_nodes(node: Node) -> tuple:
    """(branches, leaves)."""
    branches = leaves = 0
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Branch):
            branches += 1
            stack += [n.low, n.high]
        else:
            leaves += 1
    return branches, leaves


# ---------------------------------------------------------------------------
# JSON

def _enc(v: float):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return float(v)


def _dec(v, path):
    if isinstance(v, str):
        if v == "-inf":
            return -math.inf
        if v == "inf":
            return math.inf
        raise SchemaError(path, f"unexpected string {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(path, "expected a number")
    if not math.isfinite(v):
        raise SchemaError(path, "non-finite number")
    return float(v)


def _flatten(root: Node, leaf_key: str, enc) -> list:
    nodes = []
    stack = [(root, None, None)]
    while stack:
        node, parent, side = stack.pop()
        i = len(nodes)
        if parent is not None:
            nodes[parent][side] = i
        if isinstance(node, Branch):
            nodes.append({"dim": node.dim, "threshold": float(node.threshold), "low": None, "high": None})
            stack.append((node.high, i, "high"))
            stack.append((node.low, i, "low"))
        else:
            nodes.append({leaf_key: enc(node.value)})
    return nodes


def _unflatten(nodes, path: str, leaf_key: str, dec, n_dims: int) -> Node:
    if not isinstance(nodes, list) or not nodes:
        raise SchemaError(path, "expected a non-empty node list")
    built = [None] * len(nodes)
    # children always follow their parent in pre-order, so build back to front
    for i in range(len(nodes) - 1, -1, -1):
        n = nodes[i]
        p = f"{path}/{i}"
        if not isinstance(n, dict):
            raise SchemaError(p, "expected an object")
        if leaf_key in n:
            built[i] = Leaf(dec(n[leaf_key], f"{p}/{leaf_key}"))
            continue
        for key in ("dim", "threshold", "low", "high"):
            if key not in n:
                raise SchemaError(f"{p}/{key}", "missing")
        dim = n["dim"]
        if not isinstance(dim, int) or isinstance(dim, bool) or not 0 <= dim < n_dims:
            raise SchemaError(f"{p}/dim", "dimension index out of range")
        thr = _dec(n["threshold"], f"{p}/threshold")
        if not math.isfinite(thr):
            raise SchemaError(f"{p}/threshold", "threshold must be finite")
        kids = []
        for key in ("low", "high"):
            j = n[key]
            if not isinstance(j, int) or isinstance(j, bool) or not i < j < len(nodes) or built[j] is None:
                raise SchemaError(f"{p}/{key}", "invalid child reference")
            kids.append(built[j])
            built[j] = None   # each node has exactly one parent
        built[i] = Branch(dim, thr, kids[0], kids[1])
    if any(b is not None for b in built[1:]):
        raise SchemaError(path, "unreachable nodes")
    return built[0]


def _header(doc, fmt):
    if not isinstance(doc, dict):
        raise SchemaError("/", "expected an object")
    if doc.get("format") != fmt:
        raise SchemaError("/format", f"expected {fmt!r}")
    for key in ("state_dims", "actions"):
        if key not in doc:
            raise SchemaError(f"/{key}", "missing")
        if not isinstance(doc[key], list) or not all(isinstance(x, str) for x in doc[key]):
            raise SchemaError(f"/{key}", "expected a list of strings")


def strategy_to_json(qs: QTreeStrategy) -> str:
    doc = {"format": QTREE_FORMAT, "state_dims": list(qs.state_dims), "actions": list(qs.actions),
           "trees": [_flatten(t, "q", _enc) for t in qs.trees]}
    return json.dumps(doc, indent=1) + "\n"


def strategy_from_json(text: str) -> QTreeStrategy:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("/", f"invalid JSON: {exc}") from None
    _header(doc, QTREE_FORMAT)
    trees = doc.get("trees")
    if not isinstance(trees, list):
        raise SchemaError("/trees", "missing or not a list")
    if len(trees) != len(doc["actions"]):
        raise SchemaError("/trees", "one tree per action is required")
    n = len(doc["state_dims"])
    return QTreeStrategy(doc["state_dims"], doc["actions"],
                         [_unflatten(t, f"/trees/{i}", "q", _dec, n) for i, t in enumerate(trees)])


def save_strategy(qs: QTreeStrategy, sink) -> None:
    text = strategy_to_json(qs)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write(text)


def load_strategy(source) -> QTreeStrategy:
    if hasattr(source, "read"):
        return strategy_from_json(source.read())
    with open(source, encoding="utf-8") as fh:
        return strategy_from_json(fh.read())


def _enc_action(a):
    return "unassigned" if a is None else a


def _dec_action(v, path):
    if v == "unassigned":
        return None
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise SchemaError(path, "expected an action index or 'unassigned'")
    return v


def dtree_to_json(dt: DecisionTree) -> str:
    doc = {"format": DTREE_FORMAT, "state_dims": list(dt.state_dims), "actions": list(dt.actions),
           "nodes": _flatten(dt.root, "action", _enc_action)}
    return json.dumps(doc, indent=1) + "\n"


def dtree_from_json(text: str) -> DecisionTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("/", f"invalid JSON: {exc}") from None
    _header(doc, DTREE_FORMAT)
    root = _unflatten(doc.get("nodes"), "/nodes", "action", _dec_action, len(doc["state_dims"]))
    return DecisionTree(doc["state_dims"], doc["actions"], root)


def from_foreign_layout(doc: dict, state_dims, actions) -> QTreeStrategy:
    """Adapter for nested layouts of the form ``{"var": i, "bound": b, "low": .., "high": ..}``
    with numeric leaves, one tree per action under ``doc["regressors"][action]``.

    When ``doc["minimize"]`` is true the leaves are costs and are negated.
    """
    sign = -1.0 if doc.get("minimize") else 1.0
    regs = doc.get("regressors")
    if not isinstance(regs, dict):
        raise SchemaError("/regressors", "missing or not an object")

    def conv(n, path):
        if isinstance(n, (int, float)) and not isinstance(n, bool):
            return Leaf(sign * float(n))
        if not isinstance(n, dict):
            raise SchemaError(path, "expected a node")
        try:
            return Branch(int(n["var"]), float(n["bound"]), conv(n["low"], f"{path}/low"),
                          conv(n["high"], f"{path}/high"))
        except KeyError as exc:
            raise SchemaError(f"{path}/{exc.args[0]}", "missing") from None

    trees = []
    for a in actions:
        if str(a) not in regs:
            raise SchemaError(f"/regressors/{a}", "missing action")
        trees.append(conv(regs[str(a)], f"/regressors/{a}"))
    return QTreeStrategy(state_dims, actions, trees)


# ---------------------------------------------------------------------------
# graph export

def export_dot(dt: DecisionTree) -> str:
    """Graphviz text; nodes are numbered in pre-order."""
    lines = ["digraph decision_tree {", '  node [fontname="Helvetica"];']
    counter = 0
    stack = [(dt.root, None, None)]
    while stack:
        node, parent, label = stack.pop()
        i = counter
        counter += 1
        if isinstance(node, Branch):
            name = dt.state_dims[node.dim] if node.dim < len(dt.state_dims) else f"s{node.dim}"
            lines.append(f'  n{i} [shape=box, label="{name} < {node.threshold!r}"];')
            stack.append((node.high, i, "no"))
            stack.append((node.low, i, "yes"))
        else:
            text = "unassigned" if node.value is None else str(dt.actions[node.value])
            lines.append(f'  n{i} [shape=ellipse, label="{text}"];')
        if parent is not None:
            lines.append(f'  n{parent} -> n{i} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
