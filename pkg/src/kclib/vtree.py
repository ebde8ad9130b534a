"""Vtrees: full binary trees over variables, driving structured decomposability.

Nodes are addressed by their in-order position (0-based); with sequential
in-order numbering every leaf lands on an even position, matching the
common vtree file convention.  Vtrees are immutable after construction and
freely shareable.
"""

from __future__ import annotations

import random

from .errors import FormatError

LEAF = "leaf"


class Vtree:
    """Full binary tree whose leaves biject onto a variable set.

    Build one through the ``right_linear`` / ``balanced`` / ``random_split``
    / ``constrained`` constructors or ``parse_vtree``; the raw constructor
    takes a nested shape of variables, e.g. ``((3, 2), (4, 1))``.
    """

    def __init__(self, shape):
        self.var = []
        self.left = []
        self.right = []
        self.parent = []
        self.depth = []
        self._leaf_rank = []  # per node: (first, last) leaf rank in its subtree
        self._leaf_vars = []  # leaf rank -> variable
        self.root = self._build(shape, None, 0)
        self.var_count = len(self._leaf_vars)
        self.leaf_of = {}
        for pos, v in enumerate(self.var):
            if v is not None:
                if v in self.leaf_of:
                    raise ValueError(f"variable {v} appears on two leaves")
                self.leaf_of[v] = pos

    def _build(self, shape, parent, depth):
        if isinstance(shape, int):
            if shape <= 0:
                raise ValueError(f"invalid variable {shape}")
            pos = self._add(shape, -1, -1, parent, depth)
            rank = len(self._leaf_vars)
            self._leaf_vars.append(shape)
            self._leaf_rank[pos] = (rank, rank)
            return pos
        if not isinstance(shape, tuple) or len(shape) != 2:
            raise ValueError("shape must be a variable or a pair of shapes")
        left = self._build(shape[0], None, depth + 1)
        pos = self._add(None, left, -1, parent, depth)
        right = self._build(shape[1], pos, depth + 1)
        self.right[pos] = right
        self.parent[left] = pos
        self._leaf_rank[pos] = (self._leaf_rank[left][0], self._leaf_rank[right][1])
        return pos

    def _add(self, var, left, right, parent, depth):
        self.var.append(var)
        self.left.append(left)
        self.right.append(right)
        self.parent.append(parent)
        self.depth.append(depth)
        self._leaf_rank.append(None)
        return len(self.var) - 1

    # -- structure queries ------------------------------------------------

    def node_count(self) -> int:
        return len(self.var)

    def is_leaf(self, pos: int) -> bool:
        return self.var[pos] is not None

    def variables_under(self, pos: int) -> list:
        first, last = self._leaf_rank[pos]
        return self._leaf_vars[first : last + 1]

    def subtree_leaf_span(self, pos: int):
        return self._leaf_rank[pos]

    def is_ancestor(self, anc: int, pos: int) -> bool:
        """Is `anc` equal to or above `pos`?"""
        a0, a1 = self._leaf_rank[anc]
        p0, p1 = self._leaf_rank[pos]
        return a0 <= p0 and p1 <= a1

    def lca(self, a: int, b: int) -> int:
        while self.depth[a] > self.depth[b]:
            a = self.parent[a]
        while self.depth[b] > self.depth[a]:
            b = self.parent[b]
        while a != b:
            a = self.parent[a]
            b = self.parent[b]
        return a

    def shape(self):
        """Nested-tuple shape, inverse of the constructor argument."""

        def rec(pos):
            if self.is_leaf(pos):
                return self.var[pos]
            return (rec(self.left[pos]), rec(self.right[pos]))

        return rec(self.root)

    def is_constrained_for(self, variables) -> bool:
        """Is some node on the root's right spine exactly over `variables`?"""
        target = set(variables)
        pos = self.root
        while True:
            if set(self.variables_under(pos)) == target:
                return True
            if self.is_leaf(pos):
                return False
            pos = self.right[pos]

    def right_spine_node_for(self, variables) -> int | None:
        target = set(variables)
        pos = self.root
        while True:
            if set(self.variables_under(pos)) == target:
                return pos
            if self.is_leaf(pos):
                return None
            pos = self.right[pos]

    def __eq__(self, other):
        if not isinstance(other, Vtree):
            return NotImplemented
        return self.shape() == other.shape()

    def __repr__(self):
        return f"Vtree({self.shape()!r})"


# -- constructors -----------------------------------------------------------


def _as_vars(variables) -> list:
    out = list(variables)
    if not out:
        raise ValueError("a vtree needs at least one variable")
    if len(set(out)) != len(out):
        raise ValueError("duplicate variables")
    return out


def right_linear(variables) -> Vtree:
    """Vtree where the left child of every internal node is a leaf."""
    out = _as_vars(variables)
    shape = out[-1]
    for v in reversed(out[:-1]):
        shape = (v, shape)
    return Vtree(shape)


def balanced(variables) -> Vtree:
    """Recursive halving; depth is at most ceil(log2 n) + 1."""
    out = _as_vars(variables)

    def rec(vs):
        if len(vs) == 1:
            return vs[0]
        mid = len(vs) // 2
        return (rec(vs[:mid]), rec(vs[mid:]))

    return Vtree(rec(out))


def random_split(variables, seed: int) -> Vtree:
    """Random tree shape from recursive uniform split points; fixed per seed."""
    out = _as_vars(variables)
    rng = random.Random(seed)

    def rec(vs):
        if len(vs) == 1:
            return vs[0]
        cut = rng.randint(1, len(vs) - 1)
        return (rec(vs[:cut]), rec(vs[cut:]))

    return Vtree(rec(out))


def constrained(x_vars, y_vars) -> Vtree:
    """Vtree whose right spine reaches a node covering exactly `x_vars`.

    The `y_vars` hang as single-leaf left subtrees along the spine and a
    balanced subtree over `x_vars` sits at its end, so maximization over
    `y_vars` composes with summation over `x_vars`.
    """
    xs = _as_vars(x_vars)
    ys = _as_vars(y_vars)
    if set(xs) & set(ys):
        raise ValueError("constrained vtree parts must be disjoint")
    shape = balanced(xs).shape()
    for v in reversed(ys):
        shape = (v, shape)
    return Vtree(shape)


# -- text format --------------------------------------------------------------


def serialize_vtree(vtree: Vtree) -> str:
    """Post-order listing: `vtree N` header, then `L id var` / `I id left right`."""
    lines = []

    def rec(pos):
        if vtree.is_leaf(pos):
            lines.append(f"L {pos} {vtree.var[pos]}")
        else:
            rec(vtree.left[pos])
            rec(vtree.right[pos])
            lines.append(f"I {pos} {vtree.left[pos]} {vtree.right[pos]}")

    rec(vtree.root)
    return "\n".join([f"vtree {vtree.node_count()}"] + lines) + "\n"


def parse_vtree(text: str) -> Vtree:
    """Parse the vtree text format; `c`-prefixed comment lines are ignored."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("c")]
    if not lines or not lines[0].startswith("vtree"):
        raise FormatError("missing 'vtree N' header")
    head = lines[0].split()
    if len(head) != 2 or not head[1].isdigit():
        raise FormatError(f"malformed header {lines[0]!r}")
    declared = int(head[1])
    shapes = {}
    last = None
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        try:
            if parts[0] == "L" and len(parts) == 3:
                ident, var = int(parts[1]), int(parts[2])
                shapes[ident] = var
            elif parts[0] == "I" and len(parts) == 4:
                ident, left, right = int(parts[1]), int(parts[2]), int(parts[3])
                if left not in shapes or right not in shapes:
                    raise FormatError(f"line {lineno}: child id not yet defined")
                shapes[ident] = (shapes[left], shapes[right])
            else:
                raise FormatError(f"line {lineno}: malformed line {line!r}")
        except (ValueError, IndexError):
            raise FormatError(f"line {lineno}: malformed line {line!r}") from None
        last = ident
    if len(shapes) != declared:
        raise FormatError(f"header declares {declared} nodes, found {len(shapes)}")
    if last is None:
        raise FormatError("empty vtree")
    try:
        return Vtree(shapes[last])
    except ValueError as exc:
        raise FormatError(str(exc)) from None
