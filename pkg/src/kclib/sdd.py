"""Canonical SDDs: bottom-up compilation, Boolean ops, counting, MAP.

An ``SddManager`` owns a fixed vtree plus the compiler state: an arena of
nodes, a unique table that canonicalizes decision nodes, and an apply
cache.  Node ids are ints; ``FALSE_ID`` and ``TRUE_ID`` are 0 and 1.
Every constructed node is compressed (no two elements share a sub) and
trimmed, so semantically equivalent formulas compiled under one manager
land on the identical id.  A decision node stores its vtree position and
an element list of (prime, sub) pairs whose primes are satisfiable,
pairwise exclusive and exhaustive over the left subtree.

Managers are single-threaded compilation contexts; exported circuits
(``to_nnf``) are immutable and freely shareable.
"""

from __future__ import annotations

import sys
from typing import Iterable, Mapping

from .cnf import Cnf
from .errors import FormatError, SemanticError
from .nnf import NnfCircuit
from .vtree import Vtree

FALSE_ID = 0
TRUE_ID = 1

CONJOIN = "and"
DISJOIN = "or"

_CONST = "C"
_LIT = "L"
_DEC = "D"


class SddManager:
    """Compiler state for one vtree: arena, unique table, apply cache."""

    def __init__(self, vtree: Vtree):
        self.vtree = vtree
        # node payloads: ("C", bool, None) | ("L", literal, leaf_pos) | ("D", elements, pos)
        self._nodes = [(_CONST, False, None), (_CONST, True, None)]
        self._unique = {}
        self._lit_ids = {}
        self._neg = {FALSE_ID: TRUE_ID, TRUE_ID: FALSE_ID}
        self._apply_cache = {}
        limit = 10000 + 50 * vtree.var_count
        if sys.getrecursionlimit() < limit:
            sys.setrecursionlimit(limit)

    # -- terminals --------------------------------------------------------

    def false(self) -> int:
        return FALSE_ID

    def true(self) -> int:
        return TRUE_ID

    def constant(self, value: bool) -> int:
        return TRUE_ID if value else FALSE_ID

    def literal(self, lit: int) -> int:
        """Canonical terminal for a signed literal; repeated calls share ids."""
        if lit in self._lit_ids:
            return self._lit_ids[lit]
        var = abs(lit)
        if var not in self.vtree.leaf_of:
            raise ValueError(f"variable {var} is not in the manager's vtree")
        self._nodes.append((_LIT, lit, self.vtree.leaf_of[var]))
        node = len(self._nodes) - 1
        self._lit_ids[lit] = node
        return node

    # -- inspection ---------------------------------------------------------

    def is_decision(self, node: int) -> bool:
        return self._nodes[node][0] == _DEC

    def elements(self, node: int) -> tuple:
        kind, payload, _ = self._nodes[node]
        if kind != _DEC:
            raise ValueError(f"node {node} is not a decision node")
        return payload

    def node_literal(self, node: int) -> int:
        kind, payload, _ = self._nodes[node]
        if kind != _LIT:
            raise ValueError(f"node {node} is not a literal")
        return payload

    def vtree_position(self, node: int):
        return self._nodes[node][2]

    def _reachable(self, root: int) -> list:
        """Reachable node ids, children before parents."""
        seen = set()
        order = []
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node in seen:
                continue
            seen.add(node)
            stack.append((node, True))
            if self._nodes[node][0] == _DEC:
                for p, s in self._nodes[node][1]:
                    stack.append((p, False))
                    stack.append((s, False))
        return order

    def size(self, root: int) -> int:
        """Total element count over reachable decision nodes."""
        return sum(
            len(self._nodes[n][1]) for n in self._reachable(root) if self._nodes[n][0] == _DEC
        )

    def live_node_count(self, root: int) -> int:
        return len(self._reachable(root))

    def arena_size(self) -> int:
        return len(self._nodes)

    # -- canonical construction ---------------------------------------------

    def _decision(self, pos: int, elements: Iterable) -> int:
        """Compress, trim and unique an element list at vtree node `pos`."""
        by_sub = {}
        order = []
        for prime, sub in elements:
            if prime == FALSE_ID:
                continue
            if sub in by_sub:
                by_sub[sub] = self.apply(by_sub[sub], prime, DISJOIN)
            else:
                by_sub[sub] = prime
                order.append(sub)
        if not order:
            raise ValueError("decision node with no satisfiable prime")
        if len(order) == 1:
            sub = order[0]
            prime = by_sub[sub]
            if prime != TRUE_ID:
                raise AssertionError("single prime of a decision node must be exhaustive")
            return sub
        if len(order) == 2 and set(order) == {TRUE_ID, FALSE_ID}:
            return by_sub[TRUE_ID]  # (p, true), (not p, false) is just p
        elems = tuple(sorted((by_sub[s], s) for s in order))
        key = (pos, elems)
        node = self._unique.get(key)
        if node is None:
            self._nodes.append((_DEC, elems, pos))
            node = len(self._nodes) - 1
            self._unique[key] = node
        return node

    def _elements_at(self, node: int, pos: int) -> tuple:
        """View `node` as an element list of the decision vtree node `pos`."""
        npos = self._nodes[node][2]
        if npos == pos:
            return self._nodes[node][1]
        if self.vtree.is_ancestor(self.vtree.left[pos], npos):
            return ((node, TRUE_ID), (self.negate(node), FALSE_ID))
        return ((TRUE_ID, node),)

    # -- Boolean operations ---------------------------------------------------

    def apply(self, a: int, b: int, op: str) -> int:
        """Conjoin or disjoin two nodes of this manager, canonically."""
        if op == CONJOIN:
            if a == b:
                return a
            if a == FALSE_ID or b == FALSE_ID:
                return FALSE_ID
            if a == TRUE_ID:
                return b
            if b == TRUE_ID:
                return a
        elif op == DISJOIN:
            if a == b:
                return a
            if a == TRUE_ID or b == TRUE_ID:
                return TRUE_ID
            if a == FALSE_ID:
                return b
            if b == FALSE_ID:
                return a
        else:
            raise ValueError(f"unknown operation {op!r}")
        key = (op, a, b) if a <= b else (op, b, a)
        cached = self._apply_cache.get(key)
        if cached is not None:
            return cached
        va = self._nodes[a][2]
        vb = self._nodes[b][2]
        if va == vb and self.vtree.is_leaf(va):
            # two distinct literals on one variable: opposite polarities
            result = FALSE_ID if op == CONJOIN else TRUE_ID
        else:
            pos = va if va == vb else self.vtree.lca(va, vb)
            out = []
            eb = self._elements_at(b, pos)
            for p1, s1 in self._elements_at(a, pos):
                for p2, s2 in eb:
                    prime = self.apply(p1, p2, CONJOIN)
                    if prime != FALSE_ID:
                        out.append((prime, self.apply(s1, s2, op)))
            result = self._decision(pos, out)
        self._apply_cache[key] = result
        return result

    def conjoin(self, a: int, b: int) -> int:
        return self.apply(a, b, CONJOIN)

    def disjoin(self, a: int, b: int) -> int:
        return self.apply(a, b, DISJOIN)

    def negate(self, node: int) -> int:
        """Complement in time linear in the node count."""
        cached = self._neg.get(node)
        if cached is not None:
            return cached
        kind, payload, pos = self._nodes[node]
        if kind == _LIT:
            result = self.literal(-payload)
        else:
            result = self._decision(pos, tuple((p, self.negate(s)) for p, s in payload))
        self._neg[node] = result
        self._neg[result] = node
        return result

    def condition(self, node: int, term: Mapping[int, bool]) -> int:
        """Fix the variables of `term`; the result no longer depends on them."""
        memo = {}

        def rec(x):
            kind, payload, pos = self._nodes[x]
            if kind == _CONST:
                return x
            got = memo.get(x)
            if got is not None:
                return got
            if kind == _LIT:
                var = abs(payload)
                if var in term:
                    result = self.constant(term[var] == (payload > 0))
                else:
                    result = x
            else:
                out = []
                for p, s in payload:
                    p2 = rec(p)
                    if p2 != FALSE_ID:
                        out.append((p2, rec(s)))
                result = self._decision(pos, out)
            memo[x] = result
            return result

        return rec(node)

    def compile_cnf(self, cnf: Cnf, clause_order: str = "by-vtree-position") -> int:
        """Iterated apply over the clauses; result is the CNF's canonical node.

        The default order sorts clauses by the deepest in-order position of
        their variables, which keeps intermediate conjunctions local to one
        vtree region; correctness does not depend on the order.
        """
        for var in cnf.variables():
            if var not in self.vtree.leaf_of:
                raise ValueError(f"variable {var} is not in the manager's vtree")
        clauses = list(cnf.clauses)
        if clause_order == "by-vtree-position":
            leaf_of = self.vtree.leaf_of
            clauses.sort(
                key=lambda cl: (
                    max((leaf_of[abs(l)] for l in cl), default=-1),
                    min((leaf_of[abs(l)] for l in cl), default=-1),
                )
            )
        elif clause_order != "given":
            raise ValueError(f"unknown clause order {clause_order!r}")
        acc = TRUE_ID
        for clause in clauses:
            node = FALSE_ID
            for lit in clause:
                node = self.disjoin(node, self.literal(lit))
            acc = self.conjoin(acc, node)
            if acc == FALSE_ID:
                break
        return acc

    # -- queries ---------------------------------------------------------------

    def evaluate(self, node: int, term: Mapping[int, bool]) -> bool:
        """Gate-level value of the node under a complete assignment."""
        memo = {}

        def rec(x):
            kind, payload, _ = self._nodes[x]
            if kind == _CONST:
                return payload
            got = memo.get(x)
            if got is not None:
                return got
            if kind == _LIT:
                result = term[abs(payload)] == (payload > 0)
            else:
                result = False
                for p, s in payload:
                    if rec(p):
                        result = rec(s)
                        break
            memo[x] = result
            return result

        return rec(node)

    def model_count(self, node: int) -> int:
        """Exact model count over all manager variables.

        Per-node counts cover the node's own vtree scope; variables skipped
        between a scope and its occupant contribute a factor of two each.
        """
        vtree = self.vtree
        memo = {}

        def span_size(pos):
            first, last = vtree.subtree_leaf_span(pos)
            return last - first + 1

        def scoped(x, pos):
            if x == FALSE_ID:
                return 0
            if x == TRUE_ID:
                return 1 << span_size(pos)
            return rec(x) << (span_size(pos) - span_size(self._nodes[x][2]))

        def rec(x):
            got = memo.get(x)
            if got is not None:
                return got
            kind, payload, pos = self._nodes[x]
            if kind == _LIT:
                result = 1
            else:
                left, right = vtree.left[pos], vtree.right[pos]
                result = sum(scoped(p, left) * scoped(s, right) for p, s in payload)
            memo[x] = result
            return result

        return scoped(node, vtree.root)

    def wmc(self, node: int, weights) -> float:
        """Weighted model count over all manager variables."""
        value, _ = _WeightedPass(self, weights, frozenset()).run(node)
        return value

    def best_model(self, node: int, weights):
        """Maximum-weight model and its weight (an MPE query).

        Ties break toward the first element in canonical order; variables
        never tested take their heavier polarity, positive on a tie.
        """
        if node == FALSE_ID:
            raise SemanticError("unsatisfiable node has no model")
        max_vars = frozenset(range(1, self.vtree.var_count + 1))
        value, term = _WeightedPass(self, weights, max_vars).run(node)
        return term, value

    def marginal_map(self, node: int, weights, max_vars):
        """Maximize over `max_vars`, summing weights over the rest.

        Requires the manager vtree to be constrained for the summed
        variables (they sit under a node reached by right children only)
        unless `max_vars` is empty or covers every variable.  Returns the
        maximizing assignment over `max_vars` and the attained value.
        """
        max_vars = frozenset(max_vars)
        every = frozenset(range(1, self.vtree.var_count + 1))
        if not max_vars <= every:
            raise ValueError("maximization variables outside the vtree")
        if max_vars and max_vars != every:
            summed = every - max_vars
            if self.vtree.right_spine_node_for(summed) is None:
                raise SemanticError(
                    "vtree is not constrained for the summed variables; build the "
                    "manager with a constrained vtree to run this query"
                )
        value, term = _WeightedPass(self, weights, max_vars).run(node)
        return term, value

    def to_nnf(self, node: int) -> NnfCircuit:
        """Multiplexer expansion into a d-DNNF circuit (not smoothed)."""
        circuit = NnfCircuit(self.vtree.var_count)
        memo = {}

        def rec(x):
            got = memo.get(x)
            if got is not None:
                return got
            kind, payload, _ = self._nodes[x]
            if kind == _CONST:
                result = circuit.add_true() if payload else circuit.add_false()
            elif kind == _LIT:
                result = circuit.add_literal(payload)
            else:
                parts = []
                for p, s in payload:
                    parts.append(circuit.add_and((rec(p), rec(s))))
                result = circuit.add_or(tuple(parts))
            memo[x] = result
            return result

        circuit.set_root(rec(node))
        return circuit

    # -- textual format -----------------------------------------------------------

    def write_sdd(self, root: int) -> str:
        """Serialize reachable nodes: `sdd N` header, F/T/L/D lines, root last."""
        order = self._reachable(root)
        renumber = {old: new for new, old in enumerate(order)}
        lines = [f"sdd {len(order)}"]
        for old in order:
            kind, payload, pos = self._nodes[old]
            ident = renumber[old]
            if kind == _CONST:
                lines.append(f"{'T' if payload else 'F'} {ident}")
            elif kind == _LIT:
                lines.append(f"L {ident} {pos} {payload}")
            else:
                parts = [f"D {ident} {pos} {len(payload)}"]
                for p, s in payload:
                    parts.append(f"{renumber[p]} {renumber[s]}")
                lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    def read_sdd(self, text: str) -> int:
        """Parse the sdd format into this manager, renormalizing as needed."""
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("c")]
        if not lines or not lines[0].startswith("sdd"):
            raise FormatError("missing 'sdd N' header")
        head = lines[0].split()
        if len(head) != 2 or not head[1].isdigit():
            raise FormatError(f"malformed header {lines[0]!r}")
        declared = int(head[1])
        by_file_id = {}
        last = None
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split()
            try:
                tag = parts[0]
                ident = int(parts[1])
                if tag == "F" and len(parts) == 2:
                    node = FALSE_ID
                elif tag == "T" and len(parts) == 2:
                    node = TRUE_ID
                elif tag == "L" and len(parts) == 4:
                    pos, lit = int(parts[2]), int(parts[3])
                    node = self.literal(lit)
                    if self._nodes[node][2] != pos:
                        raise FormatError(
                            f"line {lineno}: literal {lit} does not sit at vtree node {pos}"
                        )
                elif tag == "D" and len(parts) >= 4:
                    pos, count = int(parts[2]), int(parts[3])
                    refs = [int(t) for t in parts[4:]]
                    if len(refs) != 2 * count or count == 0:
                        raise FormatError(f"line {lineno}: element count mismatch")
                    if not (
                        0 <= pos < self.vtree.node_count() and not self.vtree.is_leaf(pos)
                    ):
                        raise FormatError(f"line {lineno}: bad vtree position {pos}")
                    elems = []
                    for i in range(count):
                        pref, sref = refs[2 * i], refs[2 * i + 1]
                        if pref not in by_file_id or sref not in by_file_id:
                            raise FormatError(f"line {lineno}: reference to undefined node")
                        elems.append((by_file_id[pref], by_file_id[sref]))
                    for p, s in elems:
                        for child, side in ((p, self.vtree.left[pos]), (s, self.vtree.right[pos])):
                            cpos = self._nodes[child][2]
                            if cpos is not None and not self.vtree.is_ancestor(side, cpos):
                                raise FormatError(
                                    f"line {lineno}: element escapes vtree node {pos}"
                                )
                    node = self._decision(pos, elems)
                else:
                    raise FormatError(f"line {lineno}: malformed line {line!r}")
            except (ValueError, IndexError):
                raise FormatError(f"line {lineno}: malformed line {line!r}") from None
            by_file_id[ident] = node
            last = node
        if len(lines) - 1 != declared:
            raise FormatError(f"header declares {declared} nodes, found {len(lines) - 1}")
        if last is None:
            raise FormatError("empty sdd file")
        return last


class _WeightedPass:
    """One weighted bottom-up pass with per-variable max/sum modes.

    Variables in `max_vars` are maximized (skipped ones contribute
    max(W(x), W(-x))), the rest are summed (skipped ones contribute
    W(x) + W(-x)).  Correct whenever every decision node either contains
    no maximized variable or has all its maximized variables confined to
    prime-side subtrees, which the constrained-vtree check guarantees.
    """

    def __init__(self, mgr: SddManager, weights, max_vars: frozenset):
        self.mgr = mgr
        self.vtree = mgr.vtree
        self.weights = weights
        self.max_vars = max_vars
        leaf_vars = self.vtree._leaf_vars
        self.is_max_rank = [v in max_vars for v in leaf_vars]
        self.rank_factor = []
        for v in leaf_vars:
            w_pos, w_neg = weights[v], weights[-v]
            self.rank_factor.append(max(w_pos, w_neg) if v in max_vars else w_pos + w_neg)
        self.values = {}
        self.choices = {}
        # any maximized variable below a vtree position -> decision combines by max
        self.has_max = [False] * self.vtree.node_count()
        for pos in range(self.vtree.node_count()):
            first, last = self.vtree.subtree_leaf_span(pos)
            self.has_max[pos] = any(self.is_max_rank[first : last + 1])

    def run(self, node: int):
        value = self._scoped(node, self.vtree.root)
        term = {}
        self._extract(node, self.vtree.root, term)
        return value, term

    def _gap_ranks(self, outer_pos, inner_pos):
        o0, o1 = self.vtree.subtree_leaf_span(outer_pos)
        if inner_pos is None:
            return range(o0, o1 + 1)
        i0, i1 = self.vtree.subtree_leaf_span(inner_pos)
        return list(range(o0, i0)) + list(range(i1 + 1, o1 + 1))

    def _gap_factor(self, outer_pos, inner_pos):
        factor = 1.0
        for r in self._gap_ranks(outer_pos, inner_pos):
            factor *= self.rank_factor[r]
        return factor

    def _scoped(self, node, pos):
        if node == FALSE_ID:
            return 0.0
        if node == TRUE_ID:
            return self._gap_factor(pos, None)
        return self._value(node) * self._gap_factor(pos, self.mgr._nodes[node][2])

    def _value(self, node):
        got = self.values.get(node)
        if got is not None:
            return got
        kind, payload, pos = self.mgr._nodes[node]
        if kind == _LIT:
            result = self.weights[payload]
        else:
            left, right = self.vtree.left[pos], self.vtree.right[pos]
            if self.has_max[pos]:
                result, choice = 0.0, 0
                for i, (p, s) in enumerate(payload):
                    v = self._scoped(p, left) * self._scoped(s, right)
                    if v > result:
                        result, choice = v, i
                self.choices[node] = choice
            else:
                result = sum(
                    self._scoped(p, left) * self._scoped(s, right) for p, s in payload
                )
        self.values[node] = result
        return result

    def _fill_gap(self, outer_pos, inner_pos, term):
        for r in self._gap_ranks(outer_pos, inner_pos):
            if self.is_max_rank[r]:
                var = self.vtree._leaf_vars[r]
                term[var] = self.weights[var] >= self.weights[-var]

    def _extract(self, node, pos, term):
        """Record maximizing polarities for max variables under `pos`."""
        if not self.has_max[pos]:
            return
        if node in (FALSE_ID, TRUE_ID):
            self._fill_gap(pos, None, term)
            return
        kind, payload, npos = self.mgr._nodes[node]
        self._fill_gap(pos, npos, term)
        if kind == _LIT:
            var = abs(payload)
            if var in self.max_vars:
                term[var] = payload > 0
            return
        left, right = self.vtree.left[npos], self.vtree.right[npos]
        if self.has_max[npos]:
            self._value(node)  # ensure the choice is recorded
            prime, sub = payload[self.choices.get(node, 0)]
            self._extract(prime, left, term)
            self._extract(sub, right, term)
