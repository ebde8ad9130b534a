"""NNF circuits: arena representation, tractability checks, linear-time queries.

A circuit is a rooted DAG stored in an append-only arena where children
always precede parents, so every query is a single indexed pass.  Negation
appears only on literal leaves.  Queries that need decomposability,
determinism or smoothness trust the caller by default; pass ``check=True``
to validate first (validation is for tests and imported circuits, not hot
paths).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .cnf import all_terms
from .errors import CapacityError, FormatError, SemanticError

TRUE = "T"
FALSE = "F"
LIT = "L"
AND = "A"
OR = "O"

ENUMERATION_LIMIT = 24  # exhaustive routines refuse beyond this many variables


class NnfCircuit:
    """Shared-subgraph Boolean circuit in negation normal form.

    Nodes are (kind, payload) pairs: payload is a signed literal for
    ``LIT`` nodes, a tuple of child indices for ``AND``/``OR``, else None.
    Circuits are immutable once the root is set; construction is
    single-threaded, queries are read-only and thread-safe.
    """

    def __init__(self, var_count: int):
        if var_count < 0:
            raise ValueError("negative variable count")
        self.var_count = var_count
        self.nodes = []
        self.root = None

    # -- construction ---------------------------------------------------

    def _add(self, kind, payload) -> int:
        self.nodes.append((kind, payload))
        return len(self.nodes) - 1

    def add_true(self) -> int:
        return self._add(TRUE, None)

    def add_false(self) -> int:
        return self._add(FALSE, None)

    def add_literal(self, lit: int) -> int:
        if lit == 0 or abs(lit) > self.var_count:
            raise ValueError(f"literal {lit} out of range")
        return self._add(LIT, lit)

    def add_and(self, children: Iterable[int]) -> int:
        return self._add(AND, self._check_children(children))

    def add_or(self, children: Iterable[int]) -> int:
        return self._add(OR, self._check_children(children))

    def _check_children(self, children) -> tuple:
        children = tuple(children)
        for c in children:
            if not 0 <= c < len(self.nodes):
                raise ValueError(f"child index {c} not yet defined")
        return children

    def set_root(self, idx: int):
        if not 0 <= idx < len(self.nodes):
            raise ValueError(f"root index {idx} out of range")
        self.root = idx

    # -- basic structure ------------------------------------------------

    def node_count(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return sum(len(p) for k, p in self.nodes if k in (AND, OR))

    def variable_masks(self) -> list:
        """Bitmask of mentioned variables per node (bit v-1 for variable v)."""
        masks = []
        for kind, payload in self.nodes:
            if kind == LIT:
                masks.append(1 << (abs(payload) - 1))
            elif kind in (AND, OR):
                m = 0
                for c in payload:
                    m |= masks[c]
                masks.append(m)
            else:
                masks.append(0)
        return masks

    def mentioned_variables(self) -> set:
        mask = self.variable_masks()[self.root]
        return {v for v in range(1, self.var_count + 1) if mask >> (v - 1) & 1}


def _require_root(circuit: NnfCircuit):
    if circuit.root is None:
        raise ValueError("circuit has no root")


# -- evaluation and conditioning -----------------------------------------


def evaluate(circuit: NnfCircuit, term: Mapping[int, bool]) -> bool:
    """Value of the root under standard gate semantics.

    `term` must bind every variable the circuit mentions.
    """
    _require_root(circuit)
    values = []
    for kind, payload in circuit.nodes:
        if kind == TRUE:
            values.append(True)
        elif kind == FALSE:
            values.append(False)
        elif kind == LIT:
            var = abs(payload)
            if var not in term:
                raise ValueError(f"assignment does not bind variable {var}")
            values.append(term[var] == (payload > 0))
        elif kind == AND:
            values.append(all(values[c] for c in payload))
        else:
            values.append(any(values[c] for c in payload))
    return values[circuit.root]


def condition(circuit: NnfCircuit, term: Mapping[int, bool]) -> NnfCircuit:
    """Replace literal leaves bound by `term` with constants.

    The arena shape and indices are preserved, so node indices of the
    input remain valid in the output.
    """
    _require_root(circuit)
    out = NnfCircuit(circuit.var_count)
    for kind, payload in circuit.nodes:
        if kind == LIT and abs(payload) in term:
            agrees = term[abs(payload)] == (payload > 0)
            out._add(TRUE if agrees else FALSE, None)
        else:
            out._add(kind, payload)
    out.set_root(circuit.root)
    return out


# -- tractability properties ----------------------------------------------


@dataclass
class PropertyReport:
    """Outcome of a structural property check."""

    ok: bool
    node: int | None = None
    variable: int | None = None
    witness: dict | None = None

    def __bool__(self):
        return self.ok


def check_decomposability(circuit: NnfCircuit) -> PropertyReport:
    """Do the subcircuits feeding each and-gate share no variables?"""
    _require_root(circuit)
    masks = circuit.variable_masks()
    for idx, (kind, payload) in enumerate(circuit.nodes):
        if kind != AND:
            continue
        seen = 0
        for c in payload:
            overlap = seen & masks[c]
            if overlap:
                return PropertyReport(False, node=idx, variable=overlap.bit_length())
            seen |= masks[c]
    return PropertyReport(True)


def check_determinism(circuit: NnfCircuit) -> PropertyReport:
    """Exhaustively verify at most one or-gate input is high per circuit input.

    There is no known polytime structural test on general NNF, so this is
    an enumeration utility gated at 24 variables.
    """
    _require_root(circuit)
    if circuit.var_count > ENUMERATION_LIMIT:
        raise CapacityError(
            f"determinism check enumerates 2^{circuit.var_count} inputs; "
            f"limit is {ENUMERATION_LIMIT} variables"
        )
    nodes = circuit.nodes
    for term in all_terms(circuit.var_count):
        values = []
        for idx, (kind, payload) in enumerate(nodes):
            if kind == TRUE:
                values.append(True)
            elif kind == FALSE:
                values.append(False)
            elif kind == LIT:
                values.append(term[abs(payload)] == (payload > 0))
            elif kind == AND:
                values.append(all(values[c] for c in payload))
            else:
                high = sum(1 for c in payload if values[c])
                if high > 1:
                    return PropertyReport(False, node=idx, witness=dict(term))
                values.append(high == 1)
    return PropertyReport(True)


def check_smoothness(circuit: NnfCircuit) -> PropertyReport:
    """Do all children of each or-gate mention the same variables?"""
    _require_root(circuit)
    masks = circuit.variable_masks()
    for idx, (kind, payload) in enumerate(circuit.nodes):
        if kind == OR and payload:
            first = masks[payload[0]]
            for c in payload[1:]:
                if masks[c] != first:
                    diff = masks[c] ^ first
                    return PropertyReport(False, node=idx, variable=diff.bit_length())
    return PropertyReport(True)


def smooth(circuit: NnfCircuit) -> NnfCircuit:
    """Equip every or-gate child with (X or not-X) gadgets for its missing variables.

    The function, decomposability and determinism are preserved.  Gadgets
    are deduplicated through a per-variable cache, and an already smooth
    circuit comes back with zero gadgets added.
    """
    _require_root(circuit)
    masks = circuit.variable_masks()
    out = NnfCircuit(circuit.var_count)
    gadget = {}
    lit_cache = {}

    def get_lit(lit):
        if lit not in lit_cache:
            lit_cache[lit] = out.add_literal(lit)
        return lit_cache[lit]

    def get_gadget(var):
        if var not in gadget:
            gadget[var] = out.add_or((get_lit(var), get_lit(-var)))
        return gadget[var]

    mapping = []
    for idx, (kind, payload) in enumerate(circuit.nodes):
        if kind == LIT:
            mapping.append(get_lit(payload))
        elif kind in (TRUE, FALSE):
            mapping.append(out._add(kind, None))
        elif kind == AND:
            mapping.append(out.add_and(tuple(mapping[c] for c in payload)))
        else:
            union = masks[idx]
            children = []
            for c in payload:
                missing = union & ~masks[c]
                new_c = mapping[c]
                if missing:
                    extra = [
                        get_gadget(v)
                        for v in range(1, circuit.var_count + 1)
                        if missing >> (v - 1) & 1
                    ]
                    new_c = out.add_and((new_c, *extra))
                children.append(new_c)
            mapping.append(out.add_or(tuple(children)))
    out.set_root(mapping[circuit.root])
    return out


def _check_countable(circuit: NnfCircuit):
    report = check_decomposability(circuit)
    if not report.ok:
        raise SemanticError(
            f"circuit is not decomposable: and-node {report.node} repeats variable {report.variable}"
        )
    report = check_smoothness(circuit)
    if not report.ok:
        raise SemanticError(f"circuit is not smooth at or-node {report.node}")
    if circuit.var_count <= ENUMERATION_LIMIT:
        report = check_determinism(circuit)
        if not report.ok:
            raise SemanticError(f"circuit is not deterministic at or-node {report.node}")


# -- counting passes -------------------------------------------------------


def model_count(circuit: NnfCircuit, check: bool = False, over_vars: int | None = None) -> int:
    """Number of satisfying complete assignments of a smooth d-DNNF.

    One bottom-up pass: 1 at literals, sum at or, product at and.
    Counts over `over_vars` variables (default: the circuit's declared
    count); variables the root never mentions contribute a factor of two
    each.  Exact at any size thanks to arbitrary-precision integers.
    """
    _require_root(circuit)
    if check:
        _check_countable(circuit)
    masks = circuit.variable_masks()
    total = circuit.var_count if over_vars is None else over_vars
    mentioned = masks[circuit.root].bit_count()
    if total < mentioned:
        raise ValueError(f"cannot count over {total} variables: root mentions {mentioned}")
    counts = []
    for kind, payload in circuit.nodes:
        if kind == TRUE:
            counts.append(1)
        elif kind == FALSE:
            counts.append(0)
        elif kind == LIT:
            counts.append(1)
        elif kind == AND:
            cnt = 1
            for c in payload:
                cnt *= counts[c]
            counts.append(cnt)
        else:
            counts.append(sum(counts[c] for c in payload))
    return counts[circuit.root] << (total - mentioned)


def _free_variables(circuit: NnfCircuit, masks) -> list:
    root_mask = masks[circuit.root]
    return [v for v in range(1, circuit.var_count + 1) if not root_mask >> (v - 1) & 1]


def wmc(circuit: NnfCircuit, weights, check: bool = False, log_space: bool = False) -> float:
    """Weighted model count of a smooth d-DNNF over all declared variables.

    Sum over satisfying assignments of the product of literal weights.
    With unit weights this equals ``model_count``.  ``log_space=True``
    computes in the log domain (returns the log-count) for workloads
    whose products underflow 64-bit floats.
    """
    _require_root(circuit)
    if check:
        _check_countable(circuit)
    masks = circuit.variable_masks()
    if not log_space:
        values = []
        for kind, payload in circuit.nodes:
            if kind == TRUE:
                values.append(1.0)
            elif kind == FALSE:
                values.append(0.0)
            elif kind == LIT:
                values.append(weights[payload])
            elif kind == AND:
                val = 1.0
                for c in payload:
                    val *= values[c]
                values.append(val)
            else:
                values.append(sum(values[c] for c in payload))
        result = values[circuit.root]
        for v in _free_variables(circuit, masks):
            result *= weights[v] + weights[-v]
        return result

    neg_inf = float("-inf")

    def ln(x):
        return math.log(x) if x > 0.0 else neg_inf

    values = []
    for kind, payload in circuit.nodes:
        if kind == TRUE:
            values.append(0.0)
        elif kind == FALSE:
            values.append(neg_inf)
        elif kind == LIT:
            values.append(ln(weights[payload]))
        elif kind == AND:
            values.append(sum(values[c] for c in payload))
        else:
            terms = [values[c] for c in payload]
            m = max(terms, default=neg_inf)
            if m == neg_inf:
                values.append(neg_inf)
            else:
                values.append(m + math.log(sum(math.exp(t - m) for t in terms)))
    result = values[circuit.root]
    for v in _free_variables(circuit, masks):
        result += ln(weights[v] + weights[-v])
    return result


def marginals(circuit: NnfCircuit, weights, check: bool = False) -> dict:
    """Weighted count of models containing each literal.

    One upward value pass plus one downward derivative pass:
    marginal(l) = W(l) * d(wmc)/d(W(l)).  Returns a dict over all
    2*var_count literals.
    """
    _require_root(circuit)
    if check:
        _check_countable(circuit)
    masks = circuit.variable_masks()
    nodes = circuit.nodes

    values = []
    for kind, payload in nodes:
        if kind == TRUE:
            values.append(1.0)
        elif kind == FALSE:
            values.append(0.0)
        elif kind == LIT:
            values.append(weights[payload])
        elif kind == AND:
            val = 1.0
            for c in payload:
                val *= values[c]
            values.append(val)
        else:
            values.append(sum(values[c] for c in payload))

    free = _free_variables(circuit, masks)
    gap_factor = 1.0
    for v in free:
        gap_factor *= weights[v] + weights[-v]

    deriv = [0.0] * len(nodes)
    deriv[circuit.root] = 1.0
    for idx in range(len(nodes) - 1, -1, -1):
        d = deriv[idx]
        if d == 0.0:
            continue
        kind, payload = nodes[idx]
        if kind == OR:
            for c in payload:
                deriv[c] += d
        elif kind == AND:
            k = len(payload)
            prefix = [1.0] * (k + 1)
            for i, c in enumerate(payload):
                prefix[i + 1] = prefix[i] * values[c]
            suffix = 1.0
            for i in range(k - 1, -1, -1):
                deriv[payload[i]] += d * prefix[i] * suffix
                suffix *= values[payload[i]]

    out = {}
    for v in range(1, circuit.var_count + 1):
        out[v] = 0.0
        out[-v] = 0.0
    for idx, (kind, payload) in enumerate(nodes):
        if kind == LIT:
            out[payload] += weights[payload] * deriv[idx]
    for lit in list(out):
        out[lit] *= gap_factor
    base = values[circuit.root]
    for v in free:
        others = 1.0
        for u in free:
            if u != v:
                others *= weights[u] + weights[-u]
        out[v] = base * weights[v] * others
        out[-v] = base * weights[-v] * others
    return out


def satisfiable(circuit: NnfCircuit) -> bool:
    """Satisfiability of a decomposable circuit in one bottom-up pass."""
    _require_root(circuit)
    values = []
    for kind, payload in circuit.nodes:
        if kind == TRUE:
            values.append(True)
        elif kind == FALSE:
            values.append(False)
        elif kind == LIT:
            values.append(True)
        elif kind == AND:
            values.append(all(values[c] for c in payload))
        else:
            values.append(any(values[c] for c in payload))
    return values[circuit.root]


def max_weight_model(circuit: NnfCircuit, weights, check: bool = False):
    """Best satisfying assignment of a smooth d-DNNF under product weights.

    Upward max/product pass, then downward argmax extraction.  Ties break
    toward the lowest-index child; variables the root never mentions take
    their heavier polarity (positive on a tie).  Returns (term, weight).
    """
    _require_root(circuit)
    if check:
        _check_countable(circuit)
    if not satisfiable(circuit):
        raise SemanticError("unsatisfiable circuit has no model")
    nodes = circuit.nodes
    values = []
    for kind, payload in nodes:
        if kind == TRUE:
            values.append(1.0)
        elif kind == FALSE:
            values.append(0.0)
        elif kind == LIT:
            values.append(weights[payload])
        elif kind == AND:
            val = 1.0
            for c in payload:
                val *= values[c]
            values.append(val)
        else:
            values.append(max((values[c] for c in payload), default=0.0))

    term = {}
    stack = [circuit.root]
    while stack:
        idx = stack.pop()
        kind, payload = nodes[idx]
        if kind == LIT:
            term[abs(payload)] = payload > 0
        elif kind == AND:
            stack.extend(payload)
        elif kind == OR:
            best_val = max(values[c] for c in payload)
            stack.append(min(c for c in payload if values[c] == best_val))

    weight = values[circuit.root]
    masks = circuit.variable_masks()
    for v in _free_variables(circuit, masks):
        positive = weights[v] >= weights[-v]
        term[v] = positive
        weight *= weights[v] if positive else weights[-v]
    return term, weight


def enumerate_models(circuit: NnfCircuit, limit: int | None = None) -> list:
    """All satisfying complete assignments in lexicographic order.

    Exhaustive over 2^var_count inputs; gated at 24 variables.
    """
    _require_root(circuit)
    if circuit.var_count > ENUMERATION_LIMIT:
        raise CapacityError(f"model enumeration is limited to {ENUMERATION_LIMIT} variables")
    out = []
    for term in all_terms(circuit.var_count):
        if evaluate(circuit, term):
            out.append(term)
            if limit is not None and len(out) >= limit:
                break
    return out


# -- c2d text format -------------------------------------------------------


def parse_nnf(text: str) -> NnfCircuit:
    """Parse the c2d circuit format (`nnf N E V`; `L`, `A`, `O` lines)."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("c")]
    if not lines or not lines[0].startswith("nnf"):
        raise FormatError("missing 'nnf N E V' header")
    head = lines[0].split()
    if len(head) != 4:
        raise FormatError(f"malformed header {lines[0]!r}")
    try:
        n_nodes, n_edges, n_vars = int(head[1]), int(head[2]), int(head[3])
    except ValueError:
        raise FormatError(f"malformed header {lines[0]!r}") from None
    circuit = NnfCircuit(n_vars)
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        idx = len(circuit.nodes)
        try:
            if parts[0] == "L":
                if len(parts) != 2:
                    raise FormatError(f"line {lineno}: malformed literal line")
                circuit.add_literal(int(parts[1]))
            elif parts[0] in ("A", "O"):
                if parts[0] == "A":
                    count, children = int(parts[1]), [int(t) for t in parts[2:]]
                else:
                    count, children = int(parts[2]), [int(t) for t in parts[3:]]
                if len(children) != count:
                    raise FormatError(f"line {lineno}: child count mismatch")
                for c in children:
                    if c >= idx or c < 0:
                        raise FormatError(f"line {lineno}: forward reference to node {c}")
                if parts[0] == "A":
                    if count == 0:
                        circuit.add_true()
                    else:
                        circuit.add_and(children)
                else:
                    if count == 0:
                        circuit.add_false()
                    else:
                        circuit.add_or(children)
            else:
                raise FormatError(f"line {lineno}: unknown node type {parts[0]!r}")
        except (ValueError, IndexError):
            raise FormatError(f"line {lineno}: malformed line {line!r}") from None
    if len(circuit.nodes) != n_nodes:
        raise FormatError(f"header declares {n_nodes} nodes, found {len(circuit.nodes)}")
    if circuit.edge_count() != n_edges:
        raise FormatError(f"header declares {n_edges} edges, found {circuit.edge_count()}")
    if not circuit.nodes:
        raise FormatError("empty circuit")
    circuit.set_root(len(circuit.nodes) - 1)
    return circuit


def write_nnf(circuit: NnfCircuit) -> str:
    """Serialize reachable nodes in the c2d format, root last."""
    _require_root(circuit)
    reachable = set()
    stack = [circuit.root]
    while stack:
        idx = stack.pop()
        if idx in reachable:
            continue
        reachable.add(idx)
        kind, payload = circuit.nodes[idx]
        if kind in (AND, OR):
            stack.extend(payload)
    order = sorted(reachable)
    renumber = {old: new for new, old in enumerate(order)}
    body = []
    edges = 0
    for old in order:
        kind, payload = circuit.nodes[old]
        if kind == TRUE:
            body.append("A 0")
        elif kind == FALSE:
            body.append("O 0 0")
        elif kind == LIT:
            body.append(f"L {payload}")
        elif kind == AND:
            edges += len(payload)
            body.append("A " + " ".join([str(len(payload))] + [str(renumber[c]) for c in payload]))
        else:
            edges += len(payload)
            body.append(
                "O 0 " + " ".join([str(len(payload))] + [str(renumber[c]) for c in payload])
            )
    header = f"nnf {len(order)} {edges} {circuit.var_count}"
    return "\n".join([header] + body) + "\n"


def from_cnf_naive(cnf) -> NnfCircuit:
    """Direct CNF-to-circuit transliteration (not decomposable in general).

    Useful for evaluation-style oracles; counting queries need a compiler.
    """
    circuit = NnfCircuit(cnf.var_count)
    lit_ids = {}
    clause_ids = []
    for clause in cnf.clauses:
        for lit in clause:
            if lit not in lit_ids:
                lit_ids[lit] = circuit.add_literal(lit)
        if clause:
            clause_ids.append(circuit.add_or(tuple(lit_ids[lit] for lit in clause)))
        else:
            clause_ids.append(circuit.add_false())
    if clause_ids:
        circuit.set_root(circuit.add_and(tuple(clause_ids)))
    else:
        circuit.set_root(circuit.add_true())
    return circuit
