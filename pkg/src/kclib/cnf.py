"""CNF formulas, complete/partial assignments, literal weights, DIMACS I/O.

Variables are positive integers 1..var_count.  A literal is a signed
integer in the DIMACS convention: +v for the positive literal, -v for the
negative one.  A term (partial assignment) is a dict mapping variables to
booleans.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import FormatError

Term = dict  # var -> bool; partial or complete assignment


def literal(var: int, value: bool = True) -> int:
    """Signed literal for a variable/value pair."""
    return var if value else -var


def term_to_literals(term: Mapping[int, bool]) -> list[int]:
    """Literals of a term, sorted by variable."""
    return [literal(v, b) for v, b in sorted(term.items())]


def all_terms(var_count: int) -> Iterator[dict]:
    """All complete assignments over 1..var_count in lexicographic order.

    Lexicographic means variable 1 is the most significant bit and
    False sorts before True.
    """
    variables = range(1, var_count + 1)
    for bits in itertools.product((False, True), repeat=var_count):
        yield dict(zip(variables, bits))


@dataclass
class Cnf:
    """A formula in conjunctive normal form over 1..var_count.

    An empty clause list is the constant-true formula; a clause that is
    itself empty makes the formula unsatisfiable.
    """

    var_count: int
    clauses: list = field(default_factory=list)

    def __post_init__(self):
        if self.var_count < 0:
            raise ValueError("negative variable count")
        self.clauses = [tuple(cl) for cl in self.clauses]
        for cl in self.clauses:
            for lit in cl:
                if lit == 0 or abs(lit) > self.var_count:
                    raise ValueError(f"literal {lit} out of range 1..{self.var_count}")

    def satisfied_by(self, term: Mapping[int, bool]) -> bool:
        """Direct clause-by-clause check; `term` must bind every clause variable."""
        for cl in self.clauses:
            if not any(term[abs(lit)] == (lit > 0) for lit in cl):
                return False
        return True

    def variables(self) -> set:
        return {abs(lit) for cl in self.clauses for lit in cl}

    def models(self, limit: int | None = None) -> Iterator[dict]:
        """Satisfying complete assignments by exhaustive enumeration."""
        n = 0
        for term in all_terms(self.var_count):
            if self.satisfied_by(term):
                yield term
                n += 1
                if limit is not None and n >= limit:
                    return


def parse_dimacs(text: str) -> Cnf:
    """Parse DIMACS CNF text (`p cnf V C` header, zero-terminated clauses)."""
    var_count = None
    declared = None
    clauses = []
    current = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            if var_count is not None:
                raise FormatError(f"line {lineno}: duplicate problem line")
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise FormatError(f"line {lineno}: malformed header {line!r}")
            try:
                var_count, declared = int(parts[2]), int(parts[3])
            except ValueError:
                raise FormatError(f"line {lineno}: malformed header {line!r}") from None
            if var_count < 0 or declared < 0:
                raise FormatError(f"line {lineno}: negative counts in header")
            continue
        if var_count is None:
            raise FormatError(f"line {lineno}: clause before 'p cnf' header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise FormatError(f"line {lineno}: bad token {tok!r}") from None
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                if abs(lit) > var_count:
                    raise FormatError(f"line {lineno}: literal {lit} out of range")
                current.append(lit)
    if var_count is None:
        raise FormatError("missing 'p cnf' header")
    if current:
        raise FormatError("last clause not terminated by 0")
    if len(clauses) != declared:
        raise FormatError(f"header declares {declared} clauses, found {len(clauses)}")
    return Cnf(var_count, clauses)


def write_dimacs(cnf: Cnf) -> str:
    """Serialize to DIMACS, preserving clause order bit-exactly."""
    lines = [f"p cnf {cnf.var_count} {len(cnf.clauses)}"]
    for cl in cnf.clauses:
        lines.append(" ".join(str(lit) for lit in cl) + " 0")
    return "\n".join(lines) + "\n"


class WeightMap:
    """Total map from literals to nonnegative finite weights, default 1.0."""

    def __init__(self, weights: Mapping[int, float] | None = None):
        self._w = {}
        if weights:
            for lit, w in weights.items():
                self[int(lit)] = w

    def __getitem__(self, lit: int) -> float:
        return self._w.get(lit, 1.0)

    def __setitem__(self, lit: int, w: float):
        w = float(w)
        if lit == 0:
            raise ValueError("literal 0 is not a valid key")
        if not math.isfinite(w) or w < 0.0:
            raise ValueError(f"weight for literal {lit} must be finite and >= 0, got {w}")
        self._w[lit] = w

    def copy(self) -> "WeightMap":
        return WeightMap(self._w)

    def with_zeroed(self, literals: Iterable[int]) -> "WeightMap":
        """Copy with the given literals (not their complements) weighted 0."""
        out = self.copy()
        for lit in literals:
            out[lit] = 0.0
        return out

    def term_weight(self, term: Mapping[int, bool]) -> float:
        """Product of the weights of the term's literals."""
        out = 1.0
        for v, b in term.items():
            out *= self[literal(v, b)]
        return out

    def explicit_items(self):
        return self._w.items()

    def __eq__(self, other):
        if not isinstance(other, WeightMap):
            return NotImplemented
        keys = set(self._w) | set(other._w)
        return all(self[k] == other[k] for k in keys)

    def __repr__(self):
        return f"WeightMap({self._w!r})"
