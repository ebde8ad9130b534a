"""Exception types shared across the toolkit."""


class KclibError(Exception):
    """Base class for all toolkit errors."""


class FormatError(KclibError):
    """Malformed input file or text (DIMACS, nnf, vtree, sdd, JSON, CSV)."""


class SemanticError(KclibError):
    """Input is well-formed but meaningless for the query.

    Examples: evidence with probability zero, a dataset row that
    falsifies the support constraint, MPE of an unsatisfiable circuit.
    """


class CapacityError(KclibError):
    """A desk-scale limit was exceeded (exhaustive routines only)."""
