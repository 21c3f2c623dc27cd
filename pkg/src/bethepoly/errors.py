"""Exception hierarchy shared by every module."""

from __future__ import annotations


class BetheError(Exception):
    """Base class for all library errors."""


class InvalidGraph(BetheError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid factor graph: {lines}")


class ParseError(BetheError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class NotBipartite(BetheError):
    pass


class BudgetExceeded(BetheError):
    pass


class ZeroPartition(BetheError):
    pass


class NormalizeZero(BetheError):
    pass


class LabelClash(BetheError):
    pass


class MissingLabel(BetheError):
    pass


class DimensionMismatch(BetheError):
    pass


class AllZeroTable(BetheError):
    pass


class InfeasibleEverywhere(BetheError):
    def __init__(self, message: str, witnesses=()):
        self.witnesses = list(witnesses)
        super().__init__(message)


class LocalAgreementViolated(BetheError):
    pass


class ZeroMessage(BetheError):
    pass


class ZeroBelief(BetheError):
    pass


class BoundaryPoint(BetheError):
    pass


class ZeroConditioning(BetheError):
    pass


class HypothesisViolated(BetheError):
    pass


class NoSupportMatching(BetheError):
    pass
