"""Exception hierarchy shared by all modules."""


class CflError(Exception):
    """Base class for every error raised by the library."""


class SpecError(CflError, ValueError):
    """A noise specification or model field has invalid parameters."""


class NotEnumerable(CflError):
    """A noise space (or RCM) has a continuous coordinate and cannot be enumerated."""


class UnknownReference(CflError):
    """An expression refers to a name the owning model does not define."""

    def __init__(self, name, context=""):
        self.name = name
        msg = f"unknown reference {name!r}"
        if context:
            msg += f" in {context}"
        super().__init__(msg)


class CyclicGraph(CflError):
    """The structural equations induce a directed cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cyclic graph: " + " -> ".join(self.cycle + self.cycle[:1]))


class MissingTableEntry(CflError):
    """A table lookup was evaluated at an input tuple the table does not cover."""

    def __init__(self, key):
        self.key = key
        super().__init__(f"table has no entry for inputs {key!r}")


class TreatmentOutOfSupport(CflError):
    """The treatment equation produces values outside the declared support."""


class InvalidIntervention(CflError):
    """An intervention assigns a value outside a discrete variable's support."""


class EngineInapplicable(CflError):
    """The requested engine cannot evaluate this model or query exactly."""


class ZeroProbabilityEvidence(CflError):
    """Exact conditioning on an event of probability zero."""


class EmptyAcceptance(CflError):
    """Rejection sampling accepted none of the budgeted draws."""


class PositivityViolation(CflError):
    """Some treatment stratum has no mass where it is needed."""


class SpaceMismatch(CflError):
    """Almost-sure comparison of RCMs that live on different noise spaces."""


class DimensionMismatch(CflError):
    """Laws or RCMs with incompatible dimensions or treatment supports."""


class ParseError(CflError):
    """A scenario file or expression string could not be parsed.

    Attributes:
        field: dotted location of the offending field, if known.
        line: 1-based line number in the source file, if known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field {field}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ValidationError(CflError):
    """A parsed scenario describes an invalid model (cycle, bad reference, ...)."""

    def __init__(self, message, cause=None):
        self.cause = cause
        super().__init__(message)


class InsufficientStratum(UserWarning):
    """A conditioning stratum was too small to test and has been skipped."""


class AssumptionWarning(UserWarning):
    """A computation was requested outside the hypotheses that justify it."""
