class MecAllocError(Exception):
    """Base class for solver errors."""


class DomainError(MecAllocError, ValueError):
    """An argument lies outside the domain of a formula."""


class InfeasibleError(MecAllocError):
    """No allocation meets the deadline."""


class SizeError(MecAllocError, ValueError):
    """Problem too large for an exhaustive routine."""


class FormatError(MecAllocError, ValueError):
    """Malformed instance, config or result file."""
