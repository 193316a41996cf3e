"""Exception hierarchy shared by every srkit module."""


class SrkitError(Exception):
    """Base class for all srkit errors."""


class ContractViolation(SrkitError):
    """A numerical invariant or input contract does not hold.

    ``invariant`` names the violated condition so the CLI can report it.
    """

    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant or message


class PreconditionError(ContractViolation):
    pass


class DomainError(ContractViolation):
    """A scalar profile is undefined somewhere on the spectrum it is applied to."""


class GapError(ContractViolation):
    """An eigenvalue sits inside the exclusion band around a spectral cut."""

    def __init__(self, eigenvalue, level, delta, fiber=None):
        where = "" if fiber is None else f" (fiber {fiber})"
        super().__init__(
            f"eigenvalue {eigenvalue!r} lies within {delta:g} of the cut {level!r}{where}",
            invariant="spectral gap",
        )
        self.eigenvalue = eigenvalue
        self.level = level
        self.delta = delta
        self.fiber = fiber


class CertificateError(ContractViolation):
    """An element that must be certified left-invertible is not."""


class UncertifiableLoop(ContractViolation):
    """Consecutive loop samples are too far apart to determine the winding number."""


class BudgetError(SrkitError):
    pass


class FormulaError(SrkitError):
    pass


class ParseError(FormulaError):
    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnboundVariableError(FormulaError):
    pass


class SortError(FormulaError):
    pass
