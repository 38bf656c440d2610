"""Exception hierarchy shared by the library and the CLI."""


class PbpcError(Exception):
    """Base class for all library errors."""


class InfeasibleInstanceError(PbpcError):
    """Total supply cannot cover the unit demand."""


class InvalidInputError(PbpcError, ValueError):
    """A profile, index or parameter is outside its allowed range."""


class ValidationError(PbpcError):
    """An instance failed validation; ``problems`` lists every violation."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class BudgetExceededError(PbpcError):
    """An exhaustive search would exceed its configured budget."""


class NonFiniteWeightError(PbpcError):
    """Hedge weights became NaN or infinite."""
