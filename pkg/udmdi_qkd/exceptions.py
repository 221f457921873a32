class UdMdiError(Exception):
    """Base class for every error raised by this package."""


class DomainError(UdMdiError, ValueError):
    """An input lies outside the domain where the model is defined."""


class ContractError(UdMdiError, ValueError):
    """A structural precondition on an input object was violated."""


class SingularInputError(DomainError):
    """The literal physicality constraint is undefined for eps_x = 0."""


class NumericalDomainError(UdMdiError, ArithmeticError):
    """A quantity left the range where its closed form is finite."""


class PhysicalityError(UdMdiError):
    """Channel parameters violate the Heisenberg physicality constraint."""

    def __init__(self, message: str, link: str | None = None) -> None:
        super().__init__(message)
        self.link = link


class EstimationFailure(UdMdiError):
    """Parameter estimation cannot bound the channel; the run must abort."""


class NoRangeError(UdMdiError):
    """No positive key rate exists, so no maximum distance can be found."""


class AcceptanceError(UdMdiError):
    """A statistical or physical acceptance check failed."""

    def __init__(self, message: str, statistic: str | None = None) -> None:
        super().__init__(message)
        self.statistic = statistic


class ConfigurationError(UdMdiError, RuntimeError):
    """Raised when the run configuration is missing or malformed."""
