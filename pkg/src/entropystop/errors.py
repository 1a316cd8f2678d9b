"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class NumericalError(ArithmeticError):
    """A non-finite value appeared where the computation requires finite ones.

    When raised from a training loop, ``partial_result`` carries whatever
    was recorded up to the failing iteration (may be None).
    """

    def __init__(self, message, partial_result=None):
        super().__init__(message)
        self.partial_result = partial_result


class ContractViolationError(RuntimeError):
    """An API was driven outside its documented call protocol."""


class DegenerateFitError(RuntimeError):
    """Mixture fitting collapsed even after restarts."""


class DegenerateInjectionError(RuntimeError):
    """Outlier injection would be a no-op on this data."""
