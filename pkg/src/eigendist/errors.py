"""Exception and warning types shared across the package."""


class InvalidModelError(ValueError):
    """An ensemble description violates one of its parameter constraints."""


class InvalidPlanError(ValueError):
    """A permutation-grouping plan is inconsistent with the tensor it targets."""


class NumericError(ArithmeticError):
    """A numeric routine produced a non-finite value or failed to converge."""


class CapabilityError(RuntimeError):
    """The request exceeds the supported exact-computation size limits."""


class ConditioningWarning(UserWarning):
    """The model parameters make the kernel numerically ill-conditioned."""
