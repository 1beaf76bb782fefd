"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter or argument is outside its admissible domain."""


class NumericalError(RuntimeError):
    """A numerical routine produced an unusable value (overflow, sign loss)."""


class OptimError(RuntimeError):
    """An optimizer could not find any admissible point."""
