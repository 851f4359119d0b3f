"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or schema."""


class InfeasibleError(ValueError):
    """No selection satisfies the length constraint."""


class ExhaustedError(RuntimeError):
    """Every candidate query pair has already been asked."""


class StageError(RuntimeError):
    """Operation attempted outside its session stage."""


class ConflictError(RuntimeError):
    """Submitted feedback does not match the outstanding query."""
