"""Exception types shared across the package."""


class OutsideStripError(ValueError):
    """Complex energy lies outside the analyticity strip |Im z| < lambda."""


class EnclosureError(RuntimeError):
    """Chebyshev spectral enclosure violated (detected by norm drift)."""


class SolverError(RuntimeError):
    """Dense symmetric eigensolver failed to converge."""


class CapExceededError(RuntimeError):
    """Matrix dimension exceeds the configured dense-solver cap."""
