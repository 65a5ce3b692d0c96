"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class GridMismatchError(ValueError):
    """Operands live on different grids."""


class AlignmentError(ValueError):
    """Requested window is not aligned to grid nodes."""

    def __init__(self, msg, nearest=None):
        super().__init__(msg)
        self.nearest = nearest


class TableRangeError(ValueError):
    """Tabulated source evaluated outside its node range."""


class CoercivityError(ValueError):
    """Coercivity certificate failed (envelope never reaches the cutoff)."""


class BlowUpError(RuntimeError):
    """Explicit update produced non-finite values or the gradient guard fired."""

    def __init__(self, msg, t=None, node=None, max_gradient=None):
        super().__init__(msg)
        self.t = t
        self.node = node
        self.max_gradient = max_gradient


class StagnationError(RuntimeError):
    """Eigenvalue iteration failed to reach the requested residual."""


class BracketInconsistencyError(RuntimeError):
    """Upper and lower ergodic-constant brackets crossed beyond tolerance."""
