"""
Exception hierarchy shared by the algebra, module and decomposition layers.
"""


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class DescriptorMismatchError(ToolkitError, ValueError):
    """Operands belong to different algebras/modules or have the wrong shape."""


class NotHermitianError(ToolkitError, ValueError):
    pass


class ConvergenceError(ToolkitError, RuntimeError):
    pass


class HypothesisViolation(ToolkitError, ValueError):
    """A precondition of the construction does not hold (e.g. dim_A W < 2)."""


class ConfigError(ToolkitError, ValueError):
    pass


class InvariantBreach(ToolkitError, RuntimeError):
    """An invariant that should hold by construction failed during a run."""
