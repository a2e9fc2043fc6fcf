"""Exception hierarchy shared by all modules."""


class SigmakError(Exception):
    """Base class for package errors."""


class ConeViolationError(SigmakError, ValueError):
    """An eigenvalue vector left the admissible (Garding or positive) cone."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = [] if nodes is None else list(nodes)


class SpacelikeError(SigmakError, ValueError):
    """Gradient bound |Du| < 1 (or < C~ for solitons) violated."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = [] if nodes is None else list(nodes)


class ConvexityError(SigmakError, ValueError):
    """Discrete Hessian is not positive definite where convexity is required."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = [] if nodes is None else list(nodes)


class ConvergenceError(SigmakError, RuntimeError):
    """Newton iteration, line search or a fit failed to converge."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ProfileRangeError(SigmakError, ValueError):
    """A radial profile was evaluated outside the range it covers."""


class CalibrationError(SigmakError, RuntimeError):
    """Tilt-magnitude search for the barriers did not succeed."""


class PlanError(SigmakError, ValueError):
    """An exhaustion plan or configuration is inconsistent."""
