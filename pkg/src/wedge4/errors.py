"""Exception types raised by wedge4."""


class Wedge4Error(Exception):
    pass


class AlgebraError(Wedge4Error, ValueError):
    """Invalid input to a pointwise algebra routine."""


class GridError(Wedge4Error, ValueError):
    pass


class SolverError(Wedge4Error):
    """A solve stopped for a diagnosed reason.

    ``reason`` is a short machine-readable tag (``"nonconvergence"``,
    ``"ellipticity lost"``, ...); ``witness`` carries whatever evidence the
    solver collected (grid index, margins, singular values).
    """

    reason = "solver failure"

    def __init__(self, message="", witness=None, report=None):
        super().__init__(f"{self.reason}: {message}" if message else self.reason)
        self.witness = witness
        self.report = report


class NonConvergence(SolverError):
    reason = "nonconvergence"


class EllipticityLost(SolverError):
    reason = "ellipticity lost"


class LeftPositiveCone(SolverError):
    reason = "left the positive cone"


class ClassVolumeMismatch(SolverError):
    reason = "class/volume mismatch"


class UnexpectedKernel(SolverError):
    reason = "unexpected kernel"
