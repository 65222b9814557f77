"""Exception hierarchy shared by every module."""


class ExactGateError(Exception):
    """Base class for all library errors."""


# unitary_core
class NotSquare(ExactGateError):
    pass


class NotUnitary(ExactGateError):
    def __init__(self, deviation: float, tol: float):
        super().__init__(f"matrix is not unitary: max|M^dag M - I| = {deviation:.3e} > {tol:.1e}")
        self.deviation = deviation


class NotHermitian(ExactGateError):
    pass


class DimensionMismatch(ExactGateError):
    pass


class FlavorMismatch(ExactGateError):
    pass


class EigSolverFailure(ExactGateError):
    pass


class BranchAmbiguity(ExactGateError):
    pass


class OutOfRange(ExactGateError):
    pass


# bipartite
class UnequalFactors(ExactGateError):
    pass


class NotNormalized(ExactGateError):
    pass


class WitnessSearchFailure(ExactGateError):
    pass


# inverse_free
class InvalidEpsilon(ExactGateError):
    pass


class ScanLimitExceeded(ExactGateError):
    pass


# wordlang
class ContextMismatch(ExactGateError):
    pass


class UnregisteredGenerator(ExactGateError):
    pass


# chart / synthesis
class HypothesisViolation(ExactGateError):
    def __init__(self, clause: str, detail: str = ""):
        super().__init__(f"hypothesis violated ({clause}): {detail}" if detail else f"hypothesis violated ({clause})")
        self.clause = clause


class SpanFailure(ExactGateError):
    pass


class NoConvergence(ExactGateError):
    def __init__(self, message: str, residual: float = float("nan"), factor: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.factor = factor


class SingularJacobian(ExactGateError):
    pass


class NeighborhoodCollapse(ExactGateError):
    pass


class PrimitiveGate(ExactGateError):
    pass


class SynthesisBudgetExhausted(ExactGateError):
    def __init__(self, best: float, target: float):
        super().__init__(f"synthesis budget exhausted: best distance {best:.3e} > target {target:.1e}")
        self.best = best


class ToleranceExceeded(ExactGateError):
    def __init__(self, achieved: float, tol: float):
        super().__init__(f"final distance {achieved:.3e} exceeds tolerance {tol:.1e}")
        self.achieved = achieved
