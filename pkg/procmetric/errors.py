"""Exception types raised across procmetric."""


class ProcmetricError(Exception):
    """Base class for every procmetric error."""


class NonHermitianInput(ProcmetricError, ValueError):
    """Operator failed the Hermitian symmetry check."""


class IndefiniteInput(ProcmetricError, ValueError):
    """Operator has an eigenvalue too negative to be floating-point dust."""


class NonSquareInput(ProcmetricError, ValueError):
    pass


class DimensionMismatch(ProcmetricError, ValueError):
    pass


class AncillaTooSmall(ProcmetricError, ValueError):
    """Ancilla dimension is below the rank of the state being purified."""


class InvalidState(ProcmetricError, ValueError):
    """Vector or matrix is not a valid quantum state."""


class InvalidChoi(ProcmetricError, ValueError):
    """Choi matrix is not PSD or not trace-preserving."""


class NotTracePreserving(ProcmetricError, ValueError):
    pass


class BadBasis(ProcmetricError, ValueError):
    """Operator basis is not orthonormal for its declared kind."""


class NonUnitaryTarget(ProcmetricError, ValueError):
    pass


class NoUnitaryBasis(ProcmetricError, ValueError):
    """No unitary operator basis is available for this dimension."""


class DegenerateSpanningSet(ProcmetricError, ValueError):
    """Input states or observables do not span the operator space."""


class PlanValidationError(ProcmetricError, ValueError):
    """Estimation plan failed its self-validation against the Choi overlap."""


class NonPhysicalInput(ProcmetricError, ValueError):
    """Input operator cannot be prepared as a (scaled) density matrix."""


class InvalidChannelFile(ProcmetricError, ValueError):
    """Channel JSON file failed to parse or violated an invariant."""


class ConvergenceFailure(ProcmetricError, RuntimeError):
    """Optimizer stopped before reaching its gap tolerance."""

    def __init__(self, message: str, final_gap: float | None = None):
        super().__init__(message)
        self.final_gap = final_gap
