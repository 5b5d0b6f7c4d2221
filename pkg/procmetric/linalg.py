"""Dense complex linear algebra and the elementary quantum-state types.

Everything here is a pure function of its arguments. Matrices are plain
``numpy`` arrays of ``complex128``; the state types below are thin frozen
wrappers that validate their invariants once, at construction.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    AncillaTooSmall,
    DimensionMismatch,
    IndefiniteInput,
    InvalidState,
    NonHermitianInput,
    NonSquareInput,
    NonUnitaryTarget,
)
from .telemetry import logfire

ComplexMatrix = NDArray[np.complex128]
RealVector = NDArray[np.float64]
SeedLike = int | np.random.Generator | np.random.SeedSequence | None

HERMITIAN_ATOL = 1e-12
EIG_HERMITIAN_ATOL = 1e-9
TRACE_ATOL = 1e-10
PSD_SILENT_CLAMP = -1e-10  # eigenvalues in [-1e-10, 0) are floating-point dust
PSD_HARD_LIMIT = -1e-6  # below this the input is genuinely indefinite
RANK_ATOL = 1e-12
UNITARY_ATOL = 1e-10


def as_generator(seed: SeedLike) -> np.random.Generator:
    """Return a numpy Generator; an existing Generator is passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_matrix(m: ArrayLike) -> ComplexMatrix:
    """Coerce to a finite 2-D complex array."""
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr


def _require_square(m: ComplexMatrix) -> None:
    if m.shape[0] != m.shape[1]:
        raise NonSquareInput(f"expected a square matrix, got shape {m.shape}")


def dagger(m: ArrayLike) -> ComplexMatrix:
    return np.conjugate(np.asarray(m)).T


def is_hermitian(m: ArrayLike, atol: float = HERMITIAN_ATOL) -> bool:
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    return bool(np.max(np.abs(arr - dagger(arr)), initial=0.0) <= atol)


def _check_hermitian(m: ComplexMatrix, atol: float) -> None:
    _require_square(m)
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if not is_hermitian(m, atol * scale):
        raise NonHermitianInput(
            f"matrix is not Hermitian (max |M - M^dag| = {np.max(np.abs(m - dagger(m))):.3e})"
        )


def hermitian_eig(m: ArrayLike) -> tuple[RealVector, ComplexMatrix]:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues come back in descending order (ties keep the solver's
    order). Each eigenvector column is phase-fixed so that its
    largest-magnitude entry is real and nonnegative.
    """
    arr = as_matrix(m)
    _check_hermitian(arr, EIG_HERMITIAN_ATOL)
    return _eigh_desc(arr)


def _eigh_desc(arr: ComplexMatrix) -> tuple[RealVector, ComplexMatrix]:
    hermitian = (arr + dagger(arr)) / 2
    evals, evecs = np.linalg.eigh(hermitian)
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    evecs = evecs[:, order]
    pivots = np.argmax(np.abs(evecs), axis=0)
    phases = evecs[pivots, np.arange(evecs.shape[1])]
    phases = phases / np.where(np.abs(phases) > 0, np.abs(phases), 1.0)
    evecs = evecs * np.conjugate(phases)[np.newaxis, :]
    return evals, evecs


def _clamp_spectrum(evals: RealVector) -> RealVector:
    lowest = float(evals.min(initial=0.0))
    if lowest < PSD_HARD_LIMIT:
        raise IndefiniteInput(f"minimum eigenvalue {lowest:.3e} is below {PSD_HARD_LIMIT:g}")
    if lowest < PSD_SILENT_CLAMP:
        logfire.warning("Clamping negative eigenvalues", min_eigenvalue=lowest)
    return np.clip(evals, 0.0, None)


def psd_sqrt(m: ArrayLike) -> ComplexMatrix:
    """Principal square root of a positive semidefinite Hermitian matrix."""
    evals, evecs = hermitian_eig(m)
    roots = np.sqrt(_clamp_spectrum(evals))
    return (evecs * roots) @ dagger(evecs)


def trace_norm(m: ArrayLike) -> float:
    """Sum of singular values."""
    arr = as_matrix(m)
    _require_square(arr)
    if is_hermitian(arr, EIG_HERMITIAN_ATOL):
        return float(np.sum(np.abs(np.linalg.eigvalsh((arr + dagger(arr)) / 2))))
    return float(np.sum(np.linalg.svd(arr, compute_uv=False)))


def kron(a: ArrayLike, b: ArrayLike) -> ComplexMatrix:
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def partial_trace(m: ArrayLike, which: Literal["A", "B"], dims: tuple[int, int]) -> ComplexMatrix:
    """Trace out subsystem ``which`` of an operator on A⊗B."""
    arr = as_matrix(m)
    d_a, d_b = dims
    if arr.shape != (d_a * d_b, d_a * d_b):
        raise DimensionMismatch(f"matrix of shape {arr.shape} is not an operator on {d_a}x{d_b}")
    blocks = arr.reshape(d_a, d_b, d_a, d_b)
    if which == "A":
        return np.einsum("ijik->jk", blocks)
    if which == "B":
        return np.einsum("ijkj->ik", blocks)
    raise ValueError(f"which must be 'A' or 'B', got {which!r}")


def permute_subsystems(m: ArrayLike, dims: tuple[int, ...], order: tuple[int, ...]) -> ComplexMatrix:
    """Reorder the tensor factors of an operator.

    ``order[k]`` names which of the original factors lands in position k.
    """
    arr = as_matrix(m)
    total = int(np.prod(dims))
    if arr.shape != (total, total):
        raise DimensionMismatch(f"matrix of shape {arr.shape} does not match subsystem dims {dims}")
    if sorted(order) != list(range(len(dims))):
        raise ValueError(f"order {order} is not a permutation of {len(dims)} factors")
    n = len(dims)
    tensor = arr.reshape(dims + dims)
    axes = list(order) + [n + k for k in order]
    return tensor.transpose(axes).reshape(total, total)


def max_entangled(dim: int) -> NDArray[np.complex128]:
    """|Φ⟩ = Σ_j |j⟩|j⟩ / √d, ancilla factor first."""
    return np.eye(dim, dtype=np.complex128).reshape(-1) / np.sqrt(dim)


def purification_matrix(rho: ComplexMatrix, ancilla_dim: int) -> ComplexMatrix:
    """Amplitude matrix of the canonical purification, shape (ancilla_dim, d).

    Row ``i`` holds √λ_i v_i, so the row-major flattening is the vector
    Σ_i √λ_i |i⟩_A |v_i⟩_Q.
    """
    dim = rho.shape[0]
    evals, evecs = _eigh_desc(rho)
    rank = int(np.sum(evals > RANK_ATOL))
    if ancilla_dim < rank:
        raise AncillaTooSmall(f"ancilla dimension {ancilla_dim} is below the state rank {rank}")
    weights = np.sqrt(_clamp_spectrum(evals))
    amplitudes = np.zeros((ancilla_dim, dim), dtype=np.complex128)
    used = min(ancilla_dim, dim)
    amplitudes[:used] = (evecs[:, :used] * weights[:used]).T
    norm = np.linalg.norm(amplitudes)
    return amplitudes / norm


@dataclass(frozen=True)
class PureState:
    """Normalized state vector."""
    amplitudes: NDArray[np.complex128]

    def __post_init__(self) -> None:
        vec = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if not np.all(np.isfinite(vec)):
            raise InvalidState("amplitudes must be finite")
        if abs(np.vdot(vec, vec).real - 1.0) > 1e-12:
            raise InvalidState(f"state is not normalized (norm² = {np.vdot(vec, vec).real:.15f})")
        vec.setflags(write=False)
        object.__setattr__(self, "amplitudes", vec)

    @property
    def dim(self) -> int:
        return int(self.amplitudes.shape[0])

    @classmethod
    def from_vector(cls, vec: ArrayLike) -> "PureState":
        """Normalize an arbitrary nonzero vector."""
        arr = np.asarray(vec, dtype=np.complex128).reshape(-1)
        return cls(arr / np.linalg.norm(arr))

    def projector(self) -> ComplexMatrix:
        return np.outer(self.amplitudes, np.conjugate(self.amplitudes))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.projector())


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace operator."""
    matrix: ComplexMatrix

    def __post_init__(self) -> None:
        arr = as_matrix(self.matrix).copy()
        _require_square(arr)
        if not is_hermitian(arr, HERMITIAN_ATOL):
            raise NonHermitianInput("density matrix is not Hermitian")
        arr = (arr + dagger(arr)) / 2
        lowest = float(np.linalg.eigvalsh(arr).min())
        if lowest < PSD_SILENT_CLAMP:
            raise IndefiniteInput(f"density matrix has eigenvalue {lowest:.3e}")
        trace = float(np.trace(arr).real)
        if abs(trace - 1.0) > TRACE_ATOL:
            raise InvalidState(f"density matrix has trace {trace:.12f}")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def rank(self, atol: float = RANK_ATOL) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.matrix) > atol))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True)
class UnitaryOperator:
    matrix: ComplexMatrix

    def __post_init__(self) -> None:
        arr = as_matrix(self.matrix).copy()
        _require_square(arr)
        deviation = np.max(np.abs(dagger(arr) @ arr - np.eye(arr.shape[0])))
        if deviation > UNITARY_ATOL:
            raise NonUnitaryTarget(f"operator is not unitary (max |U^dag U - I| = {deviation:.3e})")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])


StateLike = DensityMatrix | PureState | ArrayLike


def density_array(state: StateLike) -> ComplexMatrix:
    """Validated density matrix array from any state-like input."""
    if isinstance(state, DensityMatrix):
        return state.matrix
    if isinstance(state, PureState):
        return state.projector()
    arr = np.asarray(state, dtype=np.complex128)
    if arr.ndim == 1:
        return PureState(arr).projector()
    return DensityMatrix(arr).matrix


def purify(rho: StateLike, ancilla_dim: int) -> PureState:
    """Canonical purification Σ_i √λ_i |i⟩_A |v_i⟩_Q (ancilla first)."""
    arr = density_array(rho)
    return PureState(purification_matrix(arr, ancilla_dim).reshape(-1))


def haar_state(dim: int, seed: SeedLike) -> PureState:
    """Haar-random pure state from a normalized complex Gaussian vector."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    rng = as_generator(seed)
    vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState(vec / np.linalg.norm(vec))


def haar_states(dim: int, count: int, seed: SeedLike) -> NDArray[np.complex128]:
    """``count`` Haar-random state vectors as rows of an array."""
    rng = as_generator(seed)
    vecs = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


def random_density(dim: int, seed: SeedLike, rank: int | None = None) -> DensityMatrix:
    """Random mixed state from the induced (Hilbert-Schmidt when full rank) measure."""
    rng = as_generator(seed)
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    rho = g @ dagger(g)
    return DensityMatrix(rho / np.trace(rho).real)


def random_hermitian(dim: int, seed: SeedLike) -> ComplexMatrix:
    rng = as_generator(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + dagger(g)) / 2


def project_density(m: ArrayLike) -> ComplexMatrix:
    """Hermitize, clamp negative eigenvalues to zero and renormalize the trace."""
    arr = np.asarray(m, dtype=np.complex128)
    evals, evecs = np.linalg.eigh((arr + dagger(arr)) / 2)
    if evals.min() >= 0.0 and np.sum(evals) > 0.0:
        return ((arr + dagger(arr)) / 2) / np.sum(evals)
    evals = np.clip(evals, 0.0, None)
    total = evals.sum()
    if total <= 0.0:
        return np.eye(arr.shape[0], dtype=np.complex128) / arr.shape[0]
    return (evecs * (evals / total)) @ dagger(evecs)


@lru_cache(maxsize=None)
def traceless_hermitian_basis(dim: int) -> tuple[ComplexMatrix, ...]:
    """Orthonormal (Hilbert-Schmidt) basis of traceless Hermitian d×d matrices.

    Generalized Gell-Mann matrices, scaled to unit norm: off-diagonal
    symmetric and antisymmetric pairs, then the d-1 diagonal ones.
    """
    basis = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=np.complex128)
            sym[j, k] = sym[k, j] = 1 / np.sqrt(2)
            anti = np.zeros((dim, dim), dtype=np.complex128)
            anti[j, k] = -1j / np.sqrt(2)
            anti[k, j] = 1j / np.sqrt(2)
            basis.extend([sym, anti])
    for level in range(1, dim):
        diag = np.zeros(dim, dtype=np.complex128)
        diag[:level] = 1.0
        diag[level] = -level
        basis.append(np.diag(diag / np.sqrt(level * (level + 1))))
    for element in basis:
        element.setflags(write=False)
    return tuple(basis)
