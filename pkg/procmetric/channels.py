"""Quantum operation representations and channel algebra.

A ``Channel`` keeps its Choi state as the authoritative form (it is unique,
Kraus sets are not). Kraus elements are re-derived from the Choi state at
construction, so every channel carries a canonical, minimal Kraus set.

Conventions:
    * Choi states put the ancilla first: ρ_E = (I ⊗ E)(|Φ⟩⟨Φ|).
    * Matrix units are ordered in column-stacking order, operator k = a·d + q
      being |q⟩⟨a|, which makes χ = d·ρ_E hold entry by entry.
    * Pauli products are ordered lexicographically in (I, X, Y, Z) with the
      leftmost qubit most significant.
"""

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from .errors import BadBasis, DimensionMismatch, InvalidChoi, NoUnitaryBasis, NonUnitaryTarget, NotTracePreserving
from .linalg import (
    ComplexMatrix,
    DensityMatrix,
    SeedLike,
    UnitaryOperator,
    _eigh_desc,
    as_generator,
    as_matrix,
    dagger,
    density_array,
    kron,
    max_entangled,
    partial_trace,
    permute_subsystems,
)
from .models import ChannelFile, matrix_to_pairs

KRAUS_TP_ATOL = 1e-9
CHOI_TP_ATOL = 1e-8
KRAUS_EIG_THRESHOLD = 1e-10
BASIS_ATOL = 1e-10

IDENTITY_2 = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)
PAULIS = {"I": IDENTITY_2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

for _gate in (IDENTITY_2, PAULI_X, PAULI_Y, PAULI_Z, HADAMARD, CNOT):
    _gate.setflags(write=False)


def _frozen(m: ArrayLike) -> ComplexMatrix:
    arr = np.array(m, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


def qubit_count(dim: int) -> int | None:
    """Number of qubits if ``dim`` is a power of two, else None."""
    n = dim.bit_length() - 1
    return n if dim >= 1 and 1 << n == dim else None


# -- operator bases ---------------------------------------------------------

BasisKind = Literal["matrix-units", "pauli-products", "unitary"]


@dataclass(frozen=True)
class OperatorBasis:
    """Operator basis orthogonal under the Hilbert-Schmidt inner product.

    ``matrix-units`` are orthonormal; ``pauli-products`` and ``unitary``
    bases satisfy tr(U_j† U_k) = d δ_jk with every U_j unitary (and, for
    Pauli products, Hermitian).
    """
    dim: int
    kind: BasisKind
    operators: tuple[ComplexMatrix, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ops = tuple(_frozen(op) for op in self.operators)
        object.__setattr__(self, "operators", ops)
        if len(ops) != self.dim**2 or any(op.shape != (self.dim, self.dim) for op in ops):
            raise BadBasis(f"a basis for dimension {self.dim} needs {self.dim**2} operators of shape {(self.dim, self.dim)}")
        gram = np.array([[np.trace(dagger(a) @ b) for b in ops] for a in ops])
        norm = 1.0 if self.kind == "matrix-units" else float(self.dim)
        if np.max(np.abs(gram - norm * np.eye(len(ops)))) > BASIS_ATOL * max(1.0, norm):
            raise BadBasis(f"{self.kind} basis is not orthogonal with tr(A_j^dag A_k) = {norm:g} δ_jk")
        if self.kind != "matrix-units":
            for op in ops:
                if np.max(np.abs(dagger(op) @ op - np.eye(self.dim))) > BASIS_ATOL:
                    raise BadBasis(f"{self.kind} basis element is not unitary")
        if self.kind == "pauli-products":
            for op in ops:
                if np.max(np.abs(op - dagger(op))) > BASIS_ATOL:
                    raise BadBasis("Pauli-product basis element is not Hermitian")

    @classmethod
    def matrix_units(cls, dim: int) -> "OperatorBasis":
        ops = []
        labels = []
        for a in range(dim):
            for q in range(dim):
                unit = np.zeros((dim, dim), dtype=np.complex128)
                unit[q, a] = 1.0
                ops.append(unit)
                labels.append(f"|{q}><{a}|")
        return cls(dim, "matrix-units", tuple(ops), tuple(labels))

    @classmethod
    def pauli_products(cls, n_qubits: int) -> "OperatorBasis":
        labels = ["".join(word) for word in itertools.product("IXYZ", repeat=n_qubits)]
        ops = [reduce(np.kron, (PAULIS[c] for c in label), np.eye(1, dtype=np.complex128)) for label in labels]
        return cls(2**n_qubits, "pauli-products", tuple(ops), tuple(labels))

    @classmethod
    def weyl(cls, dim: int) -> "OperatorBasis":
        """Clock-and-shift unitary basis X^a Z^b, defined for any dimension."""
        omega = np.exp(2j * np.pi / dim)
        shift = np.roll(np.eye(dim, dtype=np.complex128), 1, axis=0)
        clock = np.diag(omega ** np.arange(dim))
        ops = []
        labels = []
        for a in range(dim):
            for b in range(dim):
                ops.append(np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b))
                labels.append(f"X^{a}Z^{b}")
        return cls(dim, "unitary", tuple(ops), tuple(labels))

    @classmethod
    def default_unitary(cls, dim: int) -> "OperatorBasis":
        """Pauli products when ``dim`` is a power of two."""
        n = qubit_count(dim)
        if n is None:
            raise NoUnitaryBasis(f"no Pauli-product basis for dimension {dim}; supply a unitary basis")
        return cls.pauli_products(n)

    def coordinates(self) -> ComplexMatrix:
        """Columns are the operators expressed in matrix-unit coordinates."""
        return np.stack([op.T.reshape(-1) for op in self.operators], axis=1)


# -- representations ----------------------------------------------------------

def _stack(elements: Iterable[ArrayLike]) -> np.ndarray:
    arr = np.stack([as_matrix(e) for e in elements])
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionMismatch("Kraus elements must be square matrices of equal size")
    return arr


def _choi_from_elements(elements: np.ndarray) -> ComplexMatrix:
    """ρ = Σ_k w_k w_k† with w_k = (I ⊗ E_k)|Φ⟩."""
    dim = elements.shape[1]
    vecs = np.transpose(elements, (0, 2, 1)).reshape(len(elements), -1) / np.sqrt(dim)
    return vecs.T @ np.conjugate(vecs)


def _tp_deviation(elements: np.ndarray) -> float:
    total = np.einsum("kji,kjl->il", np.conjugate(elements), elements)
    return float(np.max(np.abs(total - np.eye(elements.shape[1]))))


@dataclass(frozen=True)
class KrausMap:
    """A raw operator-sum map X ↦ Σ_j E_j X E_j†, not necessarily trace-preserving."""
    elements: tuple[ComplexMatrix, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(_frozen(e) for e in _stack(self.elements)))

    @property
    def dim(self) -> int:
        return int(self.elements[0].shape[0])

    @property
    def trace_preserving(self) -> bool:
        return _tp_deviation(np.stack(self.elements)) <= KRAUS_TP_ATOL

    def apply_operator(self, x: ArrayLike) -> ComplexMatrix:
        arr = as_matrix(x)
        return sum(e @ arr @ dagger(e) for e in self.elements)

    def to_channel(self) -> "Channel":
        if not self.trace_preserving:
            raise NotTracePreserving("map is not trace-preserving and cannot be used as a channel")
        return Channel.from_kraus(self.elements)


@dataclass(frozen=True)
class KrausChannel:
    """Trace-preserving operation elements E_j (at most d² of them)."""
    elements: tuple[ComplexMatrix, ...]

    def __post_init__(self) -> None:
        stacked = _stack(self.elements)
        dim = stacked.shape[1]
        if not 1 <= len(stacked) <= dim**2:
            raise DimensionMismatch(f"a channel on dimension {dim} has between 1 and {dim**2} Kraus elements, got {len(stacked)}")
        deviation = _tp_deviation(stacked)
        if deviation > KRAUS_TP_ATOL:
            raise NotTracePreserving(f"sum of E_j^dag E_j deviates from I by {deviation:.3e}")
        object.__setattr__(self, "elements", tuple(_frozen(e) for e in stacked))

    @property
    def dim(self) -> int:
        return int(self.elements[0].shape[0])


@dataclass(frozen=True)
class ChoiState:
    """Jamiolkowski state ρ_E on A⊗Q, validated as a trace-preserving channel."""
    dim: int
    state: DensityMatrix

    def __post_init__(self) -> None:
        if self.state.dim != self.dim**2:
            raise InvalidChoi(f"Choi state for dimension {self.dim} must be {self.dim**2}x{self.dim**2}")
        reduced = partial_trace(self.state.matrix, "B", (self.dim, self.dim))
        deviation = float(np.max(np.abs(reduced - np.eye(self.dim) / self.dim)))
        if deviation > CHOI_TP_ATOL:
            raise InvalidChoi(f"tr_Q of the Choi state deviates from I/d by {deviation:.3e} (not trace-preserving)")

    @classmethod
    def from_matrix(cls, matrix: ArrayLike) -> "ChoiState":
        arr = as_matrix(matrix)
        dim = int(round(np.sqrt(arr.shape[0])))
        if dim * dim != arr.shape[0]:
            raise InvalidChoi(f"Choi matrix size {arr.shape[0]} is not a perfect square")
        arr = (arr + dagger(arr)) / 2
        try:
            state = DensityMatrix(arr)
        except ValueError as exc:
            raise InvalidChoi(f"Choi matrix is not a valid density matrix: {exc}") from exc
        return cls(dim, state)

    @property
    def matrix(self) -> ComplexMatrix:
        return self.state.matrix


@dataclass(frozen=True)
class ChiMatrix:
    """Process matrix χ of E(ρ) = Σ_mn χ_mn A_m ρ A_n† in a fixed basis."""
    dim: int
    basis: OperatorBasis
    matrix: ComplexMatrix

    def __post_init__(self) -> None:
        arr = as_matrix(self.matrix)
        if arr.shape != (self.dim**2, self.dim**2):
            raise DimensionMismatch(f"chi matrix must be {self.dim**2}x{self.dim**2}")
        if self.basis.dim != self.dim:
            raise BadBasis("basis dimension does not match chi matrix")
        if np.max(np.abs(arr - dagger(arr))) > 1e-9 * max(1.0, np.max(np.abs(arr))):
            raise InvalidChoi("chi matrix is not Hermitian")
        object.__setattr__(self, "matrix", _frozen((arr + dagger(arr)) / 2))


def kraus_to_choi(ch: KrausChannel) -> ChoiState:
    return ChoiState.from_matrix(_choi_from_elements(np.stack(ch.elements)))


def choi_to_kraus(c: ChoiState) -> KrausChannel:
    """Kraus elements from the eigendecomposition of d·ρ_E."""
    evals, evecs = _eigh_desc(c.dim * c.matrix)
    keep = evals > KRAUS_EIG_THRESHOLD
    elements = [
        (np.sqrt(val) * vec).reshape(c.dim, c.dim).T
        for val, vec in zip(evals[keep], evecs[:, keep].T)
    ]
    return KrausChannel(tuple(elements))


def choi_to_chi(c: ChoiState, basis: OperatorBasis) -> ChiMatrix:
    if basis.dim != c.dim:
        raise BadBasis(f"basis dimension {basis.dim} does not match channel dimension {c.dim}")
    chi_units = c.dim * c.matrix
    if basis.kind == "matrix-units":
        return ChiMatrix(c.dim, basis, chi_units)
    coords = basis.coordinates()
    left = np.linalg.solve(coords, chi_units)
    chi = np.linalg.solve(coords, dagger(left)).conj().T
    return ChiMatrix(c.dim, basis, chi)


def chi_to_choi(chi: ChiMatrix) -> ChoiState:
    coords = chi.basis.coordinates()
    chi_units = coords @ chi.matrix @ dagger(coords)
    return ChoiState.from_matrix(chi_units / chi.dim)


# -- the channel value ------------------------------------------------------------

ChannelForm = Literal["kraus", "choi", "chi"]


@dataclass(frozen=True)
class Channel:
    """A trace-preserving quantum operation held in all three forms.

    ``source`` records which form the channel was built from; the Choi
    state is authoritative and the other forms are derived from it eagerly.
    """
    choi: ChoiState
    kraus: KrausChannel = field(repr=False)
    source: ChannelForm = "choi"

    @property
    def dim(self) -> int:
        return self.choi.dim

    @classmethod
    def from_choi(cls, choi: ChoiState | ArrayLike, source: ChannelForm = "choi") -> "Channel":
        state = choi if isinstance(choi, ChoiState) else ChoiState.from_matrix(choi)
        return cls(state, choi_to_kraus(state), source)

    @classmethod
    def from_kraus(cls, elements: KrausChannel | Sequence[ArrayLike]) -> "Channel":
        if isinstance(elements, KrausChannel):
            stacked = np.stack(elements.elements)
        else:
            stacked = _stack(elements)
            deviation = _tp_deviation(stacked)
            if deviation > KRAUS_TP_ATOL:
                raise NotTracePreserving(f"sum of E_j^dag E_j deviates from I by {deviation:.3e}")
        return cls.from_choi(ChoiState.from_matrix(_choi_from_elements(stacked)), source="kraus")

    @classmethod
    def from_chi(cls, chi: ChiMatrix) -> "Channel":
        return cls.from_choi(chi_to_choi(chi), source="chi")

    @classmethod
    def from_unitary(cls, u: UnitaryOperator | ArrayLike) -> "Channel":
        op = u if isinstance(u, UnitaryOperator) else UnitaryOperator(u)
        return cls.from_kraus([op.matrix])

    @property
    def kraus_stack(self) -> np.ndarray:
        return np.stack(self.kraus.elements)

    def chi(self, basis: OperatorBasis | None = None) -> ChiMatrix:
        return choi_to_chi(self.choi, basis or OperatorBasis.matrix_units(self.dim))

    def apply_operator(self, x: ArrayLike) -> ComplexMatrix:
        """Linear extension of the channel to any d×d operator."""
        arr = as_matrix(x)
        if arr.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"operator of shape {arr.shape} does not act on dimension {self.dim}")
        ks = self.kraus_stack
        return np.einsum("kij,jl,kml->im", ks, arr, np.conjugate(ks))

    def apply_to_bipartite(self, amplitudes: ComplexMatrix) -> ComplexMatrix:
        """(I_A ⊗ E)(|ψ⟩⟨ψ|) for ψ given as its (d_A, d) amplitude matrix."""
        vecs = np.einsum("aq,kpq->kap", amplitudes, self.kraus_stack).reshape(len(self.kraus.elements), -1)
        return vecs.T @ np.conjugate(vecs)

    @property
    def is_unitary(self) -> bool:
        return len(self.kraus.elements) == 1

    def as_unitary(self) -> UnitaryOperator:
        if not self.is_unitary:
            raise NonUnitaryTarget(f"channel has Choi rank {len(self.kraus.elements)}, not a unitary")
        return UnitaryOperator(self.kraus.elements[0])

    @property
    def is_unital(self) -> bool:
        """Doubly stochastic: E(I) = I."""
        return bool(np.max(np.abs(self.apply_operator(np.eye(self.dim)) - np.eye(self.dim))) <= KRAUS_TP_ATOL)


def _require_same_dim(*channels: Channel) -> int:
    dims = {ch.dim for ch in channels}
    if len(dims) != 1:
        raise DimensionMismatch(f"channels act on different dimensions: {sorted(dims)}")
    return dims.pop()


def apply(ch: Channel, rho: DensityMatrix | ArrayLike) -> DensityMatrix:
    """Σ_j E_j ρ E_j†."""
    arr = density_array(rho)
    if arr.shape[0] != ch.dim:
        raise DimensionMismatch(f"state of dimension {arr.shape[0]} does not match channel dimension {ch.dim}")
    out = ch.apply_operator(arr)
    return DensityMatrix((out + dagger(out)) / 2)


def compose(e2: Channel, e1: Channel) -> Channel:
    """e2 ∘ e1: apply e1 first."""
    _require_same_dim(e2, e1)
    products = [a @ b for a in e2.kraus.elements for b in e1.kraus.elements]
    return Channel.from_choi(ChoiState.from_matrix(_choi_from_elements(np.stack(products))), source="kraus")


# Choi factors of a tensor product come out as A1 Q1 A2 Q2; the channel
# convention needs A1 A2 Q1 Q2.
TENSOR_INTERLEAVE = (0, 2, 1, 3)


def tensor_choi(choi_a: ChoiState, choi_b: ChoiState) -> ComplexMatrix:
    dims = (choi_a.dim, choi_a.dim, choi_b.dim, choi_b.dim)
    return permute_subsystems(kron(choi_a.matrix, choi_b.matrix), dims, TENSOR_INTERLEAVE)


def tensor(a: Channel, b: Channel) -> Channel:
    elements = [kron(x, y) for x in a.kraus.elements for y in b.kraus.elements]
    return Channel.from_choi(ChoiState.from_matrix(_choi_from_elements(np.stack(elements))), source="kraus")


def transpose_channel(f: Channel) -> KrausMap:
    """F^T(ρ) = Σ_j F_j^T ρ F_j*; trace-preserving exactly when f is unital."""
    return KrausMap(tuple(e.T for e in f.kraus.elements))


def random_channel(dim: int, kraus_count: int, seed: SeedLike) -> KrausChannel:
    """Kraus blocks of a Haar-random isometry C^d → C^d ⊗ C^k."""
    if not 1 <= kraus_count <= dim**2:
        raise ValueError(f"kraus_count must lie in [1, {dim**2}], got {kraus_count}")
    rng = as_generator(seed)
    g = rng.standard_normal((dim * kraus_count, dim)) + 1j * rng.standard_normal((dim * kraus_count, dim))
    q, r = scipy.linalg.qr(g, mode="economic")
    diag = np.diag(r)
    q = q * (diag / np.abs(diag))[np.newaxis, :]
    return KrausChannel(tuple(q[j * dim:(j + 1) * dim] for j in range(kraus_count)))


def random_unitary(dim: int, seed: SeedLike) -> UnitaryOperator:
    return UnitaryOperator(random_channel(dim, 1, seed).elements[0])


# -- channel library ----------------------------------------------------------

def identity_channel(dim: int) -> Channel:
    return Channel.from_unitary(np.eye(dim))


def unitary_channel(u: ArrayLike) -> Channel:
    return Channel.from_unitary(u)


def pauli_channel(p_x: float, p_y: float, p_z: float) -> Channel:
    p_i = 1.0 - p_x - p_y - p_z
    if min(p_i, p_x, p_y, p_z) < 0:
        raise ValueError("Pauli channel probabilities must be nonnegative and sum to at most one")
    weights = {"I": p_i, "X": p_x, "Y": p_y, "Z": p_z}
    return Channel.from_kraus([np.sqrt(w) * PAULIS[k] for k, w in weights.items() if w > 0])


def bit_flip(p: float) -> Channel:
    return pauli_channel(p, 0.0, 0.0)


def phase_flip(p: float) -> Channel:
    return pauli_channel(0.0, 0.0, p)


def depolarizing(p: float = 1.0, dim: int = 2) -> Channel:
    """ρ ↦ (1-p) ρ + p I/d; p = 1 is the fully depolarizing channel."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing strength must lie in [0, 1]")
    phi = max_entangled(dim)
    choi = (1 - p) * np.outer(phi, phi.conj()) + p * np.eye(dim * dim) / dim**2
    return Channel.from_choi(choi)


def amplitude_damping(gamma: float) -> Channel:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("damping rate must lie in [0, 1]")
    e0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=np.complex128)
    e1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=np.complex128)
    return Channel.from_kraus([e0, e1])


def permutation_unitary(mapping: Sequence[int]) -> UnitaryOperator:
    """Unitary |x⟩ ↦ |mapping[x]⟩ for a bijective mapping."""
    dim = len(mapping)
    if sorted(mapping) != list(range(dim)):
        raise ValueError("mapping must be a permutation of range(dim)")
    u = np.zeros((dim, dim), dtype=np.complex128)
    u[list(mapping), list(range(dim))] = 1.0
    return UnitaryOperator(u)


# -- file form ------------------------------------------------------------------

def to_file(ch: Channel, form: Literal["kraus", "choi", "unitary"] = "kraus", description: str = "") -> ChannelFile:
    """Serializable form of a channel; ``unitary`` needs a single Kraus element."""
    if form == "unitary":
        data = matrix_to_pairs(ch.as_unitary().matrix)
    elif form == "choi":
        data = matrix_to_pairs(ch.choi.matrix)
    else:
        data = [matrix_to_pairs(e) for e in ch.kraus.elements]
    return ChannelFile(dim=ch.dim, form=form, data=data, description=description)


def from_file(cf: ChannelFile) -> Channel:
    matrices = cf.matrices()
    if cf.form == "kraus":
        return Channel.from_kraus(matrices)
    if cf.form == "unitary":
        return Channel.from_unitary(matrices[0])
    if cf.form == "choi":
        return Channel.from_choi(matrices[0])
    if cf.basis == "pauli":
        n = qubit_count(cf.dim)
        if n is None:
            raise BadBasis(f"no Pauli-product basis for dimension {cf.dim}")
        basis = OperatorBasis.pauli_products(n)
    else:
        basis = OperatorBasis.matrix_units(cf.dim)
    return Channel.from_chi(ChiMatrix(cf.dim, basis, matrices[0]))
