"""Measurement-efficient estimation of the process fidelity to a unitary target.

With an orthogonal unitary basis {U_j} (tr(U_j† U_k) = d δ_jk),

    F_pro(E, U) = (1/d³) Σ_j tr(U U_j† U† E(U_j)).

Expanding U_j = Σ_k a_jk ρ_k over preparable inputs and U U_j† U† over
measurable observables σ_l turns this into a weighted sum of observable
averages tr(σ_l E(ρ_k)), which is what an ``EstimationPlan`` records.
"""

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .channels import PAULIS, Channel, OperatorBasis, qubit_count, random_channel
from .errors import BadBasis, DegenerateSpanningSet, DimensionMismatch, NonPhysicalInput, PlanValidationError
from .linalg import ComplexMatrix, UnitaryOperator, as_matrix, dagger, partial_trace
from .models import PlanExport, PlanSetting, matrix_to_pairs
from .process_metrics import j_fidelity
from .telemetry import logfire

PlanScheme = Literal["general", "derived", "pauli-minimal"]

GRAM_CONDITION_LIMIT = 1e8
VALIDATION_ATOL = 1e-8
VALIDATION_CHANNELS = 10
VALIDATION_SEED = 20_240_601
WEIGHT_ATOL = 1e-12
SPLIT_ATOL = 1e-10
PSD_ATOL = 1e-10

# Single-qubit preparations {I, I+X, I+Y, I+Z}, kept unnormalized.
MINIMAL_QUBIT_INPUTS = (
    PAULIS["I"],
    PAULIS["I"] + PAULIS["X"],
    PAULIS["I"] + PAULIS["Y"],
    PAULIS["I"] + PAULIS["Z"],
)


@dataclass(frozen=True)
class ShotModel:
    """Shots per measured setting; zero means exact expectation values."""
    shots_per_setting: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.shots_per_setting < 0:
            raise ValueError("shots_per_setting must be nonnegative")


@dataclass(frozen=True)
class EstimationResult:
    estimate: float
    stderr: float
    settings: int


@dataclass(frozen=True)
class EstimationPlan:
    """Inputs ρ_k, Hermitian observables σ_l and weights M_kl.

    F_pro = (1/d³) Σ_kl M_kl tr(σ_l E(ρ_k)); only settings with a nonzero
    weight need to be measured.
    """
    dim: int
    target_unitary: UnitaryOperator
    input_states: tuple[ComplexMatrix, ...]
    observables: tuple[ComplexMatrix, ...]
    coefficients: np.ndarray
    scheme: PlanScheme
    gram_condition: float
    spectra: tuple[tuple[np.ndarray, ComplexMatrix], ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.coefficients.shape != (len(self.input_states), len(self.observables)):
            raise DimensionMismatch("coefficient matrix shape does not match inputs and observables")
        for index, obs in enumerate(self.observables):
            if np.max(np.abs(obs - dagger(obs))) > SPLIT_ATOL:
                raise PlanValidationError(f"observable {index} is not Hermitian")
        # eigendecompositions reused by every shot simulation
        object.__setattr__(self, "spectra", tuple(np.linalg.eigh((o + dagger(o)) / 2) for o in self.observables))

    @property
    def settings(self) -> list[tuple[int, int]]:
        """(input, observable) pairs with a nonzero weight, in row-major order."""
        rows, cols = np.nonzero(np.abs(self.coefficients) > WEIGHT_ATOL)
        return list(zip(rows.tolist(), cols.tolist()))

    @property
    def setting_count(self) -> int:
        return len(self.settings)

    def expectation_table(self, ch: Channel) -> np.ndarray:
        """Exact tr(σ_l E(ρ_k)) for every input and observable."""
        if ch.dim != self.dim:
            raise DimensionMismatch(f"plan for dimension {self.dim} cannot evaluate a channel of dimension {ch.dim}")
        outputs = np.stack([ch.apply_operator(rho) for rho in self.input_states])
        observables = np.stack(self.observables)
        return np.einsum("lij,kji->kl", observables, outputs)

    def evaluate(self, ch: Channel) -> float:
        total = np.sum(self.coefficients * self.expectation_table(ch))
        return float(np.real(total)) / self.dim**3


def _vectors(ops: Sequence[ComplexMatrix]) -> np.ndarray:
    return np.stack([op.reshape(-1) for op in ops], axis=1)


def _spanning_solver(ops: Sequence[ArrayLike], dim: int, what: str) -> tuple[np.ndarray, float]:
    """Matrix whose columns are the vectorized operators, with its Gram condition number."""
    mats = [as_matrix(op) for op in ops]
    if any(m.shape != (dim, dim) for m in mats):
        raise DimensionMismatch(f"{what} must be {dim}x{dim} operators")
    if len(mats) != dim**2:
        raise DegenerateSpanningSet(f"{what}: need exactly {dim**2} operators to span, got {len(mats)}")
    columns = _vectors(mats)
    gram = dagger(columns) @ columns
    condition = float(np.linalg.cond(gram))
    if not np.isfinite(condition) or condition > GRAM_CONDITION_LIMIT:
        raise DegenerateSpanningSet(f"{what} do not span the operator space (Gram condition {condition:.3e})")
    return columns, condition


def _hermitian_split(ops: Sequence[ComplexMatrix]) -> tuple[list[ComplexMatrix], np.ndarray]:
    """Write each σ as H + iK with H, K Hermitian; returns the parts and the weights matrix."""
    parts: list[ComplexMatrix] = []
    weights: list[tuple[int, complex]] = []
    for index, op in enumerate(ops):
        herm = (op + dagger(op)) / 2
        anti = (op - dagger(op)) / 2j
        if np.max(np.abs(herm)) > SPLIT_ATOL:
            parts.append(herm)
            weights.append((index, 1.0))
        if np.max(np.abs(anti)) > SPLIT_ATOL:
            parts.append(anti)
            weights.append((index, 1j))
    w = np.zeros((len(ops), len(parts)), dtype=np.complex128)
    for column, (index, weight) in enumerate(weights):
        w[index, column] = weight
    return parts, w


def _unitary_basis(dim: int, basis: OperatorBasis | None) -> OperatorBasis:
    chosen = basis or OperatorBasis.default_unitary(dim)
    if chosen.kind == "matrix-units":
        raise BadBasis("the unitary-basis formula needs a unitary operator basis")
    if chosen.dim != dim:
        raise DimensionMismatch(f"basis dimension {chosen.dim} does not match {dim}")
    return chosen


def _target(u: UnitaryOperator | ArrayLike) -> UnitaryOperator:
    return u if isinstance(u, UnitaryOperator) else UnitaryOperator(u)


def f_pro_unitary_basis(e: Channel, u: UnitaryOperator | ArrayLike, basis: OperatorBasis | None = None) -> float:
    """(1/d³) Σ_j tr(U U_j† U† E(U_j)) over an orthogonal unitary basis."""
    target = _target(u)
    d = e.dim
    if target.dim != d:
        raise DimensionMismatch(f"target unitary of dimension {target.dim} does not match channel dimension {d}")
    basis = _unitary_basis(d, basis)
    um = target.matrix
    total = sum(np.trace(um @ dagger(uj) @ dagger(um) @ e.apply_operator(uj)) for uj in basis.operators)
    return float(np.real(total)) / d**3


def _validate(plan: EstimationPlan) -> EstimationPlan:
    target = Channel.from_unitary(plan.target_unitary)
    rng = np.random.default_rng(VALIDATION_SEED)
    worst = 0.0
    for _ in range(VALIDATION_CHANNELS):
        kraus_count = int(rng.integers(1, plan.dim**2 + 1))
        ch = Channel.from_kraus(random_channel(plan.dim, kraus_count, rng))
        worst = max(worst, abs(plan.evaluate(ch) - j_fidelity(ch, target)))
    if worst > VALIDATION_ATOL:
        raise PlanValidationError(f"plan reproduces F_pro only to {worst:.3e}")
    logfire.info("Estimation plan built", scheme=plan.scheme, dim=plan.dim, settings=plan.setting_count, gram_condition=plan.gram_condition)
    return plan


def _input_coefficients(target: UnitaryOperator, input_states: Sequence[ArrayLike], basis: OperatorBasis) -> tuple[list[ComplexMatrix], np.ndarray, float]:
    """Inputs as arrays and a[j, k] with U_j = Σ_k a_jk ρ_k."""
    d = target.dim
    columns, condition = _spanning_solver(input_states, d, "input states")
    a = np.linalg.solve(columns, _vectors(basis.operators)).T
    return [as_matrix(op) for op in input_states], a, condition


def build_plan_general(
    u: UnitaryOperator | ArrayLike,
    input_states: Sequence[ArrayLike],
    observables: Sequence[ArrayLike],
    basis: OperatorBasis | None = None,
) -> EstimationPlan:
    """Plan from caller-chosen inputs and observables, M_kl = Σ_j b_jl a_jk.

    Non-Hermitian observables are measured through their Hermitian and
    anti-Hermitian parts.
    """
    target = _target(u)
    d = target.dim
    basis = _unitary_basis(d, basis)
    inputs, a, in_condition = _input_coefficients(target, input_states, basis)
    obs_columns, obs_condition = _spanning_solver(observables, d, "observables")
    um = target.matrix
    conjugated = [um @ dagger(uj) @ dagger(um) for uj in basis.operators]
    b = np.linalg.solve(obs_columns, _vectors(conjugated)).T
    parts, weights = _hermitian_split([as_matrix(o) for o in observables])
    m = (a.T @ b) @ weights
    plan = EstimationPlan(d, target, tuple(inputs), tuple(parts), m, "general", max(in_condition, obs_condition))
    return _validate(plan)


def build_plan_derived(
    u: UnitaryOperator | ArrayLike,
    input_states: Sequence[ArrayLike],
    basis: OperatorBasis | None = None,
    scheme: PlanScheme = "derived",
) -> EstimationPlan:
    """One derived observable per input: σ_k = Σ_j a_jk U U_j† U†.

    Each σ_k is split into Hermitian parts, so between d² and 2d² settings
    are realized.
    """
    target = _target(u)
    d = target.dim
    basis = _unitary_basis(d, basis)
    inputs, a, condition = _input_coefficients(target, input_states, basis)
    um = target.matrix
    conjugated = np.stack([um @ dagger(uj) @ dagger(um) for uj in basis.operators])
    derived = list(np.einsum("jk,jab->kab", a, conjugated))
    parts, weights = _hermitian_split(derived)
    plan = EstimationPlan(d, target, tuple(inputs), tuple(parts), weights, scheme, condition)
    return _validate(plan)


def minimal_pauli_inputs(n_qubits: int) -> list[ComplexMatrix]:
    """Tensor products of {I, I+X, I+Y, I+Z}, leftmost qubit most significant."""
    return [
        reduce(np.kron, word, np.eye(1, dtype=np.complex128))
        for word in itertools.product(MINIMAL_QUBIT_INPUTS, repeat=n_qubits)
    ]


def build_plan_pauli_minimal(u: UnitaryOperator | ArrayLike, n_qubits: int) -> EstimationPlan:
    """d² inputs and d² Hermitian observables for an n-qubit target."""
    target = _target(u)
    if target.dim != 2**n_qubits:
        raise DimensionMismatch(f"target of dimension {target.dim} is not a {n_qubits}-qubit unitary")
    return build_plan_derived(target, minimal_pauli_inputs(n_qubits), OperatorBasis.pauli_products(n_qubits), "pauli-minimal")


# -- simulated measurements -----------------------------------------------------

def _preparation(rho: ComplexMatrix) -> tuple[ComplexMatrix, float]:
    """Split an input operator into a density matrix and its trace."""
    if np.max(np.abs(rho - dagger(rho))) > PSD_ATOL:
        raise NonPhysicalInput("input operator is not Hermitian and cannot be prepared")
    scale = float(np.real(np.trace(rho)))
    if scale <= 0 or np.linalg.eigvalsh((rho + dagger(rho)) / 2).min() < -PSD_ATOL * max(1.0, scale):
        raise NonPhysicalInput("input operator is not a nonnegative multiple of a density matrix")
    return rho / scale, scale


def _sampled_expectation(
    state: ComplexMatrix, spectrum: tuple[np.ndarray, ComplexMatrix], shots: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Sample mean of an observable and the variance of that mean."""
    evals, evecs = spectrum
    probs = np.clip(np.real(np.einsum("ia,ij,ja->a", np.conjugate(evecs), state, evecs)), 0.0, None)
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    freq = counts / shots
    mean = float(freq @ evals)
    second = float(freq @ evals**2)
    return mean, max(second - mean**2, 0.0) / shots


def run_plan(plan: EstimationPlan, e: Channel, shots: ShotModel = ShotModel()) -> EstimationResult:
    """Estimate F_pro by running every plan setting on ``e``."""
    if shots.shots_per_setting == 0:
        return EstimationResult(plan.evaluate(e), 0.0, plan.setting_count)

    if e.dim != plan.dim:
        raise DimensionMismatch(f"plan for dimension {plan.dim} cannot run on a channel of dimension {e.dim}")
    prepared: dict[int, tuple[ComplexMatrix, float]] = {}
    estimate = 0.0
    variance = 0.0
    with logfire.span("Simulating plan", scheme=plan.scheme, settings=plan.setting_count, shots=shots.shots_per_setting):
        for index, (k, l) in enumerate(plan.settings):
            if k not in prepared:
                state, scale = _preparation(plan.input_states[k])
                out = e.apply_operator(state)
                prepared[k] = ((out + dagger(out)) / 2, scale)
            state, scale = prepared[k]
            rng = np.random.default_rng([shots.seed, index])
            mean, var = _sampled_expectation(state, plan.spectra[l], shots.shots_per_setting, rng)
            weight = float(np.real(plan.coefficients[k, l])) * scale
            estimate += weight * mean
            variance += weight**2 * var
    d3 = plan.dim**3
    return EstimationResult(estimate / d3, float(np.sqrt(variance)) / d3, plan.setting_count)


def plan_export(plan: EstimationPlan) -> PlanExport:
    settings = [
        PlanSetting(
            input_index=k,
            observable_index=l,
            input_state=matrix_to_pairs(plan.input_states[k]),
            observable=matrix_to_pairs(plan.observables[l]),
            weight=(float(plan.coefficients[k, l].real), float(plan.coefficients[k, l].imag)),
        )
        for k, l in plan.settings
    ]
    return PlanExport(
        dim=plan.dim,
        scheme=plan.scheme,
        target_unitary=matrix_to_pairs(plan.target_unitary.matrix),
        settings=settings,
        gram_condition=plan.gram_condition,
    )


# -- process tomography ---------------------------------------------------------

_QUBIT_STATES = (
    np.array([1, 0], dtype=np.complex128),
    np.array([0, 1], dtype=np.complex128),
    np.array([1, 1], dtype=np.complex128) / np.sqrt(2),
    np.array([1, 1j], dtype=np.complex128) / np.sqrt(2),
)


def tomography_inputs(n_qubits: int) -> list[ComplexMatrix]:
    """Products of |0⟩, |1⟩, |+⟩, |+i⟩ as density matrices."""
    projectors = [np.outer(v, v.conj()) for v in _QUBIT_STATES]
    return [
        reduce(np.kron, word, np.eye(1, dtype=np.complex128))
        for word in itertools.product(projectors, repeat=n_qubits)
    ]


def _inverse_sqrt_psd(m: ComplexMatrix) -> ComplexMatrix:
    evals, evecs = np.linalg.eigh((m + dagger(m)) / 2)
    return (evecs / np.sqrt(np.clip(evals, 1e-12, None))) @ dagger(evecs)


def simulate_tomography(e: Channel, shots: ShotModel = ShotModel()) -> Channel:
    """Pauli-input / Pauli-observable tomography with linear inversion.

    The raw estimate is clamped to a PSD unit-trace matrix and then mapped
    to a trace-preserving Choi state by the congruence (Y^{-1/2}/√d ⊗ I),
    where Y is its ancilla marginal.
    """
    d = e.dim
    n = qubit_count(d)
    if n is None:
        raise DimensionMismatch(f"tomography needs a qubit register, got dimension {d}")
    inputs = tomography_inputs(n)
    paulis = OperatorBasis.pauli_products(n)
    spectra = [np.linalg.eigh(p) for p in paulis.operators]

    outputs = []
    with logfire.span("Simulating tomography", dim=d, shots=shots.shots_per_setting):
        for k, rho in enumerate(inputs):
            out = e.apply_operator(rho)
            out = (out + dagger(out)) / 2
            if shots.shots_per_setting == 0:
                expectations = [float(np.real(np.trace(p @ out))) for p in paulis.operators]
            else:
                expectations = [1.0]
                for l in range(1, len(paulis.operators)):
                    rng = np.random.default_rng([shots.seed, k * d**2 + l])
                    expectations.append(_sampled_expectation(out, spectra[l], shots.shots_per_setting, rng)[0])
            outputs.append(sum(x * p for x, p in zip(expectations, paulis.operators)) / d)

    # E(|q⟩⟨a|) by linear inversion over the prepared inputs
    columns = _vectors(inputs)
    units = [np.outer(np.eye(d)[q], np.eye(d)[a]) for q in range(d) for a in range(d)]
    c = np.linalg.solve(columns, _vectors(units))
    stacked = np.stack(outputs)
    choi = np.zeros((d * d, d * d), dtype=np.complex128)
    for index, unit in enumerate(units):
        image = np.einsum("k,kij->ij", c[:, index], stacked)
        choi += np.kron(unit, image) / d

    choi = (choi + dagger(choi)) / 2
    evals, evecs = np.linalg.eigh(choi)
    evals = np.clip(evals, 0.0, None)
    choi = (evecs * (evals / evals.sum())) @ dagger(evecs)
    marginal = partial_trace(choi, "B", (d, d))
    correction = np.kron(_inverse_sqrt_psd(marginal) / np.sqrt(d), np.eye(d))
    choi = correction @ choi @ dagger(correction)
    return Channel.from_choi((choi + dagger(choi)) / 2)
