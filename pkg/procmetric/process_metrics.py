"""Process-level distance measures.

J measures compare Choi states; average measures are Haar Monte Carlo
estimates; worst-case measures optimize over pure inputs without an
ancilla; stabilized measures attach a d-dimensional ancilla and optimize
the convex objective g(ρ) = Δ((I⊗E)(ψ_ρ), (I⊗F)(ψ_ρ)) over input density
matrices ρ, where ψ_ρ is the canonical purification of ρ.
"""

from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

from .channels import Channel, _require_same_dim, identity_channel, tensor
from .errors import AncillaTooSmall
from .linalg import (
    RANK_ATOL,
    ComplexMatrix,
    DensityMatrix,
    RealVector,
    SeedLike,
    UnitaryOperator,
    dagger,
    haar_states,
    partial_trace,
    purification_matrix,
    random_density,
)
from .models import MeasureReport, MonteCarloDiagnostics, OptimizerConfig
from .optimizer import OptimizerResult, minimize_density, pure_state_search
from .state_metrics import (
    FidelityMetrics,
    _fidelity,
    _trace_distance,
    c_from_fidelity,
    sandwich,
)
from .telemetry import logfire

Metric = Literal["D", "F"]

CONSISTENCY_ATOL = 1e-6
SIGN_ATOL = 1e-12
SQRT_FLOOR = 1e-8


def _check_metric(metric: str) -> None:
    if metric not in ("D", "F"):
        raise ValueError(f"metric must be 'D' or 'F', got {metric!r}")


def _state_measure(metric: Metric, a: ComplexMatrix, b: ComplexMatrix) -> float:
    return _trace_distance(a, b) if metric == "D" else _fidelity(a, b)


# -- batched state measures ------------------------------------------------------

def _batched_trace_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a - b
    diff = (diff + np.conjugate(np.swapaxes(diff, -1, -2))) / 2
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff)), axis=-1)


def _batched_fidelity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh((a + np.conjugate(np.swapaxes(a, -1, -2))) / 2)
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))[..., np.newaxis, :]) @ np.conjugate(np.swapaxes(evecs, -1, -2))
    inner = root @ b @ root
    inner = (inner + np.conjugate(np.swapaxes(inner, -1, -2))) / 2
    lam = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return np.sum(np.sqrt(lam), axis=-1) ** 2


def _batched_measure(metric: Metric, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _batched_trace_distance(a, b) if metric == "D" else _batched_fidelity(a, b)


def _batched_outputs(ch: Channel, vecs: np.ndarray) -> np.ndarray:
    """E(|ψ⟩⟨ψ|) for every row ψ of ``vecs``."""
    images = np.einsum("kij,sj->ski", ch.kraus_stack, vecs)
    return np.einsum("ski,skj->sij", images, np.conjugate(images))


def _batched_bipartite_outputs(ch: Channel, amplitudes: np.ndarray) -> np.ndarray:
    """(I⊗E)(|ψ⟩⟨ψ|) for a batch of (d_A, d) amplitude matrices."""
    samples = amplitudes.shape[0]
    vecs = np.einsum("saq,kpq->skap", amplitudes, ch.kraus_stack).reshape(samples, ch.kraus_stack.shape[0], -1)
    return np.einsum("ski,skj->sij", vecs, np.conjugate(vecs))


# -- J measures -------------------------------------------------------------------

def j_distance(e: Channel, f: Channel) -> float:
    """D_pro: trace distance between the Choi states."""
    _require_same_dim(e, f)
    return _trace_distance(e.choi.matrix, f.choi.matrix)


def _unitary_overlap(ch: Channel, u: ComplexMatrix) -> float:
    w = u.T.reshape(-1) / np.sqrt(ch.dim)
    return float(np.real(np.vdot(w, ch.choi.matrix @ w)))


def j_fidelity(e: Channel, f: Channel) -> float:
    """F_pro: fidelity between the Choi states.

    A unitary argument has a pure Choi state (I⊗U)|Φ⟩, so the fidelity
    collapses to the overlap ⟨Φ_U|ρ|Φ_U⟩ with the other Choi state.
    """
    _require_same_dim(e, f)
    if f.is_unitary:
        return _unitary_overlap(e, f.kraus.elements[0])
    if e.is_unitary:
        return _unitary_overlap(f, e.kraus.elements[0])
    return _fidelity(e.choi.matrix, f.choi.matrix)


def _choi_root(choi: ComplexMatrix) -> ComplexMatrix:
    """√ρ with eigenvalues at or below RANK_ATOL set to zero."""
    evals, evecs = np.linalg.eigh(choi)
    roots = np.sqrt(np.where(evals > RANK_ATOL, evals, 0.0))
    return (evecs * roots) @ dagger(evecs)


def j_fidelity_general(e: Channel, f: Channel) -> float:
    """F_pro as ‖√ρ_E √ρ_F‖₁², without the unitary shortcut."""
    _require_same_dim(e, f)
    overlap = _choi_root(e.choi.matrix) @ _choi_root(f.choi.matrix)
    return float(np.sum(np.linalg.svd(overlap, compute_uv=False)) ** 2)


def j_metrics(e: Channel, f: Channel) -> FidelityMetrics:
    return FidelityMetrics.from_fidelity(j_fidelity(e, f))


def f_ave_formula(e: Channel, u: UnitaryOperator | Channel) -> float:
    """Average fidelity to a unitary target from F_ave = (d F_pro + 1) / (d + 1)."""
    target = u if isinstance(u, Channel) else Channel.from_unitary(u)
    target.as_unitary()
    d = _require_same_dim(e, target)
    return (d * j_fidelity(e, target) + 1) / (d + 1)


def process_purity(e: Channel) -> float:
    """tr(ρ_E²)."""
    rho = e.choi.matrix
    return float(np.real(np.vdot(rho, rho)))


# -- Monte Carlo averages ---------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    stderr: float
    samples: int
    seed: int

    def diagnostics(self) -> MonteCarloDiagnostics:
        return MonteCarloDiagnostics(estimate=self.estimate, stderr=self.stderr, samples=self.samples, seed=self.seed)


def _summarize(values: np.ndarray, seed: int) -> MonteCarloEstimate:
    n = values.shape[0]
    spread = float(np.std(values, ddof=1)) if n > 1 else 0.0
    return MonteCarloEstimate(float(np.mean(values)), spread / np.sqrt(n), n, seed)


def ave_measure_mc(e: Channel, f: Channel, metric: Metric, samples: int = 10_000, seed: int = 0) -> MonteCarloEstimate:
    """Mean of Δ(E(ψ), F(ψ)) over Haar-random pure inputs ψ."""
    _check_metric(metric)
    dim = _require_same_dim(e, f)
    if samples < 2:
        raise ValueError("Monte Carlo needs at least two samples")
    vecs = haar_states(dim, samples, seed)
    values = _batched_measure(metric, _batched_outputs(e, vecs), _batched_outputs(f, vecs))
    return _summarize(values, seed)


def stabilized_average_mc(
    e: Channel, f: Channel, metric: Metric, ancilla_dim: int, samples: int = 10_000, seed: int = 0
) -> MonteCarloEstimate:
    """Haar average of Δ for I_A⊗E against I_A⊗F."""
    ancilla = identity_channel(ancilla_dim)
    return ave_measure_mc(tensor(ancilla, e), tensor(ancilla, f), metric, samples, seed)


# -- worst-case and stabilized ----------------------------------------------------

def _basis_vectors(dim: int) -> list[np.ndarray]:
    return list(np.eye(dim, dtype=np.complex128))


def worst_case(e: Channel, f: Channel, metric: Metric, config: OptimizerConfig) -> OptimizerResult:
    """D_max or F_min over pure inputs of the system alone."""
    _check_metric(metric)
    dim = _require_same_dim(e, f)
    sign = -1.0 if metric == "D" else 1.0

    def objective(psi: np.ndarray) -> float:
        rho = np.outer(psi, np.conjugate(psi))
        return sign * _state_measure(metric, e.apply_operator(rho), f.apply_operator(rho))

    starts = _basis_vectors(dim) + list(haar_states(dim, config.restarts, config.seed))
    with logfire.span("Worst-case search", metric=metric, dim=dim, starts=len(starts)):
        result = pure_state_search(objective, starts, config)
    return result.negated() if metric == "D" else result


def stabilized_objective(
    e: Channel, f: Channel, metric: Metric, rho: ComplexMatrix | DensityMatrix, ancilla_dim: int | None = None
) -> float:
    """Δ((I⊗E)(ψ_ρ), (I⊗F)(ψ_ρ)) for the canonical purification ψ_ρ of ρ."""
    _check_metric(metric)
    dim = _require_same_dim(e, f)
    arr = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)
    amplitudes = purification_matrix(arr, ancilla_dim or dim)
    return _state_measure(metric, e.apply_to_bipartite(amplitudes), f.apply_to_bipartite(amplitudes))


@dataclass(frozen=True)
class StabilizedProblem:
    """The stabilized objective written through the Choi states.

    For an input ρ with R = ρᵀ and S = √R the two outputs on ancilla ⊗ system
    are d(S⊗I)ρ_E(S⊗I) and d(S⊗I)ρ_F(S⊗I), whatever purification is used.
    Their fidelity is (d‖√ρ_E (R⊗I) √ρ_F‖₁)², a trace norm of an expression
    linear in R, and their trace distance is ½‖d(S⊗I)(ρ_E − ρ_F)(S⊗I)‖₁.
    Both come with exact (super)gradients, so the optimizer needs no finite
    differences.
    """
    metric: Metric
    dim: int
    root_e: ComplexMatrix
    root_f: ComplexMatrix
    difference: ComplexMatrix

    @classmethod
    def build(cls, e: Channel, f: Channel, metric: Metric) -> "StabilizedProblem":
        _check_metric(metric)
        dim = _require_same_dim(e, f)
        return cls(metric, dim, _choi_root(e.choi.matrix), _choi_root(f.choi.matrix), e.choi.matrix - f.choi.matrix)

    def _lift(self, m: ComplexMatrix) -> ComplexMatrix:
        return np.kron(m, np.eye(self.dim))

    def _trace_system(self, m: ComplexMatrix) -> ComplexMatrix:
        return partial_trace(m, "B", (self.dim, self.dim))

    def _input_root(self, rho: ComplexMatrix) -> tuple[RealVector, ComplexMatrix, ComplexMatrix]:
        r = np.asarray(rho, dtype=np.complex128).T
        evals, evecs = np.linalg.eigh((r + dagger(r)) / 2)
        roots = np.sqrt(np.clip(evals, 0.0, None))
        return roots, evecs, (evecs * roots) @ dagger(evecs)

    def _overlap(self, rho: ComplexMatrix) -> ComplexMatrix:
        return self.root_e @ self._lift(np.asarray(rho, dtype=np.complex128).T) @ self.root_f

    def _output_difference(self, root: ComplexMatrix) -> ComplexMatrix:
        lifted = self._lift(root)
        z = self.dim * lifted @ self.difference @ lifted
        return (z + dagger(z)) / 2

    def value(self, rho: ComplexMatrix) -> float:
        if self.metric == "F":
            return (self.dim * float(np.sum(np.linalg.svd(self._overlap(rho), compute_uv=False)))) ** 2
        _, _, root = self._input_root(rho)
        return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(self._output_difference(root)))))

    def gradient(self, rho: ComplexMatrix) -> ComplexMatrix:
        """Hermitian G with dg = tr(G dρ)."""
        if self.metric == "F":
            u, s, vh = np.linalg.svd(self._overlap(rho))
            k = self._trace_system(self.root_f @ dagger(vh) @ dagger(u) @ self.root_e)
            root_fidelity = self.dim * float(np.sum(s))
            return (root_fidelity * self.dim * (k + dagger(k))).T

        roots, evecs, root = self._input_root(rho)
        zvals, zvecs = np.linalg.eigh(self._output_difference(root))
        signs = np.where(np.abs(zvals) > SIGN_ATOL, np.sign(zvals), 0.0)
        n = self.difference @ self._lift(root) @ ((zvecs * signs) @ dagger(zvecs))
        k = self._trace_system(n + dagger(n))
        # dS from dR in the eigenbasis of R: dS_ij = dR_ij / (√r_i + √r_j)
        weights = 1.0 / np.maximum(roots[:, None] + roots[None, :], SQRT_FLOOR)
        grad_r = evecs @ ((dagger(evecs) @ k @ evecs) * weights) @ dagger(evecs)
        return (0.5 * self.dim * grad_r).T


def stabilized(
    e: Channel,
    f: Channel,
    metric: Metric,
    config: OptimizerConfig,
    ancilla_dim: int | None = None,
    warm_starts: Sequence[ComplexMatrix | DensityMatrix] = (),
) -> OptimizerResult:
    """D_stab or F_stab by Frank-Wolfe over input density matrices.

    Starts are I/d, every computational basis projector and the caller's
    warm starts; ``config.restarts`` seeded random density matrices follow
    only if none of those runs converged. With ``ancilla_dim`` the optimum
    is re-evaluated through an explicit purification on that ancilla.
    """
    _check_metric(metric)
    dim = _require_same_dim(e, f)
    if ancilla_dim is not None and ancilla_dim < dim:
        raise AncillaTooSmall(f"stabilized measures need an ancilla of dimension at least {dim}, got {ancilla_dim}")
    problem = StabilizedProblem.build(e, f, metric)
    sign = -1.0 if metric == "D" else 1.0

    def objective(rho: ComplexMatrix) -> float:
        return sign * problem.value(rho)

    def gradient(rho: ComplexMatrix) -> ComplexMatrix:
        return sign * problem.gradient(rho)

    starts: list[ComplexMatrix] = [np.eye(dim, dtype=np.complex128) / dim]
    starts += [np.outer(v, v) for v in _basis_vectors(dim)]
    starts += [w.matrix if isinstance(w, DensityMatrix) else np.asarray(w, dtype=np.complex128) for w in warm_starts]
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    fallback = [random_density(dim, np.random.default_rng(s)).matrix for s in seeds]

    with logfire.span("Stabilized optimization", metric=metric, dim=dim, starts=len(starts) + len(fallback)):
        result = minimize_density(objective, starts, config, gradient, fallback)
    if ancilla_dim is not None and ancilla_dim != dim:
        result = replace(result, value=sign * stabilized_objective(e, f, metric, result.argmin_state, ancilla_dim))
    logfire.info("Stabilized measure computed", metric=metric, value=sign * result.value, converged=result.converged)
    return result.negated() if metric == "D" else result


def brute_force_stabilized(
    e: Channel, f: Channel, metric: Metric, samples: int, seed: SeedLike, ancilla_dim: int | None = None
) -> float:
    """Extreme Δ over Haar-random pure inputs on ancilla ⊗ system (max for D, min for F)."""
    _check_metric(metric)
    dim = _require_same_dim(e, f)
    d_a = ancilla_dim or dim
    vecs = haar_states(d_a * dim, samples, seed).reshape(samples, d_a, dim)
    values = _batched_measure(metric, _batched_bipartite_outputs(e, vecs), _batched_bipartite_outputs(f, vecs))
    return float(values.max() if metric == "D" else values.min())


def brute_force_worst_case(e: Channel, f: Channel, metric: Metric, samples: int, seed: SeedLike) -> float:
    """Extreme Δ over Haar-random pure inputs of the system alone."""
    _check_metric(metric)
    dim = _require_same_dim(e, f)
    vecs = haar_states(dim, samples, seed)
    values = _batched_measure(metric, _batched_outputs(e, vecs), _batched_outputs(f, vecs))
    return float(values.max() if metric == "D" else values.min())


# -- full report ------------------------------------------------------------------

def full_report(
    e: Channel,
    f: Channel,
    config: OptimizerConfig,
    mc_samples: int = 10_000,
    mc_seed: int | None = None,
) -> MeasureReport:
    """Every measure for real channel ``e`` against ideal channel ``f``."""
    dim = _require_same_dim(e, f)
    seed = config.seed if mc_seed is None else mc_seed
    with logfire.span("Full measure report", dim=dim):
        d_pro = j_distance(e, f)
        f_pro = j_fidelity(e, f)
        f_ave = f_ave_formula(e, f) if f.is_unitary else None
        d_ave = ave_measure_mc(e, f, "D", mc_samples, seed)
        f_ave_mc = ave_measure_mc(e, f, "F", mc_samples, seed)

        d_max = worst_case(e, f, "D", config)
        f_min = worst_case(e, f, "F", config)
        d_stab = stabilized(e, f, "D", config, warm_starts=[d_max.argmin_state])
        f_stab = stabilized(e, f, "F", config, warm_starts=[f_min.argmin_state])

    stab = FidelityMetrics.from_fidelity(f_stab.value)
    consistency = {
        "fvdg_pro": sandwich(d_pro, f_pro).holds,
        "fvdg_stab": sandwich(d_stab.value, f_stab.value, atol=CONSISTENCY_ATOL).holds,
        "d_max_le_d_stab": bool(d_max.value <= d_stab.value + CONSISTENCY_ATOL),
        "f_min_ge_f_stab": bool(f_min.value >= f_stab.value - CONSISTENCY_ATOL),
        "d_pro_le_d_stab": bool(d_pro <= d_stab.value + CONSISTENCY_ATOL),
        "f_stab_le_f_pro": bool(f_stab.value <= f_pro + CONSISTENCY_ATOL),
    }
    failed = [name for name, ok in consistency.items() if not ok]
    if failed:
        logfire.warning("Consistency checks failed", checks=failed)

    return MeasureReport(
        dim=dim,
        d_pro=d_pro,
        f_pro=f_pro,
        c_pro=c_from_fidelity(f_pro),
        f_ave=f_ave,
        d_ave_mc=d_ave.estimate,
        f_ave_mc=f_ave_mc.estimate,
        d_max=d_max.value,
        f_min=f_min.value,
        d_stab=d_stab.value,
        f_stab=stab.fidelity,
        c_stab=stab.c,
        a_stab=stab.angle,
        b_stab=stab.bures,
        process_purity=process_purity(e),
        ideal_process_purity=process_purity(f),
        optimizer={
            "d_max": d_max.diagnostics(),
            "f_min": f_min.diagnostics(),
            "d_stab": d_stab.diagnostics(),
            "f_stab": f_stab.diagnostics(),
        },
        monte_carlo={"d_ave": d_ave.diagnostics(), "f_ave": f_ave_mc.diagnostics()},
        consistency=consistency,
    )


def all_converged(report: MeasureReport) -> bool:
    return all(diag.converged for diag in report.optimizer.values())
