"""Optimizers over density matrices and pure states.

``frank_wolfe`` minimizes a convex function over the density matrices of a
d-level system. Its linear subproblem over that set is solved by the
eigenvector of the smallest gradient eigenvalue, and the duality gap
tr(G(ρ − s)) is the stopping rule. Objectives may supply an analytic
gradient; otherwise gradients are symmetric finite differences along an
orthonormal basis of traceless Hermitian directions. With an analytic
gradient the iterate is periodically refined by quasi-Newton steps over
factorizations ρ = AA†/tr(AA†), which reach the tolerance where plain
conditional-gradient steps only creep towards it.

``pure_state_search`` handles the nonconvex worst-case problems (maximize a
convex / minimize a concave function) by quasi-Newton search over
normalized state vectors from several starts.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.optimize
from scipy.optimize import minimize_scalar

from .linalg import (
    ComplexMatrix,
    DensityMatrix,
    _eigh_desc,
    as_generator,
    dagger,
    project_density,
    random_hermitian,
    traceless_hermitian_basis,
)
from .models import OptimizerConfig, OptimizerDiagnostics, matrix_to_pairs
from .telemetry import logfire

DensityObjective = Callable[[ComplexMatrix], float]
DensityGradient = Callable[[ComplexMatrix], ComplexMatrix]
VectorObjective = Callable[[np.ndarray], float]

DEGENERATE_SPREAD = 1e-12
PERTURBATION_NORM = 1e-8
LINE_SEARCH_XATOL = 1e-10
POLISH_EVERY = 20
POLISH_GTOL = 1e-11
VALUE_TIE = 1e-10


@dataclass(frozen=True)
class OptimizerResult:
    value: float
    argmin_state: DensityMatrix
    iterations: int
    final_gap: float
    converged: bool
    starts: int = 1

    def diagnostics(self) -> OptimizerDiagnostics:
        return OptimizerDiagnostics(
            value=self.value,
            iterations=self.iterations,
            final_gap=self.final_gap,
            converged=self.converged,
            starts=self.starts,
            argmin_state=matrix_to_pairs(self.argmin_state.matrix),
        )

    def negated(self) -> "OptimizerResult":
        return OptimizerResult(-self.value, self.argmin_state, self.iterations, self.final_gap, self.converged, self.starts)


def fd_gradient(objective: DensityObjective, rho: ComplexMatrix, step: float) -> ComplexMatrix:
    """Finite-difference gradient, projected onto the traceless Hermitian subspace."""
    grad = np.zeros_like(rho, dtype=np.complex128)
    for direction in traceless_hermitian_basis(rho.shape[0]):
        plus = objective(project_density(rho + step * direction))
        minus = objective(project_density(rho - step * direction))
        grad += (plus - minus) / (2 * step) * direction
    return grad


def _extreme_vertex(grad: ComplexMatrix, rng: np.random.Generator) -> ComplexMatrix:
    """Rank-one density matrix minimizing tr(G s)."""
    evals, evecs = _eigh_desc(grad)
    if evals[0] - evals[-1] < DEGENERATE_SPREAD:
        logfire.debug("Degenerate gradient, perturbing linear subproblem", spread=float(evals[0] - evals[-1]))
        kick = random_hermitian(grad.shape[0], rng)
        kick *= PERTURBATION_NORM / np.linalg.norm(kick)
        evals, evecs = _eigh_desc(grad + kick)
    v = evecs[:, -1]
    return np.outer(v, np.conjugate(v))


def duality_gap(grad: ComplexMatrix, rho: ComplexMatrix) -> float:
    """tr(Gρ) minus the smallest eigenvalue of G: an upper bound on the suboptimality of ρ."""
    herm = (grad + dagger(grad)) / 2
    return float(np.real(np.trace(herm @ rho)) - np.linalg.eigvalsh(herm)[0])


def polish(
    objective: DensityObjective,
    gradient: DensityGradient,
    rho: ComplexMatrix,
    config: OptimizerConfig,
) -> tuple[ComplexMatrix, float]:
    """BFGS over the factor A of ρ = AA†/tr(AA†), started from A = V√Λ.

    The factor gradient is 2(G − tr(Gρ)I)A / tr(AA†) for the density-matrix
    gradient G. Rank-deficient iterates keep their rank, so this refines a
    Frank-Wolfe iterate rather than replacing it.
    """
    dim = rho.shape[0]
    size = dim * dim
    identity = np.eye(dim, dtype=np.complex128)

    def state(x: np.ndarray) -> tuple[ComplexMatrix, ComplexMatrix, float]:
        factor = (x[:size] + 1j * x[size:]).reshape(dim, dim)
        outer = factor @ dagger(factor)
        norm = float(np.real(np.trace(outer)))
        return factor, outer / norm, norm

    def value_and_jac(x: np.ndarray) -> tuple[float, np.ndarray]:
        factor, current, norm = state(x)
        grad = gradient(current)
        shifted = grad - np.real(np.trace(grad @ current)) * identity
        jac = 2 * shifted @ factor / norm
        return objective(current), np.concatenate([jac.real.ravel(), jac.imag.ravel()])

    evals, evecs = np.linalg.eigh((rho + dagger(rho)) / 2)
    start = evecs * np.sqrt(np.clip(evals, 0.0, None))
    x0 = np.concatenate([start.real.ravel(), start.imag.ravel()])
    found = scipy.optimize.minimize(
        value_and_jac, x0, jac=True, method="BFGS", options={"gtol": POLISH_GTOL, "maxiter": config.max_iterations}
    )
    _, polished, _ = state(found.x)
    return polished, objective(polished)


def frank_wolfe(
    objective: DensityObjective,
    start: ComplexMatrix,
    config: OptimizerConfig,
    rng: np.random.Generator,
    gradient: DensityGradient | None = None,
) -> OptimizerResult:
    """Conditional-gradient minimization from one start with exact line search.

    With an analytic ``gradient`` the iterate is polished every
    ``POLISH_EVERY`` iterations and once at the end, after which the gap is
    recomputed at the final iterate.
    """
    def grad_at(rho: ComplexMatrix) -> ComplexMatrix:
        return gradient(rho) if gradient is not None else fd_gradient(objective, rho, config.fd_step)

    def try_polish(rho: ComplexMatrix, value: float) -> tuple[ComplexMatrix, float, bool]:
        if gradient is None:
            return rho, value, False
        polished, polished_value = polish(objective, gradient, rho, config)
        if polished_value < value:
            return polished, polished_value, True
        return rho, value, False

    rho = project_density(start)
    value = objective(rho)
    gap = float("inf")
    converged = False
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        grad = grad_at(rho)
        vertex = _extreme_vertex(grad, rng)
        gap = float(np.real(np.trace(grad @ (rho - vertex))))
        if gap <= config.gap_tolerance:
            converged = True
            break

        if iteration % POLISH_EVERY == 0:
            rho, value, improved = try_polish(rho, value)
            if improved:
                continue

        direction = vertex - rho

        def along(t: float) -> float:
            return objective(rho + t * direction)

        search = minimize_scalar(along, bounds=(0.0, 1.0), method="bounded", options={"xatol": LINE_SEARCH_XATOL})
        step_value, step = min((float(search.fun), float(search.x)), (along(1.0), 1.0))
        if step_value >= value:
            # no descent along the vertex direction
            break
        rho = rho + step * direction
        value = step_value

    if gradient is not None:
        # a gap at tolerance still leaves the value that far from optimal
        rho, value, _ = try_polish(rho, value)
        gap = duality_gap(gradient(rho), rho)
        converged = gap <= config.gap_tolerance

    return OptimizerResult(value, DensityMatrix(project_density(rho)), iteration, gap, converged)


def _best_of(results: Sequence[OptimizerResult]) -> OptimizerResult:
    """Lowest value wins; among runs within ``VALUE_TIE`` of it, the earliest converged one is reported."""
    lowest = min(r.value for r in results)
    tied = [i for i, r in enumerate(results) if r.value <= lowest + VALUE_TIE]
    best = min(tied, key=lambda i: (not results[i].converged, i))
    chosen = results[best]
    return OptimizerResult(chosen.value, chosen.argmin_state, chosen.iterations, chosen.final_gap, chosen.converged, len(results))


def minimize_density(
    objective: DensityObjective,
    starts: Sequence[ComplexMatrix],
    config: OptimizerConfig,
    gradient: DensityGradient | None = None,
    fallback_starts: Sequence[ComplexMatrix] = (),
) -> OptimizerResult:
    """Frank-Wolfe from every start; the best run wins.

    ``fallback_starts`` are only run when the best of ``starts`` did not
    converge. Runs are seeded per start index, so the outcome does not
    depend on execution order.
    """
    queue = list(starts) + list(fallback_starts)
    seeds = np.random.SeedSequence(config.seed).spawn(len(queue))
    results: list[OptimizerResult] = []
    for index, (start, seed) in enumerate(zip(queue, seeds)):
        if index == len(starts) and results and _best_of(results).converged:
            logfire.debug("Skipping fallback starts", skipped=len(fallback_starts))
            break
        result = frank_wolfe(objective, start, config, as_generator(seed), gradient)
        logfire.debug(
            "Frank-Wolfe run finished",
            start=index,
            value=result.value,
            iterations=result.iterations,
            gap=result.final_gap,
            converged=result.converged,
        )
        results.append(result)
    best = _best_of(results)
    if not best.converged:
        logfire.warning("Optimizer did not reach gap tolerance", value=best.value, gap=best.final_gap, tolerance=config.gap_tolerance)
    return best


def _vector(x: np.ndarray) -> np.ndarray:
    half = x.shape[0] // 2
    psi = x[:half] + 1j * x[half:]
    return psi / np.linalg.norm(psi)


def _fd_vector_gradient(h: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    grad = np.empty_like(x)
    for k in range(x.shape[0]):
        offset = np.zeros_like(x)
        offset[k] = step
        grad[k] = (h(x + offset) - h(x - offset)) / (2 * step)
    return grad


def pure_state_search(
    objective: VectorObjective,
    starts: Sequence[np.ndarray],
    config: OptimizerConfig,
) -> OptimizerResult:
    """Minimize ``objective`` over normalized state vectors.

    ``final_gap`` is the norm of the finite-difference gradient at the
    normalized optimum, which is tangent to the sphere because the
    objective ignores norm and global phase.
    """
    def h(x: np.ndarray) -> float:
        return objective(_vector(x))

    def jac(x: np.ndarray) -> np.ndarray:
        return _fd_vector_gradient(h, x, config.fd_step)

    results = []
    for start in starts:
        psi0 = np.asarray(start, dtype=np.complex128)
        x0 = np.concatenate([psi0.real, psi0.imag])
        found = scipy.optimize.minimize(
            h, x0, jac=jac, method="BFGS", options={"gtol": config.gap_tolerance, "maxiter": config.max_iterations}
        )
        psi = _vector(found.x)
        x_unit = np.concatenate([psi.real, psi.imag])
        gap = float(np.linalg.norm(jac(x_unit)))
        results.append(
            OptimizerResult(
                h(x_unit),
                DensityMatrix(np.outer(psi, psi.conj())),
                int(found.nit),
                gap,
                bool(gap <= config.gap_tolerance),
            )
        )
    best = _best_of(results)
    if not best.converged:
        logfire.warning("Pure-state search did not reach gap tolerance", value=best.value, gap=best.final_gap)
    return best
