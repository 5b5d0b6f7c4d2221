import numpy as np

from procmetric.linalg import DensityMatrix, random_density, random_hermitian
from procmetric.models import OptimizerConfig
from procmetric.optimizer import (
    OptimizerResult,
    _best_of,
    duality_gap,
    fd_gradient,
    frank_wolfe,
    minimize_density,
    polish,
    pure_state_search,
)

CONFIG = OptimizerConfig(restarts=2, max_iterations=200, seed=0)


def _linear(h):
    return lambda rho: float(np.real(np.trace(h @ rho)))


def test_fd_gradient_of_linear_objective():
    h = random_hermitian(3, 1)
    grad = fd_gradient(_linear(h), np.eye(3, dtype=complex) / 3, 1e-5)
    traceless = h - np.trace(h) / 3 * np.eye(3)
    assert np.allclose(grad, traceless, atol=1e-6)


def test_frank_wolfe_linear_objective_reaches_lowest_eigenvalue():
    h = random_hermitian(3, 2)
    result = frank_wolfe(_linear(h), np.eye(3, dtype=complex) / 3, CONFIG, np.random.default_rng(0))
    assert abs(result.value - np.linalg.eigvalsh(h).min()) < 1e-9
    assert isinstance(result.argmin_state, DensityMatrix)


def test_frank_wolfe_degenerate_gradient_converges_immediately():
    # quadratic bowl centred on the starting point: zero gradient
    center = np.eye(2, dtype=complex) / 2

    def bowl(rho):
        return float(np.real(np.sum(np.abs(rho - center) ** 2)))

    result = frank_wolfe(bowl, center, CONFIG, np.random.default_rng(0))
    assert result.converged
    assert result.iterations == 1
    assert result.value < 1e-12


def test_frank_wolfe_never_increases_value():
    h = random_hermitian(2, 3)
    start = random_density(2, 4).matrix
    result = frank_wolfe(_linear(h), start, CONFIG, np.random.default_rng(1))
    assert result.value <= _linear(h)(start) + 1e-12


def test_best_of_prefers_earliest_tie():
    state = DensityMatrix(np.eye(2) / 2)
    results = [
        OptimizerResult(0.5, state, 3, 1e-3, False),
        OptimizerResult(0.2, state, 4, 1e-8, True),
        OptimizerResult(0.2, state, 5, 1e-2, False),
    ]
    best = _best_of(results)
    assert best.iterations == 4
    assert best.converged
    assert best.starts == 3


def test_minimize_density_is_deterministic():
    h = random_hermitian(2, 5)
    starts = [np.eye(2, dtype=complex) / 2, random_density(2, 6).matrix]
    first = minimize_density(_linear(h), starts, CONFIG)
    second = minimize_density(_linear(h), starts, CONFIG)
    assert first.value == second.value
    assert first.starts == 2


def test_best_of_prefers_converged_run_within_value_tie():
    state = DensityMatrix(np.eye(2) / 2)
    results = [
        OptimizerResult(0.2, state, 3, 1e-3, False),
        OptimizerResult(0.2 + 1e-12, state, 4, 1e-9, True),
        OptimizerResult(0.3, state, 5, 0.0, True),
    ]
    best = _best_of(results)
    assert best.iterations == 4
    assert best.converged


def test_negated_and_diagnostics():
    result = OptimizerResult(-0.75, DensityMatrix(np.eye(2) / 2), 1, 0.0, True)
    flipped = result.negated()
    assert flipped.value == 0.75
    diag = flipped.diagnostics()
    assert diag.converged
    assert diag.argmin_state[0][0] == (0.5, 0.0)


def test_pure_state_search_finds_ground_state():
    h = random_hermitian(3, 7)
    evals, evecs = np.linalg.eigh(h)

    def energy(psi):
        return float(np.real(np.vdot(psi, h @ psi)))

    starts = [np.eye(3, dtype=complex)[k] for k in range(3)]
    result = pure_state_search(energy, starts, CONFIG)
    assert abs(result.value - evals[0]) < 1e-8
    overlap = np.real(np.vdot(evecs[:, 0], result.argmin_state.matrix @ evecs[:, 0]))
    assert overlap > 1 - 1e-6
    assert result.starts == 3


def _bowl(center):
    def value(rho):
        return float(np.real(np.sum(np.abs(rho - center) ** 2)))

    def gradient(rho):
        return 2 * (rho - center)

    return value, gradient


def test_duality_gap():
    h = random_hermitian(3, 8)
    evals, evecs = np.linalg.eigh(h)
    ground = np.outer(evecs[:, 0], evecs[:, 0].conj())
    assert abs(duality_gap(h, ground)) < 1e-12
    assert np.isclose(duality_gap(h, np.eye(3) / 3), evals.mean() - evals[0])


def test_polish_reaches_interior_minimum():
    center = random_density(3, 9).matrix
    value, gradient = _bowl(center)
    rough = 0.5 * center + 0.5 * np.eye(3) / 3
    polished, polished_value = polish(value, gradient, rough, CONFIG)
    assert polished_value < 1e-12
    assert np.allclose(polished, center, atol=1e-6)
    assert np.isclose(np.trace(polished).real, 1.0)


def test_frank_wolfe_with_gradient_certifies_interior_optimum():
    center = random_density(3, 10).matrix
    value, gradient = _bowl(center)
    result = frank_wolfe(value, np.eye(3, dtype=complex) / 3, CONFIG, np.random.default_rng(2), gradient)
    assert result.converged
    assert result.final_gap <= CONFIG.gap_tolerance
    assert result.value < 1e-12
    assert np.allclose(result.argmin_state.matrix, center, atol=1e-6)


def test_frank_wolfe_with_gradient_on_linear_objective():
    h = random_hermitian(3, 11)
    result = frank_wolfe(_linear(h), np.eye(3, dtype=complex) / 3, CONFIG, np.random.default_rng(3), lambda rho: h)
    assert result.converged
    assert abs(result.value - np.linalg.eigvalsh(h).min()) < 1e-10


def test_fallback_starts_skipped_after_convergence():
    h = random_hermitian(2, 12)
    fallback = [random_density(2, 13).matrix, random_density(2, 14).matrix]
    result = minimize_density(_linear(h), [np.eye(2, dtype=complex) / 2], CONFIG, lambda rho: h, fallback)
    assert result.converged
    assert result.starts == 1


def test_fallback_starts_run_when_no_start_converges():
    # a single iteration cannot close the gap of a generic interior minimum
    center = random_density(3, 15).matrix
    value, _ = _bowl(center)
    tight = OptimizerConfig(restarts=2, max_iterations=1, seed=0)
    fallback = [random_density(3, 16).matrix]
    result = minimize_density(value, [np.eye(3, dtype=complex) / 3], tight, fallback_starts=fallback)
    assert not result.converged
    assert result.starts == 2
