import numpy as np
import pytest
from hypothesis import given, settings, seed
from hypothesis import strategies as st

from procmetric.errors import AncillaTooSmall, IndefiniteInput, InvalidState, NonHermitianInput, NonSquareInput, NonUnitaryTarget
from procmetric.linalg import (
    DensityMatrix,
    PureState,
    UnitaryOperator,
    haar_state,
    haar_states,
    hermitian_eig,
    max_entangled,
    partial_trace,
    permute_subsystems,
    project_density,
    psd_sqrt,
    purification_matrix,
    purify,
    random_density,
    trace_norm,
    traceless_hermitian_basis,
)


# =================================================================================================
# Test:  Eigendecomposition and square roots
# =================================================================================================
def test_hermitian_eig_descending_and_phase_fixed():
    m = np.array([[2, 1j], [-1j, 2]])
    evals, evecs = hermitian_eig(m)
    assert np.allclose(evals, [3, 1])
    pivots = np.argmax(np.abs(evecs), axis=0)
    for col, row in enumerate(pivots):
        assert abs(evecs[row, col].imag) < 1e-12
        assert evecs[row, col].real >= 0
    assert np.allclose((evecs * evals) @ evecs.conj().T, m)


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(NonHermitianInput):
        hermitian_eig(np.array([[0, 1], [0, 0]]))


def test_psd_sqrt_squares_back():
    rho = random_density(3, 5).matrix
    root = psd_sqrt(rho)
    assert np.allclose(root @ root, rho)


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(IndefiniteInput):
        psd_sqrt(np.diag([1.0, -0.5]))


def test_trace_norm():
    assert np.isclose(trace_norm(np.diag([1.0, -2.0])), 3.0)
    assert np.isclose(trace_norm(np.array([[0, 2], [0, 0]])), 2.0)
    with pytest.raises(NonSquareInput):
        trace_norm(np.ones((2, 3)))


# =================================================================================================
# Test:  Subsystems
# =================================================================================================
def test_partial_trace_of_product():
    a = random_density(2, 1).matrix
    b = random_density(3, 2).matrix
    joint = np.kron(a, b)
    assert np.allclose(partial_trace(joint, "B", (2, 3)), a)
    assert np.allclose(partial_trace(joint, "A", (2, 3)), b)


def test_permute_subsystems_swaps_factors():
    a = random_density(2, 3).matrix
    b = random_density(3, 4).matrix
    assert np.allclose(permute_subsystems(np.kron(a, b), (2, 3), (1, 0)), np.kron(b, a))


def test_max_entangled_marginal():
    phi = max_entangled(3)
    assert np.isclose(np.linalg.norm(phi), 1.0)
    assert np.allclose(partial_trace(np.outer(phi, phi.conj()), "A", (3, 3)), np.eye(3) / 3)


# =================================================================================================
# Test:  State types
# =================================================================================================
def test_pure_state_requires_normalization():
    with pytest.raises(InvalidState):
        PureState(np.array([1.0, 1.0]))
    assert np.isclose(PureState.from_vector([1.0, 1.0]).amplitudes[0], 1 / np.sqrt(2))


def test_density_matrix_validation():
    with pytest.raises(InvalidState):
        DensityMatrix(np.eye(2))
    with pytest.raises(IndefiniteInput):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(NonHermitianInput):
        DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
    rho = DensityMatrix(np.eye(2) / 2)
    assert rho.rank() == 2
    assert np.isclose(rho.purity(), 0.5)


def test_unitary_operator_validation():
    with pytest.raises(NonUnitaryTarget):
        UnitaryOperator(np.diag([1.0, 0.5]))


def test_purification_reproduces_state():
    rho = random_density(3, 11)
    psi = purify(rho, 3)
    assert np.allclose(partial_trace(psi.projector(), "A", (3, 3)), rho.matrix)


def test_purification_with_larger_ancilla_pads_zeros():
    rho = random_density(2, 4).matrix
    amps = purification_matrix(rho, 4)
    assert amps.shape == (4, 2)
    assert np.allclose(amps[2:], 0)
    assert np.allclose(amps.T @ amps.conj(), rho)


def test_purification_ancilla_too_small():
    with pytest.raises(AncillaTooSmall):
        purification_matrix(np.eye(3) / 3, 2)


# =================================================================================================
# Test:  Sampling
# =================================================================================================
def test_haar_states_are_normalized_and_seeded():
    a = haar_states(4, 50, 9)
    b = haar_states(4, 50, 9)
    assert np.allclose(np.linalg.norm(a, axis=1), 1.0)
    assert np.array_equal(a, b)
    assert haar_state(3, 0).dim == 3


def test_haar_states_mean_projector_is_maximally_mixed():
    vecs = haar_states(2, 20_000, 3)
    mean = np.einsum("si,sj->ij", vecs, vecs.conj()) / len(vecs)
    assert np.allclose(mean, np.eye(2) / 2, atol=0.02)


@seed(3)
@settings(max_examples=25, deadline=None)
@given(dim=st.integers(min_value=2, max_value=4), sample_seed=st.integers(min_value=0, max_value=2**31))
def test_random_density_is_valid(dim, sample_seed):
    rho = random_density(dim, sample_seed)
    assert np.isclose(np.trace(rho.matrix).real, 1.0)
    assert np.linalg.eigvalsh(rho.matrix).min() >= -1e-12


# =================================================================================================
# Test:  Projection and directions
# =================================================================================================
def test_project_density_clamps_and_renormalizes():
    out = project_density(np.diag([0.8, 0.4, -0.2]))
    assert np.allclose(out, np.diag([2 / 3, 1 / 3, 0.0]))
    assert np.allclose(project_density(np.zeros((2, 2))), np.eye(2) / 2)


def test_project_density_of_matrix_without_positive_part():
    for m in (np.zeros((3, 3)), -np.eye(3), np.diag([0.0, -1.0, -2.0])):
        out = project_density(m)
        assert np.all(np.isfinite(out))
        assert np.allclose(out, np.eye(3) / 3)


def test_traceless_hermitian_basis_is_orthonormal():
    basis = traceless_hermitian_basis(3)
    assert len(basis) == 8
    gram = np.array([[np.trace(a.conj().T @ b) for b in basis] for a in basis])
    assert np.allclose(gram, np.eye(8))
    for element in basis:
        assert np.isclose(np.trace(element), 0)
        assert np.allclose(element, element.conj().T)
