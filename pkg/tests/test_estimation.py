import numpy as np
import pytest

from procmetric.channels import (
    CNOT,
    HADAMARD,
    Channel,
    OperatorBasis,
    depolarizing,
    identity_channel,
    random_channel,
    random_unitary,
    unitary_channel,
)
from procmetric.errors import BadBasis, DegenerateSpanningSet, NoUnitaryBasis, NonPhysicalInput
from procmetric.estimation import (
    ShotModel,
    build_plan_derived,
    build_plan_general,
    build_plan_pauli_minimal,
    f_pro_unitary_basis,
    minimal_pauli_inputs,
    plan_export,
    run_plan,
    simulate_tomography,
    tomography_inputs,
)
from procmetric.process_metrics import j_distance, j_fidelity


def _random(dim, rng):
    return Channel.from_kraus(random_channel(dim, int(rng.integers(1, dim**2 + 1)), rng))


# =================================================================================================
# Test:  Unitary-basis formula
# =================================================================================================
@pytest.mark.parametrize("dim", [2, 4])
def test_unitary_basis_formula_matches_choi_overlap(dim):
    rng = np.random.default_rng(dim)
    for _ in range(10):
        e = _random(dim, rng)
        u = random_unitary(dim, rng)
        assert abs(f_pro_unitary_basis(e, u) - j_fidelity(e, unitary_channel(u))) < 1e-9


def test_unitary_basis_formula_weyl_qutrit():
    rng = np.random.default_rng(3)
    e, u = _random(3, rng), random_unitary(3, rng)
    assert abs(f_pro_unitary_basis(e, u, OperatorBasis.weyl(3)) - j_fidelity(e, unitary_channel(u))) < 1e-9


def test_unitary_basis_formula_basis_errors():
    with pytest.raises(NoUnitaryBasis):
        f_pro_unitary_basis(identity_channel(3), np.eye(3))
    with pytest.raises(BadBasis):
        f_pro_unitary_basis(identity_channel(2), np.eye(2), OperatorBasis.matrix_units(2))


def test_depolarizing_against_identity():
    assert abs(f_pro_unitary_basis(depolarizing(1.0, 2), np.eye(2)) - 0.25) < 1e-12


# =================================================================================================
# Test:  Plans
# =================================================================================================
@pytest.mark.parametrize("n_qubits", [1, 2])
def test_pauli_minimal_plan_uses_d_squared_settings(n_qubits):
    dim = 2**n_qubits
    plan = build_plan_pauli_minimal(random_unitary(dim, 5), n_qubits)
    assert plan.setting_count == dim**2
    for obs in plan.observables:
        assert np.allclose(obs, obs.conj().T)


@pytest.mark.parametrize("n_qubits", [1, 2])
def test_pauli_minimal_plan_matches_oracle(n_qubits):
    dim = 2**n_qubits
    rng = np.random.default_rng(10 + n_qubits)
    u = random_unitary(dim, rng)
    plan = build_plan_pauli_minimal(u, n_qubits)
    for _ in range(10):
        e = _random(dim, rng)
        assert abs(plan.evaluate(e) - j_fidelity(e, unitary_channel(u))) < 1e-8


def test_minimal_inputs_are_unnormalized_products():
    inputs = minimal_pauli_inputs(2)
    assert len(inputs) == 16
    assert np.isclose(np.trace(inputs[0]), 4)
    assert np.isclose(np.trace(inputs[5]), 4)


def test_general_plan_with_pauli_observables():
    u = CNOT
    plan = build_plan_general(u, minimal_pauli_inputs(2), OperatorBasis.pauli_products(2).operators)
    assert plan.scheme == "general"
    assert plan.setting_count <= 4**4
    e = _random(4, np.random.default_rng(1))
    assert abs(plan.evaluate(e) - j_fidelity(e, unitary_channel(u))) < 1e-8


def test_general_plan_splits_non_hermitian_observables():
    units = OperatorBasis.matrix_units(2).operators
    plan = build_plan_general(HADAMARD, tomography_inputs(1), units)
    # diagonal units are Hermitian, off-diagonal ones contribute two parts
    assert len(plan.observables) == 6
    e = _random(2, np.random.default_rng(2))
    assert abs(plan.evaluate(e) - j_fidelity(e, unitary_channel(HADAMARD))) < 1e-8


def test_derived_plan_any_inputs():
    plan = build_plan_derived(HADAMARD, tomography_inputs(1))
    assert 4 <= len(plan.observables) <= 8
    e = _random(2, np.random.default_rng(4))
    assert abs(plan.evaluate(e) - j_fidelity(e, unitary_channel(HADAMARD))) < 1e-8


def test_plan_invariant_under_input_order():
    inputs = minimal_pauli_inputs(1)
    e = _random(2, np.random.default_rng(6))
    forward = build_plan_derived(HADAMARD, inputs, OperatorBasis.pauli_products(1))
    backward = build_plan_derived(HADAMARD, inputs[::-1], OperatorBasis.pauli_products(1))
    assert abs(forward.evaluate(e) - backward.evaluate(e)) < 1e-10


def test_degenerate_inputs_rejected():
    inputs = [np.eye(2), np.eye(2), np.diag([1.0, 0.0]), np.array([[0.5, 0.5], [0.5, 0.5]])]
    with pytest.raises(DegenerateSpanningSet):
        build_plan_derived(HADAMARD, inputs)
    with pytest.raises(DegenerateSpanningSet):
        build_plan_derived(HADAMARD, minimal_pauli_inputs(1)[:3])


def test_plan_export():
    plan = build_plan_pauli_minimal(np.eye(2), 1)
    export = plan_export(plan)
    assert export.scheme == "pauli-minimal"
    assert len(export.settings) == 4
    assert export.settings[0].input_state[0][0] == (1.0, 0.0)


# =================================================================================================
# Test:  Shot noise
# =================================================================================================
def test_run_plan_exact():
    plan = build_plan_pauli_minimal(np.eye(2), 1)
    result = run_plan(plan, depolarizing(1.0, 2))
    assert abs(result.estimate - 0.25) < 1e-12
    assert result.stderr == 0.0
    assert result.settings == 4


def test_run_plan_seeded():
    plan = build_plan_pauli_minimal(HADAMARD, 1)
    e = _random(2, np.random.default_rng(7))
    a = run_plan(plan, e, ShotModel(1000, 3))
    b = run_plan(plan, e, ShotModel(1000, 3))
    assert a.estimate == b.estimate


def test_run_plan_within_error_bars():
    u = random_unitary(2, 8)
    plan = build_plan_pauli_minimal(u, 1)
    e = _random(2, np.random.default_rng(9))
    truth = j_fidelity(e, unitary_channel(u))
    result = run_plan(plan, e, ShotModel(1_000_000, 11))
    assert abs(result.estimate - truth) <= 4 * result.stderr + 1e-12


def test_stderr_scales_with_shots():
    plan = build_plan_pauli_minimal(HADAMARD, 1)
    e = depolarizing(0.3, 2)
    coarse = run_plan(plan, e, ShotModel(10_000, 1)).stderr
    fine = run_plan(plan, e, ShotModel(1_000_000, 1)).stderr
    assert abs(coarse / fine - 10.0) < 2.0


@pytest.mark.slow
def test_shot_estimates_are_unbiased():
    plan = build_plan_pauli_minimal(HADAMARD, 1)
    e = _random(2, np.random.default_rng(12))
    truth = j_fidelity(e, unitary_channel(HADAMARD))
    results = [run_plan(plan, e, ShotModel(2000, seed)) for seed in range(200)]
    mean = np.mean([r.estimate for r in results])
    combined = np.sqrt(np.sum([r.stderr**2 for r in results])) / len(results)
    assert abs(mean - truth) <= 3 * combined


def test_shots_need_physical_inputs():
    units = OperatorBasis.matrix_units(2).operators
    plan = build_plan_general(np.eye(2), units, OperatorBasis.pauli_products(1).operators)
    with pytest.raises(NonPhysicalInput):
        run_plan(plan, identity_channel(2), ShotModel(100, 0))


def test_shot_model_validation():
    with pytest.raises(ValueError):
        ShotModel(-1)


# =================================================================================================
# Test:  Tomography
# =================================================================================================
def test_tomography_inputs_are_states():
    for rho in tomography_inputs(2):
        assert np.isclose(np.trace(rho), 1.0)


@pytest.mark.parametrize("dim", [2, 4])
def test_exact_tomography_round_trip(dim):
    e = _random(dim, np.random.default_rng(20 + dim))
    rebuilt = simulate_tomography(e)
    assert np.max(np.abs(rebuilt.choi.matrix - e.choi.matrix)) < 1e-8
    assert j_distance(rebuilt, e) < 1e-8


def test_sampled_tomography_close_to_truth():
    e = depolarizing(1.0, 2)
    rebuilt = simulate_tomography(e, ShotModel(100_000, 5))
    assert j_distance(rebuilt, e) < 0.02


def test_tomography_of_unitary_stays_valid():
    rebuilt = simulate_tomography(unitary_channel(HADAMARD), ShotModel(500, 1))
    assert rebuilt.dim == 2
    assert j_fidelity(rebuilt, unitary_channel(HADAMARD)) > 0.8
