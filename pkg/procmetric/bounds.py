"""Error bounds for noisy function and sampling computations.

A function computation prepares |x⟩, runs a channel and reads out in the
computational basis, succeeding when it sees |f(x)⟩. A sampling
computation reads out the same way and is judged by the distance between
the real and ideal outcome distributions. The process measures bound both
kinds of error:

    p_e ≤ p_e^id + D_stab                 p_e ≤ (√p_e^id + C_stab)²
    p̄_e ≤ p̄_e^id + D_pro                  p̄_e ≤ 1 − F_pro   (when p̄_e^id = 0)
    max_x D(q_x, p_x) ≤ D_stab            min_x F(q_x, p_x) ≥ F_stab
    D(q, p) ≤ D_pro                       F(q, p) ≥ F_pro
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import Channel, ChoiState, _require_same_dim, compose, depolarizing, permutation_unitary, random_channel
from .errors import DimensionMismatch
from .linalg import as_generator
from .models import BoundCheck, BoundReport, OptimizerConfig
from .process_metrics import j_distance, j_fidelity, stabilized
from .state_metrics import ClassicalDistribution, bhattacharya, c_from_fidelity, kolmogorov, measure_in_basis
from .telemetry import logfire

BOUND_SLACK = 1e-7
ZERO_ERROR_ATOL = 1e-12


@dataclass(frozen=True)
class FunctionSpec:
    """A function on basis-state labels 0..dim-1."""
    dim: int
    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        mapping = tuple(int(y) for y in self.mapping)
        if len(mapping) != self.dim:
            raise ValueError(f"function must be defined on all {self.dim} inputs")
        if any(not 0 <= y < self.dim for y in mapping):
            raise ValueError("function outputs must be basis-state labels")
        object.__setattr__(self, "mapping", mapping)

    def __call__(self, x: int) -> int:
        return self.mapping[x]

    @classmethod
    def identity(cls, dim: int) -> "FunctionSpec":
        return cls(dim, tuple(range(dim)))


@dataclass(frozen=True)
class ErrorProbabilities:
    per_instance: np.ndarray

    @property
    def worst(self) -> float:
        return float(np.max(self.per_instance))

    @property
    def average(self) -> float:
        return float(np.mean(self.per_instance))


@dataclass(frozen=True)
class SamplingOutcome:
    per_instance_ideal: tuple[ClassicalDistribution, ...]
    per_instance_real: tuple[ClassicalDistribution, ...]
    joint_ideal: ClassicalDistribution
    joint_real: ClassicalDistribution


def _basis_projector(dim: int, x: int) -> np.ndarray:
    p = np.zeros((dim, dim), dtype=np.complex128)
    p[x, x] = 1.0
    return p


def error_probabilities(ch: Channel, spec: FunctionSpec) -> ErrorProbabilities:
    """p_e(x) = 1 − ⟨f(x)|E(|x⟩⟨x|)|f(x)⟩ for every input x."""
    if spec.dim != ch.dim:
        raise DimensionMismatch(f"function on {spec.dim} labels does not match channel dimension {ch.dim}")
    probs = [
        1.0 - float(np.real(ch.apply_operator(_basis_projector(ch.dim, x))[spec(x), spec(x)]))
        for x in range(ch.dim)
    ]
    return ErrorProbabilities(np.clip(np.array(probs), 0.0, 1.0))


def _joint(rows: Sequence[ClassicalDistribution]) -> ClassicalDistribution:
    return ClassicalDistribution(np.concatenate([r.probabilities for r in rows]) / len(rows))


def sampling_outcome(ideal: Channel, real: Channel) -> SamplingOutcome:
    """Computational-basis statistics for every basis input, and their uniform joints."""
    dim = _require_same_dim(ideal, real)
    ideal_rows = tuple(measure_in_basis(_output(ideal, x)) for x in range(dim))
    real_rows = tuple(measure_in_basis(_output(real, x)) for x in range(dim))
    return SamplingOutcome(ideal_rows, real_rows, _joint(ideal_rows), _joint(real_rows))


def _output(ch: Channel, x: int) -> np.ndarray:
    out = ch.apply_operator(_basis_projector(ch.dim, x))
    return (out + out.conj().T) / 2


def _check(name: str, lhs: float, rhs: float, applicable: bool = True) -> BoundCheck:
    lhs, rhs = float(lhs), float(rhs)
    slack = rhs - lhs
    return BoundCheck(name=name, lhs=lhs, rhs=rhs, slack=slack, holds=slack >= -BOUND_SLACK, applicable=bool(applicable))


def verify_function_worst(e: Channel, f_ideal: Channel, spec: FunctionSpec, d_stab: float, c_stab: float) -> BoundReport:
    real = error_probabilities(e, spec)
    ideal = error_probabilities(f_ideal, spec)
    return BoundReport(
        checks=[
            _check("p_e <= p_e_id + D_stab", real.worst, ideal.worst + d_stab),
            _check("p_e <= (sqrt(p_e_id) + C_stab)^2", real.worst, (np.sqrt(ideal.worst) + c_stab) ** 2),
        ]
    )


def verify_function_average(e: Channel, f_ideal: Channel, spec: FunctionSpec, d_pro: float, f_pro: float) -> BoundReport:
    real = error_probabilities(e, spec)
    ideal = error_probabilities(f_ideal, spec)
    return BoundReport(
        checks=[
            _check("avg p_e <= avg p_e_id + D_pro", real.average, ideal.average + d_pro),
            _check("avg p_e <= 1 - F_pro", real.average, 1.0 - f_pro, applicable=ideal.average <= ZERO_ERROR_ATOL),
        ]
    )


def verify_sampling(e: Channel, f_ideal: Channel, d_stab: float, f_stab: float, d_pro: float, f_pro: float) -> BoundReport:
    """Kolmogorov distance and classical fidelity (squared overlap) against the process measures."""
    outcome = sampling_outcome(f_ideal, e)
    pairs = list(zip(outcome.per_instance_real, outcome.per_instance_ideal))
    worst_distance = max(kolmogorov(q, p) for q, p in pairs)
    worst_fidelity = min(bhattacharya(q, p) ** 2 for q, p in pairs)
    joint_distance = kolmogorov(outcome.joint_real, outcome.joint_ideal)
    joint_fidelity = bhattacharya(outcome.joint_real, outcome.joint_ideal) ** 2
    return BoundReport(
        checks=[
            _check("max_x D(q_x, p_x) <= D_stab", worst_distance, d_stab),
            _check("F_stab <= min_x F(q_x, p_x)", f_stab, worst_fidelity),
            _check("D(q, p) <= D_pro", joint_distance, d_pro),
            _check("F_pro <= F(q, p)", f_pro, joint_fidelity),
        ]
    )


# -- sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class BoundInstance:
    """A noisy implementation ``real`` of the ideal computation ``ideal`` of ``spec``."""
    ideal: Channel
    real: Channel
    spec: FunctionSpec
    index: int


def function_of(ideal: Channel) -> FunctionSpec:
    """The function an ideal channel computes: the most likely output for each basis input."""
    return FunctionSpec(ideal.dim, tuple(int(np.argmax(np.real(np.diag(_output(ideal, x))))) for x in range(ideal.dim)))


def make_instance(rng: np.random.Generator, dim: int, index: int = 0) -> BoundInstance:
    """Permutation target, with intrinsic depolarizing error on odd indices.

    The real channel mixes the ideal Choi state with that of a random
    channel at a random strength up to 0.3.
    """
    mapping = tuple(int(y) for y in rng.permutation(dim))
    ideal = Channel.from_unitary(permutation_unitary(mapping))
    if index % 2:
        ideal = compose(ideal, depolarizing(float(rng.uniform(0.0, 0.2)), dim))
    noise = Channel.from_kraus(random_channel(dim, int(rng.integers(1, dim**2 + 1)), rng))
    strength = float(rng.uniform(0.0, 0.3))
    mixed = (1 - strength) * ideal.choi.matrix + strength * compose(noise, ideal).choi.matrix
    real = Channel.from_choi(ChoiState.from_matrix(mixed))
    return BoundInstance(ideal, real, FunctionSpec(dim, mapping), index)


def random_instances(count: int, dim: int, seed: int) -> list[BoundInstance]:
    """Random permutation targets, every other one with intrinsic ideal error."""
    return [make_instance(as_generator(child), dim, index) for index, child in enumerate(np.random.SeedSequence(seed).spawn(count))]


def check_instance(instance: BoundInstance, config: OptimizerConfig) -> BoundReport:
    """All eight bounds for one instance, with the measures computed here."""
    e, f = instance.real, instance.ideal
    d_pro = j_distance(e, f)
    f_pro = j_fidelity(e, f)
    d_stab = stabilized(e, f, "D", config).value
    f_stab = stabilized(e, f, "F", config).value
    checks = (
        verify_function_worst(e, f, instance.spec, d_stab, c_from_fidelity(f_stab)).checks
        + verify_function_average(e, f, instance.spec, d_pro, f_pro).checks
        + verify_sampling(e, f, d_stab, f_stab, d_pro, f_pro).checks
    )
    return BoundReport(checks=checks)


@dataclass(frozen=True)
class SweepSummary:
    reports: tuple[BoundReport, ...]

    @property
    def all_hold(self) -> bool:
        return all(r.all_hold for r in self.reports)

    @property
    def min_slack(self) -> float:
        return min((r.min_slack for r in self.reports), default=float("inf"))

    @property
    def worst_index(self) -> int:
        return int(np.argmin([r.min_slack for r in self.reports]))


def sweep(instances: Sequence[BoundInstance], config: OptimizerConfig) -> SweepSummary:
    with logfire.span("Bound sweep", instances=len(instances)):
        reports = tuple(check_instance(inst, config) for inst in instances)
    summary = SweepSummary(reports)
    logfire.info("Bound sweep finished", all_hold=summary.all_hold, min_slack=summary.min_slack)
    return summary
