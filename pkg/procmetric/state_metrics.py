"""Distances and fidelities between quantum states and classical distributions.

Fidelity uses the squared convention F(ρ,σ) = (tr √(√ρ σ √ρ))².
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .errors import DimensionMismatch, InvalidState
from .linalg import RANK_ATOL, ComplexMatrix, StateLike, _eigh_desc, dagger, density_array

FVDG_ATOL = 1e-9


def _pair(rho: StateLike, sigma: StateLike) -> tuple[ComplexMatrix, ComplexMatrix]:
    a = density_array(rho)
    b = density_array(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"states have different dimensions: {a.shape[0]} and {b.shape[0]}")
    return a, b


def _trace_distance(a: ComplexMatrix, b: ComplexMatrix) -> float:
    diff = a - b
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((diff + dagger(diff)) / 2))))


def _fidelity(a: ComplexMatrix, b: ComplexMatrix) -> float:
    """Unvalidated fidelity for arrays already known to be density matrices."""
    evals, evecs = _eigh_desc(a)
    if evals.shape[0] == 1 or evals[1] <= RANK_ATOL:
        v = evecs[:, 0]
        return float(max(evals[0], 0.0) * np.real(np.vdot(v, b @ v)))
    b_evals, b_evecs = _eigh_desc(b)
    if b_evals[1] <= RANK_ATOL:
        v = b_evecs[:, 0]
        return float(max(b_evals[0], 0.0) * np.real(np.vdot(v, a @ v)))
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ dagger(evecs)
    inner = root @ b @ root
    lam = np.clip(np.linalg.eigvalsh((inner + dagger(inner)) / 2), 0.0, None)
    return float(np.sum(np.sqrt(lam)) ** 2)


def trace_distance(rho: StateLike, sigma: StateLike) -> float:
    """D(ρ,σ) = ½ tr|ρ − σ|."""
    return _trace_distance(*_pair(rho, sigma))


def fidelity(rho: StateLike, sigma: StateLike) -> float:
    """F(ρ,σ) = (tr √(√ρ σ √ρ))², with the pure-state shortcut ⟨ψ|σ|ψ⟩."""
    return _fidelity(*_pair(rho, sigma))


def bures_from_fidelity(f: float) -> float:
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * np.sqrt(max(f, 0.0)))))


def angle_from_fidelity(f: float) -> float:
    return float(np.arccos(min(1.0, np.sqrt(max(f, 0.0)))))


def c_from_fidelity(f: float) -> float:
    return float(np.sqrt(max(0.0, 1.0 - f)))


def bures(rho: StateLike, sigma: StateLike) -> float:
    return bures_from_fidelity(fidelity(rho, sigma))


def angle(rho: StateLike, sigma: StateLike) -> float:
    return angle_from_fidelity(fidelity(rho, sigma))


def c_metric(rho: StateLike, sigma: StateLike) -> float:
    return c_from_fidelity(fidelity(rho, sigma))


@dataclass(frozen=True)
class FidelityMetrics:
    """The metrics derived from one fidelity value."""
    fidelity: float
    angle: float
    bures: float
    c: float

    @classmethod
    def from_fidelity(cls, f: float) -> "FidelityMetrics":
        return cls(f, angle_from_fidelity(f), bures_from_fidelity(f), c_from_fidelity(f))


def fidelity_metrics(rho: StateLike, sigma: StateLike) -> FidelityMetrics:
    return FidelityMetrics.from_fidelity(fidelity(rho, sigma))


@dataclass(frozen=True)
class SandwichCheck:
    """1 − √F ≤ D ≤ √(1 − F)."""
    lower: float
    distance: float
    upper: float
    holds: bool
    upper_saturated: bool


def sandwich(distance: float, f: float, atol: float = FVDG_ATOL) -> SandwichCheck:
    lower = 1.0 - np.sqrt(max(f, 0.0))
    upper = np.sqrt(max(0.0, 1.0 - f))
    holds = lower - atol <= distance <= upper + atol
    return SandwichCheck(float(lower), float(distance), float(upper), bool(holds), bool(abs(upper - distance) <= atol))


def fuchs_van_de_graaf_check(rho: StateLike, sigma: StateLike) -> SandwichCheck:
    a, b = _pair(rho, sigma)
    return sandwich(_trace_distance(a, b), _fidelity(a, b))


# -- classical distributions --------------------------------------------------

@dataclass(frozen=True)
class ClassicalDistribution:
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probabilities, dtype=np.float64).reshape(-1)
        if np.any(probs < -1e-12) or abs(probs.sum() - 1.0) > 1e-10:
            raise InvalidState("probabilities must be nonnegative and sum to one")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)

    @property
    def outcomes(self) -> int:
        return int(self.probabilities.shape[0])


def _distribution_pair(p: ClassicalDistribution | ArrayLike, q: ClassicalDistribution | ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    pp = p if isinstance(p, ClassicalDistribution) else ClassicalDistribution(np.asarray(p))
    qq = q if isinstance(q, ClassicalDistribution) else ClassicalDistribution(np.asarray(q))
    if pp.outcomes != qq.outcomes:
        raise DimensionMismatch(f"distributions have {pp.outcomes} and {qq.outcomes} outcomes")
    return pp.probabilities, qq.probabilities


def kolmogorov(p: ClassicalDistribution | ArrayLike, q: ClassicalDistribution | ArrayLike) -> float:
    """l1 distance Σ|p − q| / 2."""
    a, b = _distribution_pair(p, q)
    return float(np.sum(np.abs(a - b)) / 2)


def bhattacharya(p: ClassicalDistribution | ArrayLike, q: ClassicalDistribution | ArrayLike) -> float:
    """Overlap Σ √(p q)."""
    a, b = _distribution_pair(p, q)
    return float(np.sum(np.sqrt(a * b)))


def measure_in_basis(rho: StateLike) -> ClassicalDistribution:
    """Computational-basis measurement statistics: the diagonal of ρ."""
    diag = np.real(np.diag(density_array(rho)))
    return ClassicalDistribution(np.clip(diag, 0.0, None) / np.clip(diag, 0.0, None).sum())
