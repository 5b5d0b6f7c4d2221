"""Invariant suites behind ``procmetric verify``.

Each suite draws random channel instances and returns a margin per
instance; a negative margin is a violation. Instances are generated from
(seed, suite, instance) alone, so a dumped counterexample replays exactly.
"""

import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bounds import BoundInstance, check_instance, function_of, make_instance
from .channels import (
    Channel,
    OperatorBasis,
    choi_to_kraus,
    compose,
    from_file,
    identity_channel,
    qubit_count,
    random_channel,
    random_unitary,
    tensor,
    to_file,
    transpose_channel,
)
from .estimation import build_plan_pauli_minimal, f_pro_unitary_basis
from .linalg import dagger, haar_state, kron, max_entangled, partial_trace, random_density
from .models import Counterexample, OptimizerConfig, SuiteResult
from .process_metrics import (
    brute_force_stabilized,
    j_distance,
    j_fidelity,
    j_fidelity_general,
    stabilized,
    stabilized_objective,
)
from .services import ChannelStore
from .state_metrics import angle_from_fidelity, bures_from_fidelity, c_from_fidelity, sandwich, _fidelity, _trace_distance
from .telemetry import logfire

Channels = dict[str, Channel]
Generator = Callable[[np.random.Generator, int], Channels]
Check = Callable[[Channels, np.random.Generator, OptimizerConfig], float]

J_ATOL = 1e-8
FIDELITY_ATOL = 1e-6
FVDG_ATOL = 1e-9
STAB_ATOL = 1e-5
BRUTE_FORCE_ATOL = 1e-6
BRUTE_FORCE_SAMPLES = 10_000
CONVEXITY_ATOL = 1e-8
STATE_ATOL = 1e-9
IDENTITY_ATOL = 1e-8


@dataclass(frozen=True)
class Suite:
    name: str
    generate: Generator
    check: Check


def _rng(seed: int, name: str, instance: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode()), instance, stream])


def _random(rng: np.random.Generator, dim: int, full_rank: bool = False) -> Channel:
    count = dim**2 if full_rank else int(rng.integers(1, dim**2 + 1))
    return Channel.from_kraus(random_channel(dim, count, rng))


def _unitary(rng: np.random.Generator, dim: int) -> Channel:
    return Channel.from_unitary(random_unitary(dim, rng))


def _pair(rng: np.random.Generator, dim: int) -> Channels:
    return {"e": _random(rng, dim), "f": _random(rng, dim)}


def _full_rank_pair(rng: np.random.Generator, dim: int) -> Channels:
    return {"e": _random(rng, dim, full_rank=True), "f": _random(rng, dim, full_rank=True)}


# -- checks -----------------------------------------------------------------------

def _metric_axioms(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    e, f, g = ch["e"], ch["f"], ch["g"]
    margins = []
    distances = [(j_distance, J_ATOL)]
    for derive in (angle_from_fidelity, bures_from_fidelity, c_from_fidelity):
        distances.append((lambda a, b, derive=derive: derive(j_fidelity(a, b)), FIDELITY_ATOL))
    for measure, atol in distances:
        ef, fg, eg = measure(e, f), measure(f, g), measure(e, g)
        margins.append(ef + fg - eg + atol)
        margins.append(FIDELITY_ATOL - abs(ef - measure(f, e)))
        margins.append(FIDELITY_ATOL - abs(measure(e, e)))
    return min(margins)


def _j_stability(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    e, f = ch["e"], ch["f"]
    ancilla = identity_channel(2)
    big_e, big_f = tensor(ancilla, e), tensor(ancilla, f)
    return min(
        J_ATOL - abs(j_distance(big_e, big_f) - j_distance(e, f)),
        FIDELITY_ATOL - abs(j_fidelity(big_e, big_f) - j_fidelity(e, f)),
    )


def _chaining(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    e1, f1, e2, f2 = ch["e1"], ch["f1"], ch["e2"], ch["f2"]
    return j_distance(e1, f1) + j_distance(e2, f2) + J_ATOL - j_distance(compose(e2, e1), compose(f2, f1))


def _contractivity(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    e, f, r = ch["e"], ch["f"], ch["r"]
    return j_distance(e, f) + J_ATOL - j_distance(compose(r, e), compose(r, f))


def _unitary_invariance(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    e, f, u, v = ch["e"], ch["f"], ch["u"], ch["v"]
    ue, uf = compose(u, compose(e, v)), compose(u, compose(f, v))
    margins = [
        J_ATOL - abs(j_distance(ue, uf) - j_distance(e, f)),
        J_ATOL - abs(j_fidelity_general(ue, uf) - j_fidelity_general(e, f)),
    ]
    for metric in ("D", "F"):
        margins.append(J_ATOL - abs(stabilized(ue, uf, metric, config).value - stabilized(e, f, metric, config).value))
    return min(margins)


def _state_metrics(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    """Axioms of D, A, B and C on states, their behavior under the channel ``r`` and under ⊗τ."""
    r = ch["r"]
    dim = r.dim
    a, b, c, g = (random_density(dim, rng).matrix for _ in range(4))
    tau = random_density(2, rng).matrix
    p = float(rng.uniform())
    margins = []
    distances = [(_trace_distance, STATE_ATOL)]
    for derive in (angle_from_fidelity, bures_from_fidelity, c_from_fidelity):
        distances.append((lambda x, y, derive=derive: derive(_fidelity(x, y)), FIDELITY_ATOL))
    for measure, atol in distances:
        ab = measure(a, b)
        margins.append(ab + measure(b, c) - measure(a, c) + atol)
        margins.append(atol - abs(ab - measure(b, a)))
        margins.append(FIDELITY_ATOL - abs(measure(a, a)))

    out_a, out_b = r.apply_operator(a), r.apply_operator(b)
    margins.append(_trace_distance(a, b) + STATE_ATOL - _trace_distance(out_a, out_b))
    margins.append(_fidelity(out_a, out_b) + FIDELITY_ATOL - _fidelity(a, b))

    left, right = p * a + (1 - p) * c, p * b + (1 - p) * g
    margins.append(p * _trace_distance(a, b) + (1 - p) * _trace_distance(c, g) + STATE_ATOL - _trace_distance(left, right))
    root_mix = np.sqrt(_fidelity(left, right))
    margins.append(root_mix + FIDELITY_ATOL - p * np.sqrt(_fidelity(a, b)) - (1 - p) * np.sqrt(_fidelity(c, g)))

    big_a, big_b = kron(a, tau), kron(b, tau)
    margins.append(STATE_ATOL - abs(_trace_distance(big_a, big_b) - _trace_distance(a, b)))
    margins.append(FIDELITY_ATOL - abs(_fidelity(big_a, big_b) - _fidelity(a, b)))
    return float(min(margins))


def _channel_identities(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    """Composition through the transposed channel, Kraus freedom, and agreement of the three forms."""
    e, f = ch["e"], ch["f"]
    dim = e.dim
    phi = max_entangled(dim)
    phi = np.outer(phi, phi.conj())
    pairs = [kron(x, y) for x in transpose_channel(f).elements for y in e.kraus.elements]
    via_transpose = sum(k @ phi @ dagger(k) for k in pairs)
    deviations = [np.max(np.abs(compose(e, f).choi.matrix - via_transpose))]

    elements = np.stack(e.kraus.elements)
    isometry = random_unitary(len(elements) + 1, rng).matrix[:, : len(elements)]
    remixed = np.einsum("jk,kab->jab", isometry, elements)
    deviations.append(np.max(np.abs(Channel.from_kraus(list(remixed)).choi.matrix - e.choi.matrix)))

    bases = [OperatorBasis.matrix_units(dim)]
    n = qubit_count(dim)
    if n is not None:
        bases.append(OperatorBasis.pauli_products(n))
    for basis in bases:
        deviations.append(np.max(np.abs(Channel.from_chi(e.chi(basis)).choi.matrix - e.choi.matrix)))
    deviations.append(np.max(np.abs(Channel.from_kraus(choi_to_kraus(e.choi)).choi.matrix - e.choi.matrix)))

    rho = random_density(dim, rng).matrix
    from_choi = dim * partial_trace(kron(rho.T, np.eye(dim)) @ e.choi.matrix, "A", (dim, dim))
    deviations.append(np.max(np.abs(from_choi - e.apply_operator(rho))))
    return IDENTITY_ATOL - float(max(deviations))


def _fuchs_van_de_graaf(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    e, f = ch["e"], ch["f"]
    dim = e.dim
    process = sandwich(j_distance(e, f), j_fidelity(e, f), atol=0.0)
    rho = random_density(dim, rng).matrix
    out_e, out_f = e.apply_operator(rho), f.apply_operator(rho)
    state = sandwich(_trace_distance(out_e, out_f), _fidelity(out_e, out_f), atol=0.0)
    phi, chi = haar_state(dim, rng).projector(), haar_state(dim, rng).projector()
    pure = sandwich(_trace_distance(phi, chi), _fidelity(phi, chi), atol=0.0)
    margins = [FVDG_ATOL - abs(pure.upper - pure.distance)]
    for check in (process, state, pure):
        margins += [check.distance - check.lower + FVDG_ATOL, check.upper - check.distance + FVDG_ATOL]
    return min(margins)


def _ancilla_independence(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    e, f = ch["e"], ch["f"]
    margins = []
    for metric in ("D", "F"):
        small = stabilized(e, f, metric, config).value
        large = stabilized(e, f, metric, config, ancilla_dim=2 * e.dim).value
        margins.append(STAB_ATOL - abs(small - large))
    return min(margins)


def _convexity(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    """F objective convex, D objective concave, along a random segment."""
    e, f = ch["e"], ch["f"]
    rho0, rho1 = random_density(e.dim, rng).matrix, random_density(e.dim, rng).matrix
    margins = []
    for metric, sign in (("F", 1.0), ("D", -1.0)):
        g0 = sign * stabilized_objective(e, f, metric, rho0)
        g1 = sign * stabilized_objective(e, f, metric, rho1)
        for t in np.linspace(0.1, 0.9, 5):
            gt = sign * stabilized_objective(e, f, metric, (1 - t) * rho0 + t * rho1)
            margins.append((1 - t) * g0 + t * g1 + CONVEXITY_ATOL - gt)
    return min(margins)


def _optimizer_vs_brute_force(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    e, f = ch["e"], ch["f"]
    seed = int(rng.integers(2**31))
    f_stab = stabilized(e, f, "F", config).value
    d_stab = stabilized(e, f, "D", config).value
    f_brute = brute_force_stabilized(e, f, "F", BRUTE_FORCE_SAMPLES, seed)
    d_brute = brute_force_stabilized(e, f, "D", BRUTE_FORCE_SAMPLES, seed)
    return min(f_brute + BRUTE_FORCE_ATOL - f_stab, d_stab + BRUTE_FORCE_ATOL - d_brute)


def _estimation_oracle(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    e, target = ch["e"], ch["target"]
    u = target.as_unitary()
    oracle = j_fidelity(e, target)
    n = qubit_count(e.dim)
    basis = None if n is not None else OperatorBasis.weyl(e.dim)
    margins = [1e-9 - abs(f_pro_unitary_basis(e, u, basis) - oracle)]
    if n is not None:
        margins.append(J_ATOL - abs(build_plan_pauli_minimal(u, n).evaluate(e) - oracle))
    return min(margins)


def _bounds(ch: Channels, rng: np.random.Generator, config: OptimizerConfig) -> float:
    ideal, real = ch["ideal"], ch["real"]
    report = check_instance(BoundInstance(ideal, real, function_of(ideal), 0), config)
    return report.min_slack + 1e-7


def _bound_pair(rng: np.random.Generator, dim: int) -> Channels:
    instance = make_instance(rng, dim, int(rng.integers(2)))
    return {"ideal": instance.ideal, "real": instance.real}


SUITES: tuple[Suite, ...] = (
    Suite("metric-axioms", lambda rng, d: {"e": _random(rng, d), "f": _random(rng, d), "g": _random(rng, d)}, _metric_axioms),
    Suite("j-stability", _pair, _j_stability),
    Suite(
        "chaining",
        lambda rng, d: {"e1": _random(rng, d), "f1": _unitary(rng, d), "e2": _random(rng, d), "f2": _random(rng, d)},
        _chaining,
    ),
    Suite("contractivity", lambda rng, d: {**_pair(rng, d), "r": _random(rng, d)}, _contractivity),
    Suite("state-metrics", lambda rng, d: {"r": _random(rng, d)}, _state_metrics),
    Suite("channel-identities", _pair, _channel_identities),
    Suite("unitary-invariance", lambda rng, d: {**_full_rank_pair(rng, d), "u": _unitary(rng, d), "v": _unitary(rng, d)}, _unitary_invariance),
    Suite("fuchs-van-de-graaf", _pair, _fuchs_van_de_graaf),
    Suite("estimation-oracle", lambda rng, d: {"e": _random(rng, d), "target": _unitary(rng, d)}, _estimation_oracle),
    Suite("convexity", _full_rank_pair, _convexity),
    Suite("bounds", _bound_pair, _bounds),
    Suite("ancilla-independence", _full_rank_pair, _ancilla_independence),
    Suite("optimizer-vs-brute-force", _full_rank_pair, _optimizer_vs_brute_force),
)


def suite_by_name(name: str) -> Suite:
    for suite in SUITES:
        if suite.name == name:
            return suite
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(s.name for s in SUITES)}")


def run_suite(
    suite: Suite, sweep: int, dim: int, seed: int, config: OptimizerConfig, store: ChannelStore | None = None
) -> SuiteResult:
    worst = float("inf")
    dump_path = None
    with logfire.span("Running suite", suite=suite.name, instances=sweep, dim=dim):
        for instance in range(sweep):
            channels = suite.generate(_rng(seed, suite.name, instance, 0), dim)
            margin = suite.check(channels, _rng(seed, suite.name, instance, 1), config)
            worst = min(worst, margin)
            if margin < 0 and dump_path is None:
                logfire.warning("Invariant violated", suite=suite.name, instance=instance, margin=margin)
                if store is not None:
                    dump = Counterexample(
                        suite=suite.name,
                        seed=seed,
                        instance=instance,
                        dim=dim,
                        channels={name: to_file(ch) for name, ch in channels.items()},
                        detail=f"margin {margin:.3e}",
                    )
                    dump_path = str(store.dump_counterexample(dump))
    passed = bool(worst >= 0)
    logfire.info("Suite finished", suite=suite.name, passed=passed, worst_margin=worst)
    return SuiteResult(name=suite.name, passed=passed, instances=sweep, worst_margin=worst, counterexample=dump_path)


def run_suites(
    sweep: int,
    dim: int,
    seed: int,
    config: OptimizerConfig,
    store: ChannelStore | None = None,
    names: tuple[str, ...] = (),
) -> list[SuiteResult]:
    """Run the named suites (all when ``names`` is empty) in a fixed order."""
    chosen = [suite_by_name(n) for n in names] if names else list(SUITES)
    return [run_suite(suite, sweep, dim, seed, config, store) for suite in chosen]


def replay(dump: Counterexample, config: OptimizerConfig) -> SuiteResult:
    """Re-run the check of a dumped instance on its stored channels."""
    suite = suite_by_name(dump.suite)
    channels = {name: from_file(cf) for name, cf in dump.channels.items()}
    margin = suite.check(channels, _rng(dump.seed, suite.name, dump.instance, 1), config)
    return SuiteResult(name=suite.name, passed=bool(margin >= 0), instances=1, worst_margin=margin)
