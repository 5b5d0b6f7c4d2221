import pytest

from procmetric.channels import amplitude_damping, bit_flip, identity_channel, to_file
from procmetric.models import Counterexample
from procmetric.services import ChannelStore
from procmetric.verification import SUITES, Suite, replay, run_suite, run_suites, suite_by_name

QUICK = (
    "metric-axioms",
    "j-stability",
    "chaining",
    "contractivity",
    "state-metrics",
    "channel-identities",
    "unitary-invariance",
    "fuchs-van-de-graaf",
    "estimation-oracle",
    "convexity",
)


def test_suite_names_are_unique():
    names = [s.name for s in SUITES]
    assert len(names) == len(set(names))
    assert set(QUICK) <= set(names)


def test_unknown_suite():
    with pytest.raises(ValueError, match="unknown suite"):
        suite_by_name("nonsense")


@pytest.mark.parametrize("dim", [2, 3])
def test_quick_suites_pass(dim, fast_config):
    results = run_suites(4, dim, 0, fast_config, names=QUICK)
    assert [r.name for r in results] == list(QUICK)
    for result in results:
        assert result.passed, f"{result.name}: {result.worst_margin}"
        assert result.counterexample is None


def test_suites_are_reproducible(fast_config):
    first = run_suites(3, 2, 5, fast_config, names=("metric-axioms", "chaining"))
    second = run_suites(3, 2, 5, fast_config, names=("metric-axioms", "chaining"))
    assert [r.worst_margin for r in first] == [r.worst_margin for r in second]


def test_every_requested_instance_runs(fast_config):
    result = run_suite(suite_by_name("bounds"), 12, 2, 0, fast_config)
    assert result.instances == 12
    assert result.passed


@pytest.mark.slow
def test_optimizer_suites_pass(fast_config):
    results = run_suites(6, 2, 1, fast_config, names=("ancilla-independence", "optimizer-vs-brute-force"))
    assert [r.instances for r in results] == [6, 6]
    assert all(r.passed for r in results), [(r.name, r.worst_margin) for r in results]


def test_violation_dumps_counterexample(tmp_path, monkeypatch, fast_config):
    monkeypatch.delenv("PROCMETRIC_DATA_DIR", raising=False)
    store = ChannelStore(tmp_path)
    failing = Suite("always-fails", lambda rng, d: {"e": identity_channel(d)}, lambda ch, rng, config: -1.0)
    result = run_suite(failing, 3, 2, 9, fast_config, store)
    assert not result.passed
    assert result.worst_margin == -1.0
    dump = store.load_counterexample(tmp_path / "data" / "counterexamples" / "always_fails_seed9_instance0.json")
    assert result.counterexample.endswith("always_fails_seed9_instance0.json")
    assert dump.instance == 0
    assert set(dump.channels) == {"e"}
    # only the first violation is dumped
    assert len(list(store.counterexamples_path.iterdir())) == 1


def test_replay_counterexample(fast_config):
    dump = Counterexample(
        suite="contractivity",
        seed=0,
        instance=0,
        dim=2,
        channels={"e": to_file(bit_flip(0.1)), "f": to_file(identity_channel(2)), "r": to_file(bit_flip(0.3))},
    )
    result = replay(dump, fast_config)
    assert result.passed
    assert result.instances == 1


def test_replay_channel_identities_on_fixtures(fast_config):
    dump = Counterexample(
        suite="channel-identities",
        seed=3,
        instance=0,
        dim=2,
        channels={"e": to_file(amplitude_damping(0.4)), "f": to_file(bit_flip(0.2))},
    )
    result = replay(dump, fast_config)
    assert result.passed, result.worst_margin


def test_replay_state_metrics_with_contracting_channel(fast_config):
    dump = Counterexample(suite="state-metrics", seed=4, instance=2, dim=2, channels={"r": to_file(amplitude_damping(0.9))})
    assert replay(dump, fast_config).passed


@pytest.mark.slow
@pytest.mark.parametrize("dim", [2, 3])
def test_fuchs_van_de_graaf_suite_on_many_pairs(dim, fast_config):
    result = run_suite(suite_by_name("fuchs-van-de-graaf"), 200, dim, 7, fast_config)
    assert result.instances == 200
    assert result.passed, result.worst_margin
