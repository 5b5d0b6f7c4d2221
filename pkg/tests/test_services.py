from datetime import datetime
from pathlib import Path

import numpy as np
import pytest

from procmetric.channels import bit_flip, to_file
from procmetric.errors import InvalidChannelFile
from procmetric.file_operations import FileOperations
from procmetric.filename_utils import (
    generate_counterexample_filename,
    generate_report_filename,
    sanitize_for_filename,
)
from procmetric.models import BoundReport, Counterexample, ProcmetricConfig
from procmetric.services import ChannelStore


@pytest.fixture
def store(tmp_path, monkeypatch):
    monkeypatch.delenv("PROCMETRIC_DATA_DIR", raising=False)
    return ChannelStore(tmp_path)


# =================================================================================================
# Test:  Filenames
# =================================================================================================
def test_sanitize_for_filename():
    assert sanitize_for_filename("Hello, World!") == "hello_world"
    assert sanitize_for_filename("") == "unknown"


def test_report_filename():
    stamp = datetime(2024, 1, 2, 3, 4, 5)
    name = generate_report_filename(Path("Ideal Gate.json"), Path("bitflip03.json"), stamp)
    assert name == "2024-01-02_03-04-05_ideal_gate_vs_bitflip03.json"


def test_counterexample_filename():
    assert generate_counterexample_filename("metric-axioms", 7, 3) == "metric_axioms_seed7_instance3.json"


# =================================================================================================
# Test:  File operations
# =================================================================================================
def test_data_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PROCMETRIC_DATA_DIR", str(tmp_path / "elsewhere"))
    fs = FileOperations(tmp_path)
    assert fs.data_path == (tmp_path / "elsewhere").resolve()


def test_explicit_data_dir_wins(tmp_path, monkeypatch):
    monkeypatch.setenv("PROCMETRIC_DATA_DIR", str(tmp_path / "elsewhere"))
    fs = FileOperations(tmp_path, str(tmp_path / "mine"))
    assert fs.data_path == (tmp_path / "mine").resolve()


def test_write_creates_directories(tmp_path):
    fs = FileOperations(tmp_path)
    target = tmp_path / "a" / "b" / "c.txt"
    fs.write_text(target, "hello")
    assert target.read_text() == "hello"
    with pytest.raises(FileNotFoundError):
        fs.read_json(tmp_path / "missing.json")


# =================================================================================================
# Test:  Channel files
# =================================================================================================
def test_bundled_channel_loads(store, channel_dir):
    ch = store.load_channel(channel_dir / "bitflip03.json")
    assert np.allclose(ch.choi.matrix, bit_flip(0.3).choi.matrix)


def test_save_and_load_channel(store, tmp_path):
    path = tmp_path / "channels" / "flip.json"
    store.save_channel(path, bit_flip(0.2), description="flip")
    assert store.load_channel_file(path).description == "flip"
    assert np.allclose(store.load_channel(path).choi.matrix, bit_flip(0.2).choi.matrix)


def test_malformed_json_names_file(store, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(InvalidChannelFile, match="broken.json: malformed JSON"):
        store.load_channel_file(path)


def test_bad_field_is_named(store, tmp_path):
    path = tmp_path / "bad_form.json"
    path.write_text('{"dim": 2, "form": "superoperator", "data": []}')
    with pytest.raises(InvalidChannelFile, match="field 'form'"):
        store.load_channel_file(path)


def test_empty_kraus_list_rejected(store, tmp_path):
    path = tmp_path / "empty.json"
    path.write_text('{"dim": 2, "form": "kraus", "data": []}')
    with pytest.raises(InvalidChannelFile, match="empty.json"):
        store.load_channel_file(path)


def test_missing_file(store, tmp_path):
    with pytest.raises(InvalidChannelFile, match="file not found"):
        store.load_channel_file(tmp_path / "nope.json")


# =================================================================================================
# Test:  Reports and counterexamples
# =================================================================================================
def test_save_report(store):
    path = store.save_report(
        BoundReport(checks=[]), Path("identity.json"), Path("bitflip03.json"), datetime(2024, 5, 6, 7, 8, 9)
    )
    assert path.parent == store.reports_path
    assert BoundReport.model_validate_json(path.read_text()).checks == []


def test_counterexample_round_trip(store):
    dump = Counterexample(
        suite="bounds", seed=1, instance=2, dim=2, channels={"real": to_file(bit_flip(0.1))}, detail="margin -1e-3"
    )
    path = store.dump_counterexample(dump)
    assert path.name == "bounds_seed1_instance2.json"
    loaded = store.load_counterexample(path)
    assert loaded.detail == "margin -1e-3"
    assert set(loaded.channels) == {"real"}


def test_load_counterexample_rejects_other_json(store, tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"dim": 2}')
    with pytest.raises(InvalidChannelFile, match="not a counterexample dump"):
        store.load_counterexample(path)


# =================================================================================================
# Test:  Configuration
# =================================================================================================
def test_config_defaults(tmp_path, monkeypatch):
    for name in ("PROCMETRIC_MAX_ITER", "PROCMETRIC_RESTARTS", "PROCMETRIC_SEED", "PROCMETRIC_MC_SAMPLES", "PROCMETRIC_GAP_TOL"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("PROCMETRIC_DATA_DIR", str(tmp_path))
    config = ProcmetricConfig.load()
    assert config.optimizer.restarts == 8
    assert config.mc_samples == 10_000
    assert config.seed is None


def test_config_from_environment_and_yaml(tmp_path, monkeypatch):
    monkeypatch.setenv("PROCMETRIC_DATA_DIR", str(tmp_path))
    monkeypatch.setenv("PROCMETRIC_RESTARTS", "3")
    monkeypatch.setenv("PROCMETRIC_SEED", "42")
    (tmp_path / "procmetric.yaml").write_text("mc_samples: 500\noptimizer:\n  max_iterations: 50\n")
    config = ProcmetricConfig.load()
    assert config.optimizer.restarts == 3
    assert config.optimizer.max_iterations == 50
    assert config.mc_samples == 500
    assert config.seed == 42


def test_config_rejects_non_mapping(tmp_path, monkeypatch):
    monkeypatch.delenv("PROCMETRIC_DATA_DIR", raising=False)
    path = tmp_path / "procmetric.yaml"
    path.write_text("- just\n- a list\n")
    with pytest.raises(ValueError, match="mapping"):
        ProcmetricConfig.load(path)
