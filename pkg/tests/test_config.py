"""Tests for toolkit configuration loading."""
import pytest

from stealthkit import ConfigError, create_toolkit, load_config


def _clear_env(monkeypatch):
    for name in (
        "STEALTH_BACKEND",
        "STEALTH_POINT_ENCODING",
        "STEALTH_HASH",
        "STEALTH_EPOCH_N",
        "STEALTH_LOOKAHEAD",
        "STEALTH_FIXED_BASE_WINDOW",
        "STEALTH_BENCH_ITERATIONS",
        "STEALTH_LOG_LEVEL",
    ):
        monkeypatch.delenv(name, raising=False)


def test_defaults(monkeypatch):
    _clear_env(monkeypatch)
    config = load_config()
    assert config.backend == "secp256k1"
    assert config.encoding == "compressed"
    assert config.hash_name == "sha256"
    assert (config.epoch_n, config.lookahead, config.window) == (10, 1, 4)
    assert config.bench_iterations == 200
    assert config.log_level == "WARNING"


def test_environment_then_explicit_overlay(monkeypatch):
    _clear_env(monkeypatch)
    monkeypatch.setenv("STEALTH_EPOCH_N", "25")
    monkeypatch.setenv("STEALTH_LOG_LEVEL", "info")
    config = load_config({"lookahead": 3, "backend": None})
    assert config.epoch_n == 25
    assert config.lookahead == 3
    assert config.backend == "secp256k1"
    assert config.log_level == "INFO"


def test_invalid_values_raise_config_error(monkeypatch):
    _clear_env(monkeypatch)
    monkeypatch.setenv("STEALTH_EPOCH_N", "ten")
    with pytest.raises(ConfigError) as excinfo:
        load_config()
    assert excinfo.value.field == "STEALTH_EPOCH_N"

    _clear_env(monkeypatch)
    with pytest.raises(ConfigError) as excinfo:
        load_config({"colour": "blue"})
    assert excinfo.value.field == "colour"
    with pytest.raises(ConfigError) as excinfo:
        load_config({"bench_iterations": 10})
    assert excinfo.value.field == "bench_iterations"


def test_create_toolkit_builds_group(monkeypatch):
    _clear_env(monkeypatch)
    toolkit = create_toolkit({"epoch_n": 4, "lookahead": 2})
    assert toolkit.group.params.point_length == 33
    assert toolkit.epoch.n == 4 and toolkit.epoch.lookahead == 2


def test_create_toolkit_wraps_validation_errors(monkeypatch):
    _clear_env(monkeypatch)
    with pytest.raises(ConfigError) as excinfo:
        create_toolkit({"backend": "curve25519"})
    assert excinfo.value.field == "backend"
    with pytest.raises(ConfigError) as excinfo:
        create_toolkit({"epoch_n": 0})
    assert excinfo.value.field == "n"
    with pytest.raises(ConfigError):
        create_toolkit({"hash_name": "md0"})
