"""Toolkit factory for the stealth address protocols."""
import os
from dataclasses import dataclass

from stealthkit.backends import DEFAULT_BACKEND, DEFAULT_ENCODING
from stealthkit.dksap_iot import EpochConfig
from stealthkit.group import DEFAULT_HASH, DEFAULT_WINDOW, Group, get_group


class ConfigError(ValueError):
    """Structured configuration error."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field
        self.message = message


@dataclass(frozen=True)
class ToolkitConfig:
    backend: str = DEFAULT_BACKEND
    encoding: str = DEFAULT_ENCODING
    hash_name: str = DEFAULT_HASH
    epoch_n: int = 10
    lookahead: int = 1
    window: int = DEFAULT_WINDOW
    bench_iterations: int = 200
    log_level: str = 'WARNING'


@dataclass(frozen=True)
class Toolkit:
    config: ToolkitConfig
    group: Group

    @property
    def epoch(self) -> EpochConfig:
        return EpochConfig(self.config.epoch_n, self.config.lookahead)


def _env_int(name: str, default: int) -> int:
    raw = (os.environ.get(name) or '').strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(name, f'{name} must be an integer') from exc


def _env_text(name: str, default: str) -> str:
    return (os.environ.get(name) or default).strip()


def load_config(config: dict | None = None) -> ToolkitConfig:
    """Environment values overlaid with an explicit mapping (``None`` entries are ignored)."""
    settings = {
        'backend': _env_text('STEALTH_BACKEND', DEFAULT_BACKEND).lower(),
        'encoding': _env_text('STEALTH_POINT_ENCODING', DEFAULT_ENCODING).lower(),
        'hash_name': _env_text('STEALTH_HASH', DEFAULT_HASH).lower(),
        'epoch_n': _env_int('STEALTH_EPOCH_N', 10),
        'lookahead': _env_int('STEALTH_LOOKAHEAD', 1),
        'window': _env_int('STEALTH_FIXED_BASE_WINDOW', DEFAULT_WINDOW),
        'bench_iterations': _env_int('STEALTH_BENCH_ITERATIONS', 200),
        'log_level': _env_text('STEALTH_LOG_LEVEL', 'WARNING').upper(),
    }
    if config:
        unknown = set(config) - set(settings)
        if unknown:
            raise ConfigError(sorted(unknown)[0], f'Unknown configuration key: {sorted(unknown)[0]}')
        settings.update({key: value for key, value in config.items() if value is not None})
    if settings['bench_iterations'] < 100:
        raise ConfigError('bench_iterations', 'bench_iterations must be >= 100')
    return ToolkitConfig(**settings)


def create_toolkit(config: dict | None = None) -> Toolkit:
    settings = load_config(config)
    try:
        EpochConfig(settings.epoch_n, settings.lookahead)
        group = get_group(settings.backend, settings.encoding, settings.hash_name, settings.window)
    except ValueError as exc:
        field = getattr(exc, 'field', 'group')
        raise ConfigError(field, str(exc)) from exc
    return Toolkit(config=settings, group=group)
