"""Plain-text study configuration.

The file format is one ``key = value`` pair per line. Blank lines and
lines starting with ``#`` are ignored, and list values are comma
separated::

    study = table3
    replications = 100
    train = 450
    test = 50
    horizons = 1, 10, 50
    seed = 11

Keys are the field names of :class:`StudyConfig`; dashes and underscores
are interchangeable. Command-line flags override file values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

STUDIES = ("table1", "table2", "table3", "pipeline", "fit", "forecast", "eval", "select-order", "simulate")

# Default replication counts (full scale, quick scale).
DEFAULT_REPS = {"table1": (1000, 50), "table2": (100, 20), "table3": (500, 50)}


class ConfigError(ValueError):
    """Invalid configuration value or file."""


@dataclass
class StudyConfig:
    study: str = "table1"
    network: str = "fig1"
    models: tuple = ("gnari", "ngnar-cls", "ngnar-cmle", "pnar")
    processes: tuple = ("P1", "P2", "P3", "P4")
    replications: int = None
    lengths: tuple = (50, 200, 500)
    train: int = 450
    test: int = 50
    horizons: tuple = (1, 10, 50)
    max_p: int = 14
    seed: int = 0
    out: str = "out"
    workers: int = 1
    quick: bool = False
    burn_in: int = 100

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}; expected one of {STUDIES}")
        if self.replications is not None and self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.train < 1 or self.test < 1:
            raise ConfigError("train and test lengths must both be >= 1")
        if not self.horizons or min(self.horizons) < 1 or max(self.horizons) > self.test:
            raise ConfigError(f"horizons must lie in 1..{self.test}")
        if not self.lengths or min(self.lengths) < 2:
            raise ConfigError("series lengths must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.max_p < 1:
            raise ConfigError("max_p must be >= 1")

    @property
    def total_length(self) -> int:
        return self.train + self.test

    def reps(self) -> int:
        if self.replications is not None:
            return self.replications
        full, quick = DEFAULT_REPS.get(self.study, (1, 1))
        return quick if self.quick else full

    def replace(self, **changes) -> "StudyConfig":
        return dataclasses.replace(self, **changes)


def _convert(name, raw, default):
    raw = raw.strip() if isinstance(raw, str) else raw
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(x) for x in items)
            return tuple(items)
        if isinstance(default, int) or name == "replications":
            return int(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def config_from_mapping(values: dict, base: StudyConfig = None) -> StudyConfig:
    """Build a config from raw (usually string) values layered over ``base``."""
    base = base or StudyConfig()
    names = {f.name: f for f in dataclasses.fields(StudyConfig)}
    changes = {}
    for key, raw in values.items():
        name = key.replace("-", "_")
        if name not in names:
            raise ConfigError(f"unknown config key {key!r}")
        if raw is None:
            continue
        changes[name] = _convert(name, raw, getattr(base, name))
    return dataclasses.replace(base, **changes)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def load_config(path, overrides: dict = None) -> StudyConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such config file: {path}")
    values = parse_config_text(path.read_text(), str(path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_mapping(values)


def format_config(cfg: StudyConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"

