"""Experiment configuration: INI-style files, validation, canonical output.

A run is fully determined by its config: every random choice flows through
a named seed field, so reruns are reproducible byte for byte.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .errors import ConfigError

ALGORITHMS = ("oi", "s-dot", "sa-dot", "f-dot", "seq-pm", "seq-dist-pm")
TOPOLOGIES = ("erdos-renyi", "ring", "star", "complete")
TRANSPORTS = ("inprocess", "sockets")
SOURCES = ("synthetic", "csv", "binary")


@dataclass
class DataConfig:
    source: str = "synthetic"
    d: int = 20
    n_per_node: int = 500
    gap: float = 0.7
    top_profile: str = "distinct-geometric"
    tail_ratio: float = 0.9
    seed: int = 1
    center: bool = False
    path: str = ""
    mode: str = "samples"


@dataclass
class NetworkConfig:
    topology: str = "erdos-renyi"
    n: int = 10
    p: float = 0.5
    seed: int | None = None


@dataclass
class AlgorithmConfig:
    name: str = "s-dot"
    r: int = 5
    t_outer: int = 200
    schedule: str = "50"
    tol: float = 0.0
    qr_rounds: int = 50
    rounds_per_iter: int = 50
    iters_per_vector: int = 100
    init_seed: int = 3


@dataclass
class HarnessConfig:
    transport: str = "inprocess"
    straggler: bool = False
    straggler_delay: float = 0.01
    straggler_seed: int = 0
    base_port: int = 56701
    track_centralized: bool = True
    ground_truth: str = "auto"  # auto | none
    out_dir: str = "."


@dataclass
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)

    def validate(self) -> None:
        if self.data.source not in SOURCES:
            raise ConfigError("data.source", f"must be one of {SOURCES}")
        if self.data.source != "synthetic" and not self.data.path:
            raise ConfigError("data.path", "required for file-backed data")
        if self.data.mode not in ("samples", "features"):
            raise ConfigError("data.mode", "must be 'samples' or 'features'")
        if not 0.0 < self.data.gap < 1.0:
            raise ConfigError("data.gap", "must lie in (0, 1)")
        if self.network.topology not in TOPOLOGIES:
            raise ConfigError("network.topology", f"must be one of {TOPOLOGIES}")
        if self.network.topology == "erdos-renyi":
            if self.network.seed is None:
                raise ConfigError("network.seed", "required for erdos-renyi topologies")
            if not 0.0 < self.network.p <= 1.0:
                raise ConfigError("network.p", "must lie in (0, 1]")
        if self.network.n < 1:
            raise ConfigError("network.n", "must be >= 1")
        if self.algorithm.name not in ALGORITHMS:
            raise ConfigError("algorithm.name", f"must be one of {ALGORITHMS}")
        if self.algorithm.r < 1:
            raise ConfigError("algorithm.r", "must be >= 1")
        if self.algorithm.t_outer < 1:
            raise ConfigError("algorithm.t_outer", "must be >= 1")
        if self.harness.transport not in TRANSPORTS:
            raise ConfigError("harness.transport", f"must be one of {TRANSPORTS}")
        if self.harness.ground_truth not in ("auto", "none"):
            raise ConfigError("harness.ground_truth", "must be 'auto' or 'none'")
        if self.harness.straggler_delay < 0:
            raise ConfigError("harness.straggler_delay", "must be >= 0")


_SECTIONS = {
    "data": DataConfig,
    "network": NetworkConfig,
    "algorithm": AlgorithmConfig,
    "harness": HarnessConfig,
}


def _coerce(section: str, key: str, text: str, target_type):
    text = text.strip()
    try:
        if target_type is bool:
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}", str(exc)) from None


def config_from_raw(raw: dict[str, dict[str, str]]) -> ExperimentConfig:
    """Build and validate a typed config from {section: {key: text}}."""
    cfg = ExperimentConfig()
    for section, entries in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        target = getattr(cfg, section)
        known = {f.name: f for f in fields(target)}
        defaults = type(target)()
        for key, text in entries.items():
            if key not in known:
                raise ConfigError(f"{section}.{key}", "unknown key")
            # coercion type is inferred from the field's default value
            default = getattr(defaults, key)
            if section == "network" and key == "seed":
                value = _coerce(section, key, text, int) if text.strip() != "" else None
            elif isinstance(default, bool):
                value = _coerce(section, key, text, bool)
            elif isinstance(default, int):
                value = _coerce(section, key, text, int)
            elif isinstance(default, float):
                value = _coerce(section, key, text, float)
            else:
                value = text.strip()
            setattr(target, key, value)
    cfg.validate()
    return cfg


def config_to_raw(cfg: ExperimentConfig) -> dict[str, dict[str, str]]:
    """Canonical string form (round-trips through config_from_raw)."""

    def text(v) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)

    out: dict[str, dict[str, str]] = {}
    for section, cls in _SECTIONS.items():
        target = getattr(cfg, section)
        out[section] = {f.name: text(getattr(target, f.name)) for f in fields(cls)}
    return out


def read_ini(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(str(path), f"INI parse failure: {exc}") from None
    return {s: dict(parser.items(s)) for s in parser.sections()}


def load_config(path) -> ExperimentConfig:
    return config_from_raw(read_ini(path))


def save_config(cfg: ExperimentConfig, path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    for section, entries in config_to_raw(cfg).items():
        parser[section] = entries
    with open(path, "w") as fh:
        parser.write(fh)
