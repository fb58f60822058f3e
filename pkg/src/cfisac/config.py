"""System configuration: INI schema, validation and round-tripping."""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import asdict, dataclass, fields, replace

from .feasibility import InfeasibleLayout, check_layout


class ConfigError(ValueError):
    pass


# (section, key, attribute, type)
_SCHEMA = [
    ("network", "A", "n_tap", int),
    ("network", "B", "n_sap", int),
    ("network", "K", "n_ue", int),
    ("network", "N_T", "n_t", int),
    ("network", "N_R", "n_r", int),
    ("network", "ring_radius", "ring_radius", float),
    ("network", "target_x", "target_x", float),
    ("network", "target_y", "target_y", float),
    ("radio", "P_t", "p_t", float),
    ("radio", "noise_dbm", "noise_dbm", float),
    ("radio", "f_s", "f_s", float),
    ("radio", "L_paths", "n_paths", int),
    ("radio", "omega_comm", "omega_comm", float),
    ("radio", "omega_sense", "omega_sense", float),
    ("radio", "pl0_db", "pl0_db", float),
    ("radio", "d_ref", "d_ref", float),
    ("radio", "rcs", "rcs", float),
    ("sensing", "gamma_b", "gamma_b", float),
    ("antenna", "D_0", "d0", float),
    ("antenna", "p_min", "p_min", float),
    ("antenna", "p_max", "p_max", float),
    ("pa", "beta1", "beta1", float),
    ("pa", "epsilon", "epsilon", float),
    ("optimizer", "iterations", "iterations", int),
    ("optimizer", "step_w", "step_w", float),
    ("optimizer", "step_p", "step_p", float),
    ("gnn", "d_model", "d_model", int),
    ("gnn", "heads", "heads", int),
    ("gnn", "layers", "layers", int),
    ("gnn", "lambda", "penalty", float),
    ("gnn", "lr", "lr", float),
    ("gnn", "epochs", "epochs", int),
    ("gnn", "batch", "batch", int),
    ("run", "seed", "seed", int),
    ("run", "robust", "robust", bool),
]


@dataclass(frozen=True)
class SystemConfig:
    n_tap: int = 2
    n_sap: int = 2
    n_ue: int = 2
    n_t: int = 4
    n_r: int = 2
    ring_radius: float = 20.0
    target_x: float = 0.0
    target_y: float = 0.0
    p_t: float = 0.2
    noise_dbm: float = -120.0
    f_s: float = 3.5e9
    n_paths: int = 3
    omega_comm: float = 2.8
    omega_sense: float = 2.2
    pl0_db: float = -30.0
    d_ref: float = 1.0
    rcs: float = 3.0
    gamma_b: float = 0.05
    d0: float = 0.5
    p_min: float = -2.0
    p_max: float = 2.0
    beta1: float = 1.0
    epsilon: float = 0.1
    iterations: int = 30
    step_w: float = 0.05
    step_p: float = 0.05
    d_model: int = 32
    heads: int = 4
    layers: int = 4
    penalty: float = 1.0
    lr: float = 0.01
    epochs: int = 40
    batch: int = 4
    seed: int = 0
    robust: bool = True

    def __post_init__(self):
        for name in ("n_tap", "n_sap", "n_ue", "n_t", "n_r", "n_paths"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("p_t", "gamma_b", "ring_radius", "f_s", "d_ref"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        if self.d_model % self.heads:
            raise ConfigError("d_model must be divisible by heads")
        check_layout(self.n_t, self.d0, self.p_min, self.p_max)
        check_layout(self.n_r, self.d0, self.p_min, self.p_max)

    @property
    def target(self):
        return (self.target_x, self.target_y)

    @property
    def noise(self) -> float:
        return 10.0 ** ((self.noise_dbm - 30.0) / 10.0)

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    def digest(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:12]


def paper_scale() -> SystemConfig:
    """Larger preset: 16 transmit / 4 receive elements over an 8-wavelength span."""
    return SystemConfig(n_t=16, n_r=4, p_min=-4.0, p_max=4.0, d_model=64, epochs=200)


def dumps(cfg: SystemConfig) -> str:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for section, key, attr, _ in _SCHEMA:
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, repr(getattr(cfg, attr)) if isinstance(getattr(cfg, attr), float)
                   else str(getattr(cfg, attr)))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def dump_config(cfg: SystemConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(cfg))


def loads(text: str, source: str = "<string>", strict: bool = False) -> SystemConfig:
    """Parse INI text. Missing keys fall back to defaults unless ``strict``."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    known = {(s, k) for s, k, _, _ in _SCHEMA}
    for section in parser.sections():
        for key in parser[section]:
            if (section, key) not in known:
                raise ConfigError(f"{source}: unknown field [{section}] {key}")
    values = {}
    for section, key, attr, typ in _SCHEMA:
        if not parser.has_option(section, key):
            if strict:
                raise ConfigError(f"{source}: missing field [{section}] {key}")
            continue
        raw = parser.get(section, key)
        try:
            values[attr] = parser.getboolean(section, key) if typ is bool else typ(raw)
        except ValueError as exc:
            raise ConfigError(f"{source}: field [{section}] {key} = {raw!r}: {exc}") from exc
    try:
        return SystemConfig(**values)
    except InfeasibleLayout as exc:
        raise ConfigError(f"{source}: InfeasibleLayout: {exc}") from exc


def load_config(path, strict: bool = False) -> SystemConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), source=str(path), strict=strict)


def as_dict(cfg: SystemConfig) -> dict:
    return asdict(cfg)


FIELD_NAMES = [f.name for f in fields(SystemConfig)]
FIELD_TYPES = {attr: typ for _, _, attr, typ in _SCHEMA}
KEY_TO_FIELD = {key: attr for _, key, attr, _ in _SCHEMA}


def parse_value(name: str, raw: str):
    """Convert ``raw`` to the type of field ``name`` (attribute or INI key)."""
    attr = KEY_TO_FIELD.get(name, name)
    if attr not in FIELD_TYPES:
        raise ConfigError(f"unknown field {name!r}")
    typ = FIELD_TYPES[attr]
    if typ is bool:
        low = raw.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise ConfigError(f"field {name} = {raw!r}: not a boolean")
        return attr, low in ("1", "true", "yes", "on")
    try:
        return attr, typ(raw)
    except ValueError as exc:
        raise ConfigError(f"field {name} = {raw!r}: {exc}") from exc
