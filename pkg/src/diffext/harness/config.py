from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..tomo.embedding import MODES as EMBEDDING_MODES

EXPERIMENTS = ("spiral", "ct")
DEFAULT_M = {"spiral": math.e, "ct": 1.0}
# first entry is the default
TRAIN_SAMPLING = {"spiral": ("parameter", "arclength"), "ct": ("random", "grid")}


@dataclass
class ExperimentConfig:
    experiment: str = "spiral"
    batch_sizes: list = field(default_factory=lambda: [50, 100, 150])
    eval_count: int = 10_000
    n_bar: int = 2
    delta: float = 0.1
    m_reference: int = 50
    M: float | None = None  # None: experiment default (e for spiral, 1 for ct)
    noise_level: float = 0.2
    d: int = 256
    nb: int = 367
    seed: int = 0
    output_dir: str = "out"
    train_sampling: str | None = None  # ct: random | grid; spiral: parameter | arclength
    embedding: str = "half-circle"
    raster_size: int = 128
    timing: bool = False

    def __post_init__(self):
        self.validate()

    @property
    def half_width(self) -> float:
        return DEFAULT_M[self.experiment] if self.M is None else float(self.M)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.batch_sizes or any(int(b) < 1 for b in self.batch_sizes):
            raise ConfigError(f"batch_sizes must be a non-empty list of positive ints, got {self.batch_sizes}")
        for name in ("eval_count", "n_bar", "m_reference", "d", "nb", "raster_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < float(self.delta) < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.M is not None and not float(self.M) > 0:
            raise ConfigError(f"M must be positive, got {self.M}")
        if float(self.noise_level) < 0:
            raise ConfigError(f"noise_level must be non-negative, got {self.noise_level}")
        if self.nb % 2 != 1:
            raise ConfigError(f"nb must be odd, got {self.nb}")
        allowed = TRAIN_SAMPLING[self.experiment]
        if self.train_sampling is None:
            self.train_sampling = allowed[0]
        if self.train_sampling not in allowed:
            raise ConfigError(f"train_sampling for {self.experiment} must be one of {allowed}")
        if self.embedding not in EMBEDDING_MODES:
            raise ConfigError(f"embedding must be one of {EMBEDDING_MODES}")

    def as_items(self) -> list[tuple[str, str]]:
        items = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            elif v is None:
                v = ""
            items.append((f.name, str(v)))
        items.append(("half_width_effective", repr(self.half_width)))
        return items


def _coerce(name: str, raw):
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    if name not in fields:
        raise ConfigError(f"unknown configuration key {name!r}")
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if name == "batch_sizes":
            return [int(x) for x in raw.replace(" ", "").split(",") if x]
        if name == "M":
            return None if raw in ("", "none", "None") else float(raw)
        if name == "train_sampling":
            return raw or None
        if name == "timing":
            if raw.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("1", "true", "yes")
        default = getattr(ExperimentConfig(), name) if name != "experiment" else ""
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def normalize_key(key: str) -> str:
    key = key.strip().lstrip("-")
    return key if key == "M" else key.replace("-", "_").lower()


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        out[key] = _coerce(key, value)
    return out


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    values = dict(file_values or {})
    for k, v in (overrides or {}).items():
        if v is not None:
            values[normalize_key(k)] = _coerce(normalize_key(k), v)
    return ExperimentConfig(**values)


@dataclass(frozen=True)
class Seeds:
    """Independent integer seeds derived from the master seed."""

    train: int
    eval: int
    noise: int
    fit: int

    @classmethod
    def derive(cls, seed: int) -> "Seeds":
        children = np.random.SeedSequence(seed).spawn(4)
        return cls(*(int(c.generate_state(1, dtype=np.uint32)[0]) for c in children))
