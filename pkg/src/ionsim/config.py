"""Experiment configuration: a flat JSON document with a frozen key set."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError

EXPERIMENTS = (
    "verify-identities",
    "coherent-evolve",
    "pump",
    "cool-toric",
    "cool-colorcode",
    "logical-demo",
    "qnd-measure",
    "noise-mc",
    "trotter-vs-ode",
)

NOISE_KEYS = {
    "spread": float,
    "spread_convention": str,
    "mean_shift": float,
    "targets": list,
    "independent": bool,
    "ms_std_dev": float,
}


def _default_noise() -> dict:
    return {
        "spread": 0.3 * math.pi / 2,
        "spread_convention": "std",
        "mean_shift": 0.0,
        "targets": [0, 4],
        "independent": True,
        "ms_std_dev": 0.0,
    }


def _default_terms() -> list:
    return [
        {"type": "hamiltonian", "string": "XXXX", "coefficient": -1.0},
        {"type": "hamiltonian", "string": "ZIII", "coefficient": -0.5},
        {"type": "pump", "string": "XXXX", "flip": "IIIZ", "rate": 0.5},
    ]


@dataclass
class ExperimentConfig:
    """All knobs of one CLI run. Angles in radians, times in arbitrary units."""

    experiment: str = "verify-identities"
    theta: float = math.pi / 2
    phi: float = math.pi / 8
    tau: float = 1.0
    steps: int = 6
    sweeps: int = 1
    trajectories: int = 10000
    seed: int = 0
    workers: int = 1
    stabilizer: str = "XXXX"
    initial: str = ""
    schedule: list | None = None
    flips: dict = field(default_factory=dict)
    gates: list = field(default_factory=lambda: ["X", "H", "K"])
    noise: dict = field(default_factory=_default_noise)
    terms: list = field(default_factory=_default_terms)
    dt: float = 0.01
    refocus: bool = False
    strict_phase: bool = False
    dump_trajectories: bool = False
    out: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}", field="experiment")
        for name in ("theta", "phi", "tau", "dt"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number", field=name)
            setattr(self, name, float(v))
        for name in ("steps", "sweeps", "trajectories", "seed", "workers"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(f"{name} must be a non-negative integer", field=name)
        if self.tau <= 0 or self.dt <= 0:
            raise ConfigError("tau and dt must be positive", field="tau" if self.tau <= 0 else "dt")
        for name in ("sweeps", "trajectories", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1", field=name)
        for name in ("refocus", "strict_phase", "dump_trajectories"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be true or false", field=name)
        for name in ("stabilizer", "initial", "out"):
            if not isinstance(getattr(self, name), str):
                raise ConfigError(f"{name} must be a string", field=name)
        if self.schedule is not None and not all(isinstance(s, str) for s in self.schedule):
            raise ConfigError("schedule must be a list of stabilizer names", field="schedule")
        if not isinstance(self.flips, dict) or not all(isinstance(v, int) for v in self.flips.values()):
            raise ConfigError("flips maps stabilizer names to qubit labels", field="flips")
        if not isinstance(self.gates, list):
            raise ConfigError("gates must be a list", field="gates")
        if not isinstance(self.terms, list) or not all(isinstance(t, dict) for t in self.terms):
            raise ConfigError("terms must be a list of objects", field="terms")
        if not isinstance(self.noise, dict):
            raise ConfigError("noise must be an object", field="noise")
        unknown = set(self.noise) - set(NOISE_KEYS)
        if unknown:
            raise ConfigError(f"unknown noise keys {sorted(unknown)}", field=f"noise.{sorted(unknown)[0]}")
        noise = _default_noise()
        noise.update(self.noise)
        for key, typ in NOISE_KEYS.items():
            v = noise[key]
            if typ is float:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError(f"noise.{key} must be a number", field=f"noise.{key}")
                noise[key] = float(v)
            elif not isinstance(v, typ):
                raise ConfigError(f"noise.{key} must be {typ.__name__}", field=f"noise.{key}")
        if noise["spread_convention"] not in ("std", "variance"):
            raise ConfigError("noise.spread_convention is 'std' or 'variance'", field="noise.spread_convention")
        if noise["spread"] < 0 or noise["ms_std_dev"] < 0:
            raise ConfigError("noise spreads must be non-negative", field="noise.spread")
        self.noise = noise

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict, source: str | None = None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown key {key!r}", field=key, line=line_of(source, key))
        try:
            return cls(**data)
        except ConfigError as exc:
            if exc.line is None and exc.field:
                exc.line = line_of(source, exc.field.split(".")[-1])
            raise

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
        return cls.from_dict(data, text)


def line_of(source: str | None, key: str) -> int | None:
    """First line of ``source`` holding ``key`` as a JSON object key."""
    if source is None:
        return None
    needle = json.dumps(key) + ":"
    needle_spaced = json.dumps(key) + " :"
    for lineno, line in enumerate(source.splitlines(), 1):
        if needle in line or needle_spaced in line:
            return lineno
    return None
