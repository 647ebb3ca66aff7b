"""Experiment configuration: a flat key=value file mapped onto a dataclass.

Every key matches an ExperimentConfig field name; unknown keys are rejected
so typos fail loudly. The echoed configuration written next to each run's
outputs parses back to an identical object.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

MODES = ("parabolic", "elliptic")
OPTIMIZERS = ("sd", "lbfgs")
NOISE_DISTRIBUTIONS = ("uniform", "gaussian")


@dataclass
class ExperimentConfig:
    mode: str = "parabolic"
    k1: float = 1.0
    k2: float = 0.001
    mu: float = 1e-4
    metric_a: float = 0.001
    final_time: float = 20.0
    n_steps: int = 30
    target_radius: float = 0.5
    initial_radius: float = 0.35
    initial_center_x: float = 0.1
    initial_center_y: float = 0.1
    n_interface: int = 64
    refinement: int = 3
    optimizer: str = "lbfgs"
    memory: int = 5
    max_iters: int = 50
    step: float = 1.0
    grad_tol: float = 1e-6
    noise: float = 0.0
    noise_distribution: str = "uniform"
    seed: int = 0
    out_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.noise_distribution not in NOISE_DISTRIBUTIONS:
            raise ValueError(f"noise_distribution must be one of {NOISE_DISTRIBUTIONS}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0.0 <= self.noise < 1.0:
            raise ValueError("noise must lie in [0, 1)")
        if self.mu < 0 or self.metric_a < 0:
            raise ValueError("mu and metric_a must be nonnegative")
        if self.memory < 1 or self.max_iters < 0 or self.refinement < 1:
            raise ValueError("memory >= 1, max_iters >= 0, refinement >= 1 required")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={v!r}" if isinstance(v, str) else f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    def write(self, path):
        Path(path).write_text(self.to_text())


def parse_config_text(text: str) -> ExperimentConfig:
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    casts = {"str": str, "float": float, "int": int}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in kwargs:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        value = value.strip("'\"")
        kwargs[key] = casts[known[key]](value)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())
