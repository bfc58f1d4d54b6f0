"""Experiment configuration: a flat, JSON-serializable record."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

CIRCULANT_METHODS = ["ARMA", "GD0"] + [f"ICPA{k}" for k in range(6)] + [f"IOPA{k}" for k in range(6)]

DEFAULTS = {
    "exp-circulant": dict(n=1000, generators=[1, 2, 5], trials=100, iterations=20,
                          methods=CIRCULANT_METHODS),
    "exp-timevarying": dict(n=512, radius=1 / 16, snapshots=24, delta=0.1, trials=10,
                            eta=[0.75, 0.5, 0.25], iterations=6,
                            methods=["IOPA1", "ICPA1", "GD0"]),
    "exp-temperature": dict(k=5, snapshots=24, trials=10, eta=[35.0, 20.0, 10.0],
                            iterations=6, methods=["IOPA1", "ICPA1", "GD0"]),
}


@dataclass
class ExperimentConfig:
    experiment: str = "exp-circulant"
    n: int | None = None
    generators: list = field(default_factory=lambda: [1, 2, 5])
    filter: dict | None = None
    methods: list | None = None
    trials: int | None = None
    seed: int = 0
    eta: list | None = None
    alpha: float | None = None
    beta: float | None = None
    iterations: int | None = None
    out: str | None = None
    data: str | None = None
    radius: float | None = None
    snapshots: int | None = None
    delta: float | None = None
    k: int | None = None
    report_m: list = field(default_factory=lambda: [1, 2, 3, 4, 5, 7, 9, 11, 14, 17, 20])
    tol: float = 1e-3

    def __post_init__(self):
        for key, val in DEFAULTS.get(self.experiment, {}).items():
            if getattr(self, key) is None:
                setattr(self, key, list(val) if isinstance(val, list) else val)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
