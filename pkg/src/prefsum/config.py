"""Run configuration with documented defaults.

Field defaults follow the simulation constants the system is calibrated
around: concept learning rate 0.001, reward learning rate 0.005, and the
ground-truth reward blend 0.8 / 0.5 / 0.25.  Precedence when assembling a
config is flags > config file > defaults, and every output artifact echoes
the effective values.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

from .errors import ValidationError

ABLATION_VARIANTS = ("full", "AC", "PR", "GE")


@dataclass
class RunConfig:
    unit: str = "unigram"
    budget: int = 20
    summary_length: int = 30
    strategy: str = "heuristic"
    reward_mode: str = "pairwise"
    reward_budget: int = 6
    pool_size: int = 8
    redundancy_cap: float = 0.8
    concept_learning_rate: float = 0.001
    reward_learning_rate: float = 0.005
    alpha: float = 0.8
    beta: float = 0.5
    gamma: float = 0.25
    epochs: int = 50
    policy_episodes: int = 800
    policy_learning_rate: float = 0.01
    temperature_start: float = 1.0
    temperature_end: float = 0.1
    weight_power: float = 1.0  # >1 concentrates concept weight on top ranks
    feature_limit: Optional[int] = None
    ablation: str = "full"
    full_retrain: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValidationError("budget must be >= 1")
        if self.summary_length < 1:
            raise ValidationError("summary_length must be >= 1")
        if self.reward_mode not in ("point", "pairwise"):
            raise ValidationError(f"unknown reward mode {self.reward_mode!r}")
        if self.ablation not in ABLATION_VARIANTS:
            raise ValidationError(f"unknown ablation variant {self.ablation!r}")
        if self.pool_size < 1:
            raise ValidationError("pool_size must be >= 1")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as handle:
            return cls.from_json(json.load(handle))

    def merged(self, overrides: dict) -> "RunConfig":
        """New config with non-None overrides applied."""
        data = self.to_json()
        for key, value in overrides.items():
            if value is not None:
                data[key] = value
        return RunConfig.from_json(data)
