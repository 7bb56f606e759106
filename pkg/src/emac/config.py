"""Run configuration: every hyperparameter in one validated, serializable record."""

import dataclasses
import json
import math
from dataclasses import dataclass

from .envs import ENVIRONMENTS

# Desk-scale step budgets used when total_steps is left unset.
DEFAULT_TOTAL_STEPS = {"pendulum": 30000, "reacher": 20000}

# Default extension horizon: long enough that the discount tail is < 1e-3.
_EXTENSION_TAIL = 1e-3
_EXTENSION_CAP = 1000

# Fields `sweep` may vary; everything else is either structural or identity.
SWEEPABLE_FIELDS = frozenset({
    "alpha", "beta", "u", "k", "epsilon", "lr", "tau", "gamma",
    "noise_std", "batch_size", "warmup_steps", "total_steps",
})


def default_extension_horizon(gamma):
    if gamma <= 0.0:
        return 0
    if gamma >= 1.0:
        return _EXTENSION_CAP
    return min(_EXTENSION_CAP, math.ceil(math.log(_EXTENSION_TAIL) / math.log(gamma)))


@dataclass
class RunConfig:
    env: str = "pendulum"
    total_steps: int | None = None          # resolved per env when unset
    eval_every: int = 1000
    eval_episodes: int = 10
    seeds: tuple = (0,)
    gamma: float = 0.99
    alpha: float = 0.1                      # episodic blend in the critic loss
    beta: float = 0.5                       # prioritization exponent
    tau: float = 0.005
    k: int = 2                              # neighbors per lookup
    u: int = 4                              # projected key dimension
    epsilon: float = 1e-3                   # distance offset constant
    lr: float = 1e-3
    batch_size: int = 128
    warmup_steps: int = 1000
    memory_capacity: int = 200000
    noise_std: float = 0.1                  # exploration std as fraction of the action bound
    extension_horizon: int | None = None    # resolved from gamma when unset
    memory_overflow: str = "error"          # or "ring"
    diag_every: int = 0                     # 0 disables overestimation measurements
    diag_max_steps: int = 1000

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.validate()

    def validate(self):
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"unknown env {self.env!r}; choose from {sorted(ENVIRONMENTS)}")
        if self.total_steps is not None and self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ValueError("eval_every and eval_episodes must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.k < 1 or self.u < 1:
            raise ValueError("k and u must be >= 1")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.memory_capacity < 1:
            raise ValueError("memory_capacity must be >= 1")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be >= 0")
        if self.extension_horizon is not None and self.extension_horizon < 0:
            raise ValueError("extension_horizon must be >= 0")
        if self.memory_overflow not in ("error", "ring"):
            raise ValueError("memory_overflow must be 'error' or 'ring'")
        if self.diag_every < 0:
            raise ValueError("diag_every must be >= 0")
        if self.diag_max_steps < 1:
            raise ValueError("diag_max_steps must be >= 1")

    def resolved(self):
        """Copy with env-dependent defaults made concrete."""
        total = self.total_steps if self.total_steps is not None \
            else DEFAULT_TOTAL_STEPS[self.env]
        horizon = self.extension_horizon if self.extension_horizon is not None \
            else default_extension_horizon(self.gamma)
        return dataclasses.replace(self, total_steps=total, extension_horizon=horizon)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
