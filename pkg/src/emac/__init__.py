"""Episodic memory actor-critic for continuous control, at desk scale."""

from .agent import AgentConfig, EmacAgent, TrainingDiverged, UpdateDiagnostics
from .config import RunConfig
from .diagnostics import OverestimationSample, measure, true_value_estimate
from .envs import EnvSpec, Pendulum, Reacher, StepResult, make_env
from .harness import RunArtifacts, evaluate, run, run_seed, sweep
from .memory import EpisodicMemory, GaussianProjection, MemoryFullError
from .replay import Batch, PrioritizedReplay, Transition, finalize_episode

__all__ = [
    "AgentConfig", "Batch", "EmacAgent", "EnvSpec", "EpisodicMemory",
    "GaussianProjection", "MemoryFullError", "OverestimationSample",
    "Pendulum", "PrioritizedReplay", "Reacher", "RunArtifacts", "RunConfig",
    "StepResult", "Transition", "TrainingDiverged", "UpdateDiagnostics",
    "evaluate", "finalize_episode", "make_env", "measure", "run", "run_seed",
    "sweep", "true_value_estimate",
]
