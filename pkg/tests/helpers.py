"""Shared factories for the test suite."""

import numpy as np

from emac.agent import AgentConfig, EmacAgent
from emac.replay import Batch


def make_agent(obs_dim=3, act_dim=1, bound=2.0, seed=0, **cfg_kwargs):
    cfg_kwargs.setdefault("hidden_sizes", (8, 8))
    cfg_kwargs.setdefault("warmup_steps", 10)
    cfg = AgentConfig(**cfg_kwargs)
    return EmacAgent(obs_dim, act_dim, bound, cfg,
                     init_rng=np.random.default_rng(seed),
                     warmup_rng=np.random.default_rng(seed + 1),
                     noise_rng=np.random.default_rng(seed + 2))


def make_batch(rng, n, obs_dim=3, act_dim=1, done=0.0):
    return Batch(
        states=rng.standard_normal((n, obs_dim)),
        actions=rng.standard_normal((n, act_dim)),
        rewards=rng.standard_normal(n),
        next_states=rng.standard_normal((n, obs_dim)),
        dones=np.full(n, done),
        mc_returns=rng.standard_normal(n),
        indices=np.arange(n),
    )
