"""Overestimation diagnostics: predicted Q vs true policy return vs memory value.

At a fixed cadence during training, three batch means are recorded over the
same uniformly-sampled replay rows: the critic's Q(s, a), the episodic value
retrieved from memory for (s, a), and a ground-truth estimate obtained by
rolling the current deterministic policy forward from s and summing actual
discounted rewards. Bootstrapped critics tend to drift above the truth;
memory values, coming from older and weaker policies, sit below it. None of
the measurements mutate agent, replay, or memory state.
"""

from dataclasses import dataclass

import numpy as np

from .envs import env_class


@dataclass(frozen=True)
class OverestimationSample:
    step: int
    q_pred_mean: float
    q_true_mean: float
    q_mem_mean: float


def true_value_estimate(env_name, policy, start_observations, gamma, max_steps=1000):
    """Mean discounted return of ``policy`` rolled out from the given states.

    Each start observation is converted back into a dynamics state and rolled
    forward for at most ``max_steps`` steps, stopping early only at natural
    termination; the training time limit does not apply because it is not part
    of the dynamics. ``policy`` maps a batch of observations to a batch of
    actions. Returns the average over the batch.
    """
    env_cls = env_class(env_name)
    start_observations = np.atleast_2d(np.asarray(start_observations, dtype=np.float64))
    states = env_cls.state_from_observation(start_observations)
    n = len(states)
    returns = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    discount = 1.0
    for _ in range(max_steps):
        if not alive.any() or discount == 0.0:
            break
        actions = np.asarray(policy(env_cls.observe(states)), dtype=np.float64)
        states, rewards, dones = env_cls.transition(states, actions)
        returns += discount * np.where(alive, rewards, 0.0)
        alive &= ~np.asarray(dones, dtype=bool)
        discount *= gamma
    return float(returns.mean())


def measure(agent, replay, memory, projection, env_name, step, rng,
            max_steps=1000):
    """One diagnostic row: batch means of predicted, true, and memory values."""
    states, actions = replay.sample_uniform_states(agent.config.batch_size, rng)
    q_pred = agent.critic.forward(np.concatenate([states, actions], axis=1))[:, 0]
    keys = projection(np.concatenate([states, actions], axis=1))
    q_mem = memory.batch_lookup(keys, agent.config.k)
    q_true = true_value_estimate(env_name, agent.policy_batch, states,
                                 agent.config.gamma, max_steps=max_steps)
    return OverestimationSample(
        step=step,
        q_pred_mean=float(q_pred.mean()),
        q_true_mean=q_true,
        q_mem_mean=float(q_mem.mean()),
    )
