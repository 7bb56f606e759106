import numpy as np
import pytest

from emac.diagnostics import OverestimationSample, measure, true_value_estimate
from emac.envs import Pendulum, Reacher
from emac.memory import EpisodicMemory, GaussianProjection
from emac.replay import PrioritizedReplay, finalize_episode, Transition
from helpers import make_agent


def zero_policy(obs_batch):
    return np.zeros((len(obs_batch), 1))


class TestTrueValueEstimate:
    def test_gamma_zero_is_mean_one_step_reward(self):
        rng = np.random.default_rng(0)
        states = np.column_stack([rng.uniform(-np.pi, np.pi, 16),
                                  rng.uniform(-1, 1, 16)])
        obs = Pendulum.observe(states)
        _, rewards, _ = Pendulum.transition(states, np.zeros((16, 1)))
        est = true_value_estimate("pendulum", zero_policy, obs, gamma=0.0,
                                  max_steps=50)
        assert est == pytest.approx(float(rewards.mean()), abs=1e-12)

    def test_absorbing_zero_reward_fixed_point(self):
        # Reacher on the goal: terminates at once, later steps contribute 0.
        state = np.array([[0.0, 0.0, 0.0, 0.001]])
        obs = Reacher.observe(state)
        est = true_value_estimate("reacher", lambda o: np.zeros((len(o), 2)),
                                  obs, gamma=0.9, max_steps=100)
        # single step: reward = -dist + bonus at the goal, then the rollout ends
        _, reward, done = Reacher.transition(state[0], np.zeros(2))
        assert done
        assert est == pytest.approx(reward, abs=1e-12)

    def test_three_step_manual_rollout(self):
        gamma = 0.5
        start = np.array([0.3, -0.2])
        obs = Pendulum.observe(start)[None, :]

        def policy(obs_batch):
            return np.full((len(obs_batch), 1), 0.7)

        state, total = start, 0.0
        for t in range(3):
            state, reward, _ = Pendulum.transition(state, np.array([0.7]))
            total += gamma ** t * reward
        est = true_value_estimate("pendulum", policy, obs, gamma, max_steps=3)
        assert est == pytest.approx(total, abs=1e-12)

    def test_rollout_ignores_training_time_limit(self):
        # 300 steps > the pendulum's 200-step training limit: rewards keep
        # accruing because the limit is not part of the dynamics.
        obs = Pendulum.observe(np.array([np.pi - 0.1, 0.0]))[None, :]
        short = true_value_estimate("pendulum", zero_policy, obs, 1.0, max_steps=200)
        long = true_value_estimate("pendulum", zero_policy, obs, 1.0, max_steps=300)
        assert long < short  # strictly more negative reward accumulated


def build_training_state(n_transitions=40, seed=3):
    rng = np.random.default_rng(seed)
    agent = make_agent(obs_dim=3, act_dim=1, seed=seed, hidden_sizes=(8, 8))
    projection = GaussianProjection(4, 4, np.random.default_rng(seed + 1))
    memory = EpisodicMemory(4, 1000)
    replay = PrioritizedReplay(3, 1, 1000, np.random.default_rng(seed + 2),
                               memory=memory, projection=projection)
    env = Pendulum()
    obs = env.reset(seed)
    episode = []
    for _ in range(n_transitions):
        action = rng.uniform(-2, 2, 1)
        result = env.step(action)
        episode.append(Transition(obs, action, result.reward,
                                  result.observation, result.done))
        obs = result.observation
    finalize_episode(episode, 0.9, extension_rewards=[])
    replay.push_finalized(episode)
    return agent, replay, memory, projection


class TestMeasure:
    def test_zero_critic_reports_zero_q_pred(self):
        agent, replay, memory, projection = build_training_state()
        for w, b in zip(agent.critic.weights, agent.critic.biases):
            w[:] = 0.0
            b[:] = 0.0
        sample = measure(agent, replay, memory, projection, "pendulum",
                         step=100, rng=np.random.default_rng(0), max_steps=5)
        assert sample.q_pred_mean == 0.0
        assert sample.step == 100

    def test_q_mem_mean_within_stored_return_range(self):
        agent, replay, memory, projection = build_training_state()
        sample = measure(agent, replay, memory, projection, "pendulum",
                         step=1, rng=np.random.default_rng(1), max_steps=5)
        assert memory.values.min() - 1e-12 <= sample.q_mem_mean
        assert sample.q_mem_mean <= memory.values.max() + 1e-12

    def test_measurement_mutates_nothing(self):
        agent, replay, memory, projection = build_training_state()
        w_before = [w.copy() for w in agent.critic.weights]
        keys_before = memory.keys.copy()
        returns_before = replay._mc_returns[:len(replay)].copy()
        priorities_before = replay.priorities.copy()
        measure(agent, replay, memory, projection, "pendulum",
                step=7, rng=np.random.default_rng(2), max_steps=5)
        for a, b in zip(agent.critic.weights, w_before):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(memory.keys, keys_before)
        np.testing.assert_array_equal(replay._mc_returns[:len(replay)], returns_before)
        np.testing.assert_array_equal(replay.priorities, priorities_before)

    def test_measurement_reproducible_with_fixed_rng(self):
        agent, replay, memory, projection = build_training_state()
        s1 = measure(agent, replay, memory, projection, "pendulum",
                     step=5, rng=np.random.default_rng(42), max_steps=10)
        s2 = measure(agent, replay, memory, projection, "pendulum",
                     step=5, rng=np.random.default_rng(42), max_steps=10)
        assert s1 == s2

    def test_all_fields_finite(self):
        agent, replay, memory, projection = build_training_state()
        sample = measure(agent, replay, memory, projection, "pendulum",
                         step=9, rng=np.random.default_rng(3), max_steps=20)
        assert isinstance(sample, OverestimationSample)
        for value in (sample.q_pred_mean, sample.q_true_mean, sample.q_mem_mean):
            assert np.isfinite(value)
