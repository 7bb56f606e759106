"""Deterministic, seedable continuous-control environments.

Two desk-scale tasks with closed-form dynamics:

* ``pendulum``: torque-limited swing-up. Never terminates naturally; episodes
  end only by the time limit, which exercises the truncation/return-correction
  path.
* ``reacher``: velocity-controlled 2-D point mass that must enter a goal
  radius, which exercises natural termination.

Dynamics, rewards and observations are exposed as pure vectorized class
methods (``transition``, ``observe``, ``state_from_observation``) operating on
arrays with an optional leading batch axis. The stateful episode API
(``reset``/``step``/``rollout_extension``) is a thin wrapper over those, so
batched rollouts used by evaluation and diagnostics follow the exact same
math as single-episode stepping.

Integration uses semi-implicit Euler (velocity updated first, then position),
which keeps the pendulum's mechanical energy bounded over long torque-free
rollouts instead of spiraling outward.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    observation_dim: int
    action_dim: int
    action_bound: float
    time_limit: int

    def __post_init__(self):
        if self.observation_dim < 1 or self.action_dim < 1:
            raise ValueError("dimensions must be >= 1")
        if self.action_bound <= 0.0:
            raise ValueError("action_bound must be positive")
        if self.time_limit < 1:
            raise ValueError("time_limit must be >= 1")


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool        # natural termination
    truncated: bool   # time-limit cut


class Env:
    """Stateful episode wrapper over the pure dynamics of a subclass."""

    SPEC: EnvSpec

    def __init__(self):
        self._state = None
        self._steps = 0
        self._done = False
        self._truncated = False

    # -- pure interface, implemented per environment ------------------------
    @classmethod
    def initial_state(cls, rng):
        raise NotImplementedError

    @classmethod
    def transition(cls, states, actions):
        """(states, actions) -> (next_states, rewards, dones); broadcasts over a batch axis."""
        raise NotImplementedError

    @classmethod
    def observe(cls, states):
        raise NotImplementedError

    @classmethod
    def state_from_observation(cls, obs):
        raise NotImplementedError

    # -- episode API ---------------------------------------------------------
    def reset(self, seed):
        """Start a new episode from the seeded initial distribution."""
        rng = np.random.default_rng(seed)
        self._state = self.initial_state(rng)
        self._steps = 0
        self._done = False
        self._truncated = False
        return self.observe(self._state)

    def step(self, action):
        if self._state is None:
            raise RuntimeError("reset() must be called before step()")
        if self._done or self._truncated:
            raise RuntimeError("episode already finished; call reset()")
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.SPEC.action_dim,):
            raise ValueError(f"action shape {action.shape} != ({self.SPEC.action_dim},)")
        next_state, reward, done = self.transition(self._state, action)
        self._state = next_state
        self._steps += 1
        self._done = bool(done)
        # Natural termination wins when both would trigger on the same step.
        self._truncated = not self._done and self._steps >= self.SPEC.time_limit
        return StepResult(self.observe(next_state), float(reward),
                          self._done, self._truncated)

    def rollout_extension(self, policy, horizon):
        """Continue a truncated episode under ``policy`` for return correction.

        Runs up to ``horizon`` further steps (stopping early on natural
        termination) and returns the collected rewards. These steps exist only
        so that discounted returns of late transitions cover a horizon
        comparable to early ones; callers must never store them for training.
        """
        if horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self._done:
            raise RuntimeError("extension is only defined after a time-limit cut, "
                               "not natural termination")
        if not self._truncated:
            raise RuntimeError("episode still active; extension applies only after truncation")
        rewards = []
        state = self._state
        for _ in range(horizon):
            action = np.asarray(policy(self.observe(state)), dtype=np.float64)
            state, reward, done = self.transition(state, action)
            rewards.append(float(reward))
            if done:
                break
        self._state = state
        return rewards

    def get_state(self):
        return None if self._state is None else self._state.copy()

    def set_state(self, state):
        """Inject an arbitrary dynamics state and mark the episode active."""
        state = np.asarray(state, dtype=np.float64)
        if state.shape != self._state_shape():
            raise ValueError(f"state shape {state.shape} != {self._state_shape()}")
        self._state = state.copy()
        self._steps = 0
        self._done = False
        self._truncated = False

    @classmethod
    def _state_shape(cls):
        raise NotImplementedError


class Pendulum(Env):
    """Torque-limited pendulum swing-up.

    State is (angle, angular velocity) with the angle measured from upright
    and wrapped to [-pi, pi), which makes the trig observation invertible.
    The observation is [cos(angle), sin(angle), velocity / MAX_SPEED]: every
    component lies in [-1, 1], so no single feature dominates either network
    inputs or projected-key distances. Reward penalizes angle, speed and
    torque; the maximum reward 0 is attained balancing upright at rest with
    zero torque. Rewards lie in [-REWARD_BOUND, 0]. No natural termination.
    """

    GRAVITY = 9.81
    MASS = 1.0
    LENGTH = 1.0
    DT = 0.05
    MAX_SPEED = 8.0
    SPEC = EnvSpec(observation_dim=3, action_dim=1, action_bound=2.0, time_limit=200)
    REWARD_BOUND = np.pi ** 2 + 0.1 * MAX_SPEED ** 2 + 0.001 * SPEC.action_bound ** 2

    @staticmethod
    def _wrap(theta):
        return (theta + np.pi) % (2.0 * np.pi) - np.pi

    @classmethod
    def initial_state(cls, rng):
        theta = rng.uniform(-np.pi, np.pi)
        theta_dot = rng.uniform(-1.0, 1.0)
        return np.array([theta, theta_dot])

    @classmethod
    def transition(cls, states, actions):
        states = np.asarray(states, dtype=np.float64)
        actions = np.asarray(actions, dtype=np.float64)
        theta = states[..., 0]
        theta_dot = states[..., 1]
        torque = np.clip(actions[..., 0], -cls.SPEC.action_bound, cls.SPEC.action_bound)
        inertia = cls.MASS * cls.LENGTH ** 2
        accel = (cls.GRAVITY / cls.LENGTH) * np.sin(theta) + torque / inertia
        new_dot = np.clip(theta_dot + accel * cls.DT, -cls.MAX_SPEED, cls.MAX_SPEED)
        new_theta = cls._wrap(theta + new_dot * cls.DT)
        reward = -(new_theta ** 2 + 0.1 * new_dot ** 2 + 0.001 * torque ** 2)
        next_states = np.stack([new_theta, new_dot], axis=-1)
        done = np.zeros(np.shape(reward), dtype=bool) if np.ndim(reward) else False
        return next_states, reward, done

    @classmethod
    def observe(cls, states):
        states = np.asarray(states, dtype=np.float64)
        return np.stack([np.cos(states[..., 0]), np.sin(states[..., 0]),
                         states[..., 1] / cls.MAX_SPEED], axis=-1)

    @classmethod
    def state_from_observation(cls, obs):
        obs = np.asarray(obs, dtype=np.float64)
        return np.stack([np.arctan2(obs[..., 1], obs[..., 0]),
                         obs[..., 2] * cls.MAX_SPEED], axis=-1)

    @classmethod
    def mechanical_energy(cls, states):
        """Kinetic plus potential energy; potential is maximal upright."""
        states = np.asarray(states, dtype=np.float64)
        inertia = cls.MASS * cls.LENGTH ** 2
        kinetic = 0.5 * inertia * states[..., 1] ** 2
        potential = cls.MASS * cls.GRAVITY * cls.LENGTH * np.cos(states[..., 0])
        return kinetic + potential

    @classmethod
    def _state_shape(cls):
        return (2,)


class Reacher(Env):
    """Velocity-controlled point mass reaching toward a sampled goal.

    State is (px, py, gx, gy). The point moves by action*DT per step, clipped
    to the [-1, 1]^2 workspace. Entering GOAL_RADIUS of the goal terminates
    the episode naturally with a +BONUS on top of the per-step -distance
    reward. Rewards lie in [-2*sqrt(2), BONUS]. Goals are drawn from the
    [-GOAL_BOX, GOAL_BOX]^2 square, re-sampled until they start at least
    MIN_SEPARATION from the point.
    """

    DT = 0.05
    GOAL_RADIUS = 0.05
    BONUS = 10.0
    GOAL_BOX = 0.8
    START_BOX = 0.1
    MIN_SEPARATION = 0.2
    SPEC = EnvSpec(observation_dim=4, action_dim=2, action_bound=1.0, time_limit=100)
    REWARD_BOUND = BONUS

    @classmethod
    def initial_state(cls, rng):
        pos = rng.uniform(-cls.START_BOX, cls.START_BOX, size=2)
        while True:
            goal = rng.uniform(-cls.GOAL_BOX, cls.GOAL_BOX, size=2)
            if np.linalg.norm(goal - pos) > cls.MIN_SEPARATION:
                break
        return np.concatenate([pos, goal])

    @classmethod
    def transition(cls, states, actions):
        states = np.asarray(states, dtype=np.float64)
        actions = np.asarray(actions, dtype=np.float64)
        vel = np.clip(actions, -cls.SPEC.action_bound, cls.SPEC.action_bound)
        pos = np.clip(states[..., :2] + vel * cls.DT, -1.0, 1.0)
        goal = states[..., 2:]
        dist = np.linalg.norm(pos - goal, axis=-1)
        done = dist <= cls.GOAL_RADIUS
        reward = -dist + cls.BONUS * done
        next_states = np.concatenate([pos, goal], axis=-1)
        if np.ndim(dist) == 0:
            return next_states, float(reward), bool(done)
        return next_states, reward, done

    @classmethod
    def observe(cls, states):
        states = np.asarray(states, dtype=np.float64)
        pos = states[..., :2]
        goal = states[..., 2:]
        return np.concatenate([pos, goal - pos], axis=-1)

    @classmethod
    def state_from_observation(cls, obs):
        obs = np.asarray(obs, dtype=np.float64)
        pos = obs[..., :2]
        return np.concatenate([pos, pos + obs[..., 2:]], axis=-1)

    @classmethod
    def _state_shape(cls):
        return (4,)


ENVIRONMENTS = {
    "pendulum": Pendulum,
    "reacher": Reacher,
}


def env_class(name):
    try:
        return ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}")


def make_env(name):
    return env_class(name)()
