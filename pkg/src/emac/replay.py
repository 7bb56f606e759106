"""Transition storage: episode staging, return finalization, prioritized sampling.

Episodes accumulate in a staging list until they end; only then can discounted
Monte-Carlo returns be computed, by a backward recursion seeded at zero for a
natural ending or at the discounted sum of extension rewards for a time-limit
cut. Finalized transitions enter the main buffer (and, in lockstep, the
episodic memory table), after which sampling priorities are recomputed from
the stored returns.

Sampling probabilities follow P(i) = p_i^beta / sum_k p_k^beta. Returns can be
negative, so priorities are the returns shifted to be positive:
p_i = (R_i - R_min) + eta with a small eta keeping the worst transition
sampleable. beta=0 gives exactly uniform sampling; no importance-sampling
correction is applied anywhere.
"""

from dataclasses import dataclass

import numpy as np

from .memory import MemoryFullError

# Fraction of the return spread used as the positive floor eta.
_PRIORITY_FLOOR_FRACTION = 1e-2
_PRIORITY_SPREAD_EPS = 1e-8


@dataclass
class Transition:
    """One environment step; ``mc_return`` is filled exactly once at finalization."""
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    mc_return: float | None = None


@dataclass
class Batch:
    """Column-wise minibatch of finalized transitions."""
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    mc_returns: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return len(self.states)


def finalize_episode(transitions, gamma, extension_rewards=None):
    """Fill ``mc_return`` on every transition of one finished episode.

    ``extension_rewards=None`` asserts the episode ended naturally (last
    transition done); passing a list (possibly empty) asserts a time-limit
    cut and seeds the recursion with the discounted sum of those rewards, so
    late transitions see a horizon comparable to early ones.
    """
    if not transitions:
        raise ValueError("cannot finalize an empty episode")
    if extension_rewards is None:
        if not transitions[-1].done:
            raise ValueError("episode is unfinished: last transition is not terminal "
                             "and no extension rewards were supplied")
        tail = 0.0
    else:
        if transitions[-1].done:
            raise ValueError("extension rewards supplied for a naturally-ended episode")
        tail = 0.0
        for r in reversed(extension_rewards):
            tail = float(r) + gamma * tail
    ret = tail
    for tr in reversed(transitions):
        if tr.mc_return is not None:
            raise ValueError("transition already finalized")
        ret = tr.reward + gamma * ret
        tr.mc_return = ret
    return transitions


class PrioritizedReplay:
    """Main replay buffer with episodic-return prioritized sampling.

    When constructed with a memory table and projection, every push also adds
    the projected (state, action) key with its return to the table, keeping
    buffer and table in lockstep.
    """

    def __init__(self, obs_dim, act_dim, capacity, rng, memory=None,
                 projection=None, overflow="error"):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if overflow not in ("error", "ring"):
            raise ValueError("overflow must be 'error' or 'ring'")
        if (memory is None) != (projection is None):
            raise ValueError("memory and projection must be supplied together")
        self.capacity = capacity
        self.overflow = overflow
        self.memory = memory
        self.projection = projection
        self._rng = rng
        self._states = np.empty((capacity, obs_dim), dtype=np.float64)
        self._actions = np.empty((capacity, act_dim), dtype=np.float64)
        self._rewards = np.empty(capacity, dtype=np.float64)
        self._next_states = np.empty((capacity, obs_dim), dtype=np.float64)
        self._dones = np.empty(capacity, dtype=np.float64)
        self._mc_returns = np.empty(capacity, dtype=np.float64)
        self._count = 0
        self.size = 0
        self._priorities = np.empty(capacity, dtype=np.float64)
        self._cum_cache = None   # (beta, cumulative sum of p^beta)

    def __len__(self):
        return self.size

    def push_finalized(self, transitions):
        """Append finalized transitions; mirror them into memory; refresh priorities."""
        for tr in transitions:
            if tr.mc_return is None:
                raise ValueError("transition was not finalized")
            if self.size >= self.capacity and self.overflow == "error":
                raise MemoryFullError(f"replay buffer at capacity {self.capacity}")
            slot = self._count % self.capacity
            self._states[slot] = tr.state
            self._actions[slot] = tr.action
            self._rewards[slot] = tr.reward
            self._next_states[slot] = tr.next_state
            self._dones[slot] = float(tr.done)
            self._mc_returns[slot] = tr.mc_return
            self._count += 1
            self.size = min(self._count, self.capacity)
            if self.memory is not None:
                key = self.projection(np.concatenate([tr.state, tr.action]))
                self.memory.add(key, tr.mc_return)
        self.recompute_priorities()

    def recompute_priorities(self):
        """Map every stored return to a positive priority and rebuild the cache."""
        if self.size == 0:
            return
        returns = self._mc_returns[:self.size]
        r_min = returns.min()
        r_max = returns.max()
        eta = _PRIORITY_FLOOR_FRACTION * (r_max - r_min + _PRIORITY_SPREAD_EPS)
        self._priorities[:self.size] = (returns - r_min) + eta
        self._cum_cache = None

    @property
    def priorities(self):
        return self._priorities[:self.size]

    def probabilities(self, beta):
        """Exact sampling distribution P(i) = p_i^beta / sum p^beta."""
        if beta < 0.0:
            raise ValueError("beta must be >= 0")
        if self.size == 0:
            raise ValueError("empty buffer")
        powered = self._priorities[:self.size] ** beta
        return powered / powered.sum()

    def _cumulative(self, beta):
        if self._cum_cache is None or self._cum_cache[0] != beta:
            powered = self._priorities[:self.size] ** beta
            self._cum_cache = (beta, np.cumsum(powered))
        return self._cum_cache[1]

    def sample(self, batch_size, beta):
        """Draw ``batch_size`` transitions with replacement according to P(i)."""
        if beta < 0.0:
            raise ValueError("beta must be >= 0")
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        cum = self._cumulative(beta)
        draws = self._rng.random(batch_size) * cum[-1]
        idx = np.searchsorted(cum, draws, side="right")
        np.minimum(idx, self.size - 1, out=idx)  # guard the draw==total rounding edge
        return Batch(
            states=self._states[idx].copy(),
            actions=self._actions[idx].copy(),
            rewards=self._rewards[idx].copy(),
            next_states=self._next_states[idx].copy(),
            dones=self._dones[idx].copy(),
            mc_returns=self._mc_returns[idx].copy(),
            indices=idx,
        )

    def sample_uniform_states(self, batch_size, rng):
        """Uniform draw of stored (state, action) rows for diagnostics; read-only."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return self._states[idx].copy(), self._actions[idx].copy()
