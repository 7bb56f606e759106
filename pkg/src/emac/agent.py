"""Actor-critic agent with an episodic term blended into the critic objective.

The critic minimizes, per sample,

    (1 - alpha) * (Q(s,a) - Q')^2 + alpha * (Q(s,a) - Q_M)^2

where Q' is the one-step bootstrapped target from slowly-tracking target
networks and Q_M is the episodic estimate retrieved from memory. The actor
ascends the critic: its loss is -mean Q(s, pi(s)), differentiated through the
critic's action input. At alpha = 0 all of this reduces exactly to the plain
deterministic-policy-gradient baseline; the episodic term contributes nothing,
bit for bit.

Target networks exist for both actor and critic (the bootstrap samples the
target actor's action) and track the online networks by tau-proportional soft
updates after every optimization step. Natural termination zeroes the
bootstrap; time-limit cuts do not.
"""

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from . import nets

DEFAULT_HIDDEN = (256, 256)


class TrainingDiverged(RuntimeError):
    """An update produced a non-finite loss or gradient."""


@dataclass
class AgentConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    tau: float = 0.005
    k: int = 2
    exploration_noise_std: float = 0.2   # absolute, in action units
    batch_size: int = 128
    warmup_steps: int = 1000
    lr: float = 1e-3
    hidden_sizes: tuple = DEFAULT_HIDDEN

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.exploration_noise_std < 0.0:
            raise ValueError("exploration noise std must be >= 0")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)


@dataclass
class UpdateDiagnostics:
    critic_loss: float
    actor_loss: float
    q_mean: float
    q_mem_mean: float


_AGENT_MAGIC = b"EMAC"


class EmacAgent:
    """Actor, critic, their targets, and one ``update`` step."""

    def __init__(self, obs_dim, act_dim, action_bound, config, init_rng,
                 warmup_rng=None, noise_rng=None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.action_bound = float(action_bound)
        self.config = config
        hidden = list(config.hidden_sizes)
        self.actor = nets.Mlp.create(
            [obs_dim] + hidden + [act_dim], init_rng,
            output_activation="tanh", output_scale=self.action_bound)
        self.critic = nets.Mlp.create(
            [obs_dim + act_dim] + hidden + [1], init_rng,
            output_activation="identity")
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = nets.Adam(self.actor)
        self.critic_opt = nets.Adam(self.critic)
        self.env_steps = 0
        self._warmup_rng = warmup_rng
        self._noise_rng = noise_rng

    # -- acting ---------------------------------------------------------------
    def select_action(self, obs, explore):
        """Policy action; exploration adds noise, warmup samples the action box."""
        if explore:
            rng = self._warmup_rng if self.env_steps < self.config.warmup_steps \
                else self._noise_rng
            return self.behavior_action(obs, rng)
        return self.actor.forward(np.asarray(obs, dtype=np.float64))

    def behavior_action(self, obs, rng):
        """The exploration policy driven by an external RNG.

        Used by return-correction rollouts, which continue a truncated episode
        under the same action distribution that generated it without consuming
        the training streams.
        """
        if self.env_steps < self.config.warmup_steps:
            return rng.uniform(-self.action_bound, self.action_bound,
                               size=self.act_dim)
        action = self.actor.forward(np.asarray(obs, dtype=np.float64))
        if self.config.exploration_noise_std > 0.0:
            action = action + rng.normal(
                0.0, self.config.exploration_noise_std, size=self.act_dim)
        return np.clip(action, -self.action_bound, self.action_bound)

    def policy_batch(self, obs_batch):
        """Deterministic policy on a batch of observations (no exploration)."""
        return self.actor.forward(obs_batch)

    def note_env_step(self):
        self.env_steps += 1

    # -- losses ----------------------------------------------------------------
    def compute_td_targets(self, batch):
        """Bootstrapped targets r + gamma * (1 - done) * Q_tgt(s', pi_tgt(s'))."""
        next_actions = self.target_actor.forward(batch.next_states)
        next_q = self.target_critic.forward(
            np.concatenate([batch.next_states, next_actions], axis=1))[:, 0]
        return batch.rewards + self.config.gamma * (1.0 - batch.dones) * next_q

    def critic_loss(self, batch, q_mem):
        """Blended critic objective; returns (loss, grads, mean Q).

        ``q_mem`` may be None when alpha is exactly 0 (the episodic term
        vanishes identically and the lookup can be skipped).
        """
        alpha = self.config.alpha
        if q_mem is None:
            if alpha != 0.0:
                raise ValueError("q_mem is required when alpha is nonzero")
            q_mem = 0.0
        td = self.compute_td_targets(batch)
        sa = np.concatenate([batch.states, batch.actions], axis=1)
        q, cache = self.critic.forward_cached(sa)
        q = q[:, 0]
        err_td = q - td
        err_mem = q - q_mem
        n = len(batch)
        loss = float(np.mean((1.0 - alpha) * err_td ** 2 + alpha * err_mem ** 2))
        dq = 2.0 * ((1.0 - alpha) * err_td + alpha * err_mem) / n
        grads, _ = nets.backward(self.critic, cache, dq[:, None])
        return loss, grads, float(q.mean())

    def actor_loss(self, batch):
        """Deterministic policy gradient: loss is -mean Q(s, pi(s))."""
        actions, actor_cache = self.actor.forward_cached(batch.states)
        sa = np.concatenate([batch.states, actions], axis=1)
        q, critic_cache = self.critic.forward_cached(sa)
        loss = float(-q.mean())
        n = len(batch)
        dq = np.full((n, 1), -1.0 / n)
        _, d_sa = nets.backward(self.critic, critic_cache, dq, need_param_grads=False)
        d_actions = d_sa[:, self.obs_dim:]
        grads, _ = nets.backward(self.actor, actor_cache, d_actions)
        return loss, grads

    # -- one optimization step ---------------------------------------------------
    def update(self, batch, q_mem=None):
        """Critic step on the blended loss, actor step, then soft target updates."""
        try:
            closs, cgrads, q_mean = self.critic_loss(batch, q_mem)
            if not np.isfinite(closs):
                raise TrainingDiverged(f"critic loss is {closs}")
            self.critic_opt.step(self.critic, cgrads, self.config.lr)
            aloss, agrads = self.actor_loss(batch)
            if not np.isfinite(aloss):
                raise TrainingDiverged(f"actor loss is {aloss}")
            self.actor_opt.step(self.actor, agrads, self.config.lr)
        except FloatingPointError as exc:
            raise TrainingDiverged(str(exc)) from exc
        nets.soft_update(self.target_critic, self.critic, self.config.tau)
        nets.soft_update(self.target_actor, self.actor, self.config.tau)
        q_mem_mean = float(np.mean(q_mem)) if q_mem is not None else float("nan")
        return UpdateDiagnostics(closs, aloss, q_mean, q_mem_mean)

    # -- checkpointing ---------------------------------------------------------
    def save(self, path):
        """Checkpoint: JSON header (dims + config) then the four network blobs."""
        header = json.dumps({
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "action_bound": self.action_bound,
            "env_steps": self.env_steps,
            "config": asdict(self.config),
        }, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_AGENT_MAGIC)
            fh.write(struct.pack("<i", len(header)))
            fh.write(header)
            for net in (self.actor, self.critic, self.target_actor, self.target_critic):
                blob = nets.dump_params(net)
                fh.write(struct.pack("<q", len(blob)))
                fh.write(blob)

    @classmethod
    def load(cls, path, warmup_rng=None, noise_rng=None):
        with open(path, "rb") as fh:
            if fh.read(4) != _AGENT_MAGIC:
                raise ValueError("not an agent checkpoint")
            (hlen,) = struct.unpack("<i", fh.read(4))
            header = json.loads(fh.read(hlen).decode())
            cfg_dict = header["config"]
            cfg_dict["hidden_sizes"] = tuple(cfg_dict["hidden_sizes"])
            config = AgentConfig(**cfg_dict)
            agent = cls(header["obs_dim"], header["act_dim"], header["action_bound"],
                        config, init_rng=np.random.default_rng(0),
                        warmup_rng=warmup_rng, noise_rng=noise_rng)
            agent.env_steps = header["env_steps"]
            for net in (agent.actor, agent.critic, agent.target_actor, agent.target_critic):
                (blen,) = struct.unpack("<q", fh.read(8))
                nets.load_params(net, fh.read(blen))
        return agent
