"""Run orchestration: the training loop, evaluation, sweeps, and artifacts.

A run owns one master seed per trial and spawns a fixed set of named RNG
substreams from it (network init, projection matrix, environment resets,
warmup actions, exploration noise, replay sampling, evaluation, diagnostics,
truncation-extension rollouts). The spawn order never depends on
configuration, so toggling one feature (for example diagnostics) cannot shift
any other stream, and two runs with the same seed and config are bitwise
identical.

Artifacts are written incrementally with a flush per row, so an interrupted
run always leaves a valid prefix on disk.
"""

import dataclasses
import json
from pathlib import Path

import numpy as np

from . import diagnostics
from .agent import AgentConfig, EmacAgent
from .config import RunConfig, SWEEPABLE_FIELDS
from .envs import env_class, make_env
from .memory import EpisodicMemory, GaussianProjection
from .replay import PrioritizedReplay, Transition, finalize_episode

STREAM_NAMES = ("init", "projection", "env", "warmup", "noise",
                "sampling", "eval", "diag", "extension")

CURVE_HEADER = "step,eval_return_mean,eval_return_std"
DIAG_HEADER = "step,q_pred,q_true,q_mem"

_SEED_BOUND = 2 ** 63 - 1


def spawn_streams(seed):
    """Named, mutually independent RNG substreams for one trial."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child)
            for name, child in zip(STREAM_NAMES, children)}


def _fmt(x):
    """Full 64-bit round-trip decimal representation."""
    return repr(float(x))


@dataclasses.dataclass
class SeedResult:
    seed: int
    curve: list                 # (step, eval mean, eval std) rows
    diag: list                  # OverestimationSample rows
    final_eval_mean: float
    final10_mean: float         # mean over the last up-to-10 evaluation rows


@dataclasses.dataclass
class RunArtifacts:
    config: RunConfig           # resolved echo
    seed_results: list
    summary: dict


def evaluate(agent, env_name, episodes, rng):
    """Mean and std of undiscounted returns over fresh evaluation episodes.

    Episodes run the deterministic policy (no exploration) in lockstep as a
    batch over the pure dynamics; nothing is stored anywhere. The batched
    rollout follows exactly the stepped-environment math.
    """
    env_cls = env_class(env_name)
    seeds = [int(s) for s in rng.integers(0, _SEED_BOUND, size=episodes)]
    states = np.stack([env_cls.initial_state(np.random.default_rng(s)) for s in seeds])
    returns = np.zeros(episodes)
    alive = np.ones(episodes, dtype=bool)
    for _ in range(env_cls.SPEC.time_limit):
        actions = agent.policy_batch(env_cls.observe(states))
        states, rewards, dones = env_cls.transition(states, actions)
        returns += np.where(alive, rewards, 0.0)
        alive &= ~np.asarray(dones, dtype=bool)
        if not alive.any():
            break
    return float(returns.mean()), float(returns.std())


def run_seed(config, seed, out_dir, verbose=False):
    """Train one trial and stream its artifacts into ``out_dir``."""
    config = config.resolved()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = spawn_streams(seed)

    env = make_env(config.env)
    spec = env.SPEC
    obs_dim, act_dim = spec.observation_dim, spec.action_dim
    projection = GaussianProjection(obs_dim + act_dim, config.u, streams["projection"])
    memory = EpisodicMemory(config.u, config.memory_capacity,
                            epsilon=config.epsilon, overflow=config.memory_overflow)
    replay = PrioritizedReplay(obs_dim, act_dim, config.memory_capacity,
                               streams["sampling"], memory=memory,
                               projection=projection, overflow=config.memory_overflow)
    agent = EmacAgent(
        obs_dim, act_dim, spec.action_bound,
        AgentConfig(alpha=config.alpha, gamma=config.gamma, tau=config.tau,
                    k=config.k,
                    exploration_noise_std=config.noise_std * spec.action_bound,
                    batch_size=config.batch_size, warmup_steps=config.warmup_steps,
                    lr=config.lr),
        init_rng=streams["init"], warmup_rng=streams["warmup"],
        noise_rng=streams["noise"])

    # Truncated episodes are continued under the behavior policy (same action
    # distribution that generated them) so the return tail is an unbiased
    # Monte-Carlo continuation; a dedicated stream keeps training untouched.
    extension_policy = lambda o: agent.behavior_action(o, streams["extension"])
    curve_rows, diag_rows = [], []
    curve_file = open(out_dir / "curve.csv", "w", newline="")
    diag_file = None
    try:
        curve_file.write(CURVE_HEADER + "\n")
        curve_file.flush()
        if config.diag_every:
            diag_file = open(out_dir / "diagnostics.csv", "w", newline="")
            diag_file.write(DIAG_HEADER + "\n")
            diag_file.flush()

        episode = []
        obs = env.reset(int(streams["env"].integers(0, _SEED_BOUND)))
        for step in range(1, config.total_steps + 1):
            action = agent.select_action(obs, explore=True)
            result = env.step(action)
            episode.append(Transition(obs, action, result.reward,
                                      result.observation, result.done))
            agent.note_env_step()
            obs = result.observation

            if result.done or result.truncated:
                if result.truncated:
                    ext = env.rollout_extension(extension_policy,
                                                config.extension_horizon)
                    finalize_episode(episode, config.gamma, ext)
                else:
                    finalize_episode(episode, config.gamma)
                replay.push_finalized(episode)
                episode = []
                obs = env.reset(int(streams["env"].integers(0, _SEED_BOUND)))

            if step > config.warmup_steps and replay.size >= config.batch_size:
                batch = replay.sample(config.batch_size, config.beta)
                q_mem = None
                if config.alpha != 0.0:
                    keys = projection(np.concatenate([batch.states, batch.actions], axis=1))
                    q_mem = memory.batch_lookup(keys, config.k)
                agent.update(batch, q_mem)

            if step % config.eval_every == 0:
                mean, std = evaluate(agent, config.env, config.eval_episodes,
                                     streams["eval"])
                curve_rows.append((step, mean, std))
                curve_file.write(f"{step},{_fmt(mean)},{_fmt(std)}\n")
                curve_file.flush()
                if verbose:
                    print(f"[{config.env} seed {seed}] step {step}: "
                          f"eval return {mean:.1f} +- {std:.1f}", flush=True)

            if (config.diag_every and step % config.diag_every == 0
                    and replay.size >= max(config.k, 1)):
                sample = diagnostics.measure(
                    agent, replay, memory, projection, config.env, step,
                    streams["diag"], max_steps=config.diag_max_steps)
                diag_rows.append(sample)
                diag_file.write(f"{sample.step},{_fmt(sample.q_pred_mean)},"
                                f"{_fmt(sample.q_true_mean)},{_fmt(sample.q_mem_mean)}\n")
                diag_file.flush()
    finally:
        curve_file.close()
        if diag_file is not None:
            diag_file.close()

    if curve_rows:
        final_eval = curve_rows[-1][1]
        final10 = float(np.mean([r[1] for r in curve_rows[-10:]]))
    else:
        final_eval = float("nan")
        final10 = float("nan")
    return SeedResult(seed=seed, curve=curve_rows, diag=diag_rows,
                      final_eval_mean=final_eval, final10_mean=final10)


def run(config, out_dir, verbose=False):
    """Execute a config over all its seeds; write artifacts under ``out_dir``.

    Single-seed runs place ``curve.csv`` (and ``diagnostics.csv``) directly in
    ``out_dir``; multi-seed runs use one ``seed_<n>/`` directory per trial.
    ``config.json`` echoes the resolved configuration; ``summary.json`` holds
    per-seed finals and their mean/std across seeds.
    """
    config = config.resolved()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(config.to_json())

    results = []
    for seed in config.seeds:
        seed_dir = out_dir if len(config.seeds) == 1 else out_dir / f"seed_{seed}"
        results.append(run_seed(config, seed, seed_dir, verbose=verbose))

    final10 = np.array([r.final10_mean for r in results])
    summary = {
        "env": config.env,
        "seeds": list(config.seeds),
        "per_seed": {
            str(r.seed): {"final_eval_mean": r.final_eval_mean,
                          "final10_mean": r.final10_mean}
            for r in results
        },
        "final10_mean_over_seeds": float(final10.mean()),
        "final10_std_over_seeds": float(final10.std()),
        "config": config.to_dict(),
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return RunArtifacts(config=config, seed_results=results, summary=summary)


def sweep(config, axis, values, out_root, verbose=False):
    """Independent runs along one config axis, sharing the base seeds.

    Writes each run under ``<out_root>/<axis>_<value>/`` plus a combined
    ``comparison.csv`` table.
    """
    if axis not in SWEEPABLE_FIELDS:
        raise ValueError(f"axis {axis!r} is not sweepable; choose from "
                         f"{sorted(SWEEPABLE_FIELDS)}")
    if not values:
        raise ValueError("sweep needs at least one value")
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    artifacts = []
    rows = []
    for value in values:
        cfg = config.replace(**{axis: value})
        art = run(cfg, out_root / f"{axis}_{value}", verbose=verbose)
        artifacts.append(art)
        for res in art.seed_results:
            rows.append((value, res.seed, res.final10_mean, res.final_eval_mean))
    with open(out_root / "comparison.csv", "w", newline="") as fh:
        fh.write(f"{axis},seed,final10_mean,final_eval_mean\n")
        for value, seed, f10, fe in rows:
            fh.write(f"{value},{seed},{_fmt(f10)},{_fmt(fe)}\n")
    return artifacts
