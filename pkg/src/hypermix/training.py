"""Episode collection, replay, TD training, and the seeded run loop.

Training is centralized: the mixer sees global states and all agent values.
Execution stays decentralized: during collection each agent's action depends
only on its own observation history. Targets use a frozen parameter copy and
realize the max over joint actions through per-agent greedy actions, which
is exact for mixers satisfying the individual-global-max property.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import agents as ag
from . import mixers as mx
from .autodiff import Tape, Var, add, gradient, matmul, mul, reduce_sum, select_rows
from .envs import brute_force_optimal, make_env
from .errors import TrainingError
from .nn import (ParameterStore, clip_grad_norm, rmsprop_step, save_checkpoint)
from .rng import Rng


@dataclass(frozen=True)
class Schedule:
    """Linear exploration annealing over environment steps."""

    eps_start: float = 1.0
    eps_end: float = 0.05
    anneal_steps: int = 50_000

    def value(self, t: int) -> float:
        if t >= self.anneal_steps:
            return self.eps_end
        frac = t / self.anneal_steps
        return self.eps_start + (self.eps_end - self.eps_start) * frac


def epsilon(t: int, schedule: Schedule = Schedule()) -> float:
    """Exploration rate after ``t`` environment steps."""
    return schedule.value(t)


@dataclass
class Episode:
    """One rollout with a trailing observation slot for bootstrapping.

    Slots beyond ``length`` stay zero; ``length`` is the validity mask.
    """

    obs: np.ndarray          # (T+1, n, obs_dim)
    state: np.ndarray        # (T+1, state_dim)
    avail: np.ndarray        # (T+1, n, n_actions) bool
    actions: np.ndarray      # (T, n) int
    reward: np.ndarray       # (T,)
    terminated: np.ndarray   # (T,) bool
    length: int

    @classmethod
    def empty(cls, limit: int, n: int, obs_dim: int, state_dim: int,
              n_actions: int) -> "Episode":
        return cls(
            obs=np.zeros((limit + 1, n, obs_dim)),
            state=np.zeros((limit + 1, state_dim)),
            avail=np.zeros((limit + 1, n, n_actions), dtype=bool),
            actions=np.zeros((limit, n), dtype=np.intp),
            reward=np.zeros(limit),
            terminated=np.zeros(limit, dtype=bool),
            length=0,
        )

    @property
    def episode_return(self) -> float:
        return float(self.reward[:self.length].sum())


class ReplayBuffer:
    """Ring buffer of episodes with uniform without-replacement sampling."""

    def __init__(self, capacity: int = 5000):
        self.capacity = capacity
        self._episodes: list[Episode] = []
        self._next = 0
        self.inserted = 0

    def add(self, episode: Episode) -> None:
        if len(self._episodes) < self.capacity:
            self._episodes.append(episode)
        else:
            self._episodes[self._next] = episode
        self._next = (self._next + 1) % self.capacity
        self.inserted += 1

    def __len__(self) -> int:
        return len(self._episodes)

    def sample(self, batch_size: int, rng: Rng) -> list[Episode]:
        if batch_size > len(self._episodes):
            raise ValueError("not enough episodes buffered")
        idx = rng.sample_without_replacement(len(self._episodes), batch_size)
        return [self._episodes[i] for i in idx]


def collect_episode(env, store: ParameterStore, eps: float, env_rng: Rng,
                    explore_rng: Rng, agent_hidden: int = 64) -> Episode:
    """Roll one episode; each agent acts from its own inputs only."""
    spec = env.spec
    ep = Episode.empty(spec.episode_limit, spec.n_agents, spec.obs_dim,
                       spec.state_dim, spec.n_actions)
    pv = store.bind(None)
    obs, state = env.reset(env_rng)
    avail = env.avail_actions()
    hidden = ag.initial_hidden(spec.n_agents, agent_hidden)
    last_actions = None
    t = 0
    while True:
        ep.obs[t] = obs
        ep.state[t] = state
        ep.avail[t] = avail
        inputs = ag.build_agent_inputs(obs, last_actions, spec.n_actions)
        q, hidden = ag.agent_forward(pv, Var(inputs), hidden)
        actions = [ag.select_action(q.value[a], avail[a], eps, explore_rng)
                   for a in range(spec.n_agents)]
        res = env.step(actions)
        ep.actions[t] = actions
        ep.reward[t] = res.reward
        ep.terminated[t] = res.terminated
        last_actions = actions
        obs, state, avail = res.obs, res.state, res.avail
        t += 1
        if res.terminated or t >= spec.episode_limit:
            break
    ep.obs[t] = obs
    ep.state[t] = state
    ep.avail[t] = avail
    ep.length = t
    return ep


def _batch_inputs(batch: list[Episode], t: int, n_actions: int) -> np.ndarray:
    """Stacked agent input rows for step t across the batch (zero-padded)."""
    n = batch[0].obs.shape[1]
    obs_dim = batch[0].obs.shape[2]
    out = np.zeros((len(batch) * n, obs_dim + n_actions + n))
    agent_ids = np.tile(np.arange(n), len(batch))
    out[np.arange(len(batch) * n), obs_dim + n_actions + agent_ids] = 1.0
    for e, ep in enumerate(batch):
        rows = slice(e * n, (e + 1) * n)
        out[rows, :obs_dim] = ep.obs[t]
        if 0 < t <= ep.length:
            out[np.arange(e * n, (e + 1) * n),
                obs_dim + ep.actions[t - 1]] = 1.0
    return out


def td_targets(batch: list[Episode], target_store: ParameterStore, kind: str,
               gamma: float, embed: int, agent_hidden: int = 64) -> list[np.ndarray]:
    """One-step TD targets per episode, using the frozen target parameters.

    Terminal steps take the raw reward; other steps bootstrap from the
    target joint value at the per-agent greedy actions of the next step.
    """
    n = batch[0].obs.shape[1]
    n_actions = batch[0].avail.shape[2]
    t_max = max(ep.length for ep in batch)
    pv = target_store.bind(None)
    hidden = ag.initial_hidden(len(batch) * n, agent_hidden)
    next_qtot = np.zeros((len(batch), t_max + 1))
    for t in range(t_max + 1):
        inputs = _batch_inputs(batch, t, n_actions)
        q, hidden = ag.agent_forward(pv, Var(inputs), hidden)
        if t == 0:
            continue
        need = [e for e, ep in enumerate(batch) if t <= ep.length]
        if not need:
            break
        rows = np.concatenate([np.arange(e * n, (e + 1) * n) for e in need])
        avail = np.concatenate([ep.avail[t] for ep in (batch[e] for e in need)])
        q_rows = q.value[rows]
        greedy = ag.greedy_actions(q_rows, avail)
        chosen = Var(q_rows[np.arange(rows.size), greedy].reshape(-1, 1))
        Z = np.concatenate([batch[e].obs[t] for e in need], axis=0)
        s = np.stack([batch[e].state[t] for e in need])
        qtot, _ = mx.mix_batch(kind, pv, chosen, Z, s, n, embed)
        next_qtot[need, t] = qtot.value[:, 0]
    targets = []
    for e, ep in enumerate(batch):
        y = np.zeros(ep.length)
        for t in range(ep.length):
            if ep.terminated[t]:
                y[t] = ep.reward[t]
            else:
                y[t] = ep.reward[t] + gamma * next_qtot[e, t + 1]
        targets.append(y)
    return targets


def train_step(batch: list[Episode], store: ParameterStore,
               target_store: ParameterStore, kind: str, gamma: float,
               embed: int, agent_hidden: int = 64, lr: float = 5e-4,
               rms_decay: float = 0.99, rms_eps: float = 1e-5,
               clip_norm: float = 10.0) -> float:
    """One optimization step on a batch of episodes; returns the loss.

    The loss is the mean over valid timesteps of half the squared TD error;
    gradients flow through the agent networks, the hypergraph generator and
    edge weights, and the hypernetworks, but not into the targets.
    """
    targets = td_targets(batch, target_store, kind, gamma, embed, agent_hidden)
    n = batch[0].obs.shape[1]
    n_actions = batch[0].avail.shape[2]
    t_max = max(ep.length for ep in batch)
    n_valid = sum(ep.length for ep in batch)

    tape = Tape()
    pv = store.bind(tape)
    hidden = ag.initial_hidden(len(batch) * n, agent_hidden)
    sq_acc = None
    for t in range(t_max):
        inputs = _batch_inputs(batch, t, n_actions)
        q, hidden = ag.agent_forward(pv, tape.var(inputs), hidden)
        valid = [e for e, ep in enumerate(batch) if t < ep.length]
        if not valid:
            break
        onehot = np.zeros((len(batch) * n, n_actions))
        for e in valid:
            onehot[np.arange(e * n, (e + 1) * n),
                   batch[e].actions[t]] = 1.0
        chosen_all = matmul(mul(q, onehot), np.ones((n_actions, 1)))
        rows = np.concatenate([np.arange(e * n, (e + 1) * n) for e in valid])
        chosen = select_rows(chosen_all, rows)
        Z = np.concatenate([batch[e].obs[t] for e in valid], axis=0)
        s = np.stack([batch[e].state[t] for e in valid])
        qtot, _ = mx.mix_batch(kind, pv, chosen, Z, s, n, embed)
        y = np.array([[targets[e][t]] for e in valid])
        diff = add(qtot, -y)
        sq = reduce_sum(mul(diff, diff))
        sq_acc = sq if sq_acc is None else add(sq_acc, sq)
    loss = mul(sq_acc, np.array([[0.5 / n_valid]]))
    loss_value = float(loss.value[0, 0])
    if not np.isfinite(loss_value):
        raise TrainingError(
            f"non-finite loss {loss_value} (mixer={kind}, batch={len(batch)},"
            f" t_max={t_max})"
        )
    gradient(tape, loss)
    store.zero_grads()
    store.accumulate_grads(pv)
    clip_grad_norm(store, clip_norm)
    rmsprop_step(store, lr=lr, decay=rms_decay, eps=rms_eps)
    return loss_value


def update_target(store: ParameterStore, target_store: ParameterStore) -> None:
    """Hard, bit-exact copy of the online parameters into the target copy."""
    target_store.copy_from(store)


def evaluate_policy(env, store: ParameterStore, episodes: int, rng: Rng,
                    agent_hidden: int = 64, optimal: float | None = None) -> dict:
    """Greedy evaluation: mean return and the rate of optimal-return episodes."""
    if optimal is None:
        optimal = brute_force_optimal(env)
    returns = []
    for k in range(episodes):
        ep = collect_episode(env, store, 0.0, rng.split(f"ep{k}"),
                             rng.split(f"explore{k}"), agent_hidden)
        returns.append(ep.episode_return)
    returns = np.asarray(returns)
    success = float((np.abs(returns - optimal) <= 1e-9).mean())
    return {"mean_return": float(returns.mean()), "success_rate": success}


def init_run_stores(cfg, env, seed: int) -> tuple[ParameterStore, ParameterStore]:
    """Build the online and target parameter stores for one seeded run."""
    rng = Rng(seed).split("init")
    spec = env.spec
    store = ParameterStore()
    ag.init_agent_params(store, spec.obs_dim, spec.n_actions, spec.n_agents,
                         rng.split("agent"), hidden=cfg.agent_hidden)
    mx.init_mixer_params(store, cfg.mixer, spec.n_agents, spec.obs_dim,
                         spec.state_dim, rng.split("mixer"),
                         hyperedges=cfg.hyperedges, embed=cfg.embed,
                         hypernet_hidden=cfg.hypernet_hidden)
    return store, store.clone()


def run_training(cfg, seed: int, out_dir) -> dict:
    """Train one seed to completion; writes metrics.jsonl and a checkpoint.

    Fully deterministic given (config, seed): rerunning into a fresh
    directory reproduces metrics.jsonl byte for byte.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2,
                                                    sort_keys=True))
    env = make_env(cfg.env)
    eval_env = make_env(cfg.env)
    optimal = brute_force_optimal(eval_env)
    store, target_store = init_run_stores(cfg, env, seed)
    root = Rng(seed)
    env_rng = root.split("env")
    explore_rng = root.split("explore")
    buffer_rng = root.split("buffer")
    buffer = ReplayBuffer(cfg.buffer_capacity)
    schedule = Schedule(cfg.eps_start, cfg.eps_end, cfg.anneal_steps)

    env_steps = 0
    train_steps = 0
    eval_count = 0
    losses: list[float] = []
    started = time.time()
    final_stats = None
    metrics_path = out_dir / "metrics.jsonl"
    with metrics_path.open("w") as metrics:
        for episode_idx in range(cfg.episodes):
            eps = schedule.value(env_steps)
            ep = collect_episode(env, store, eps, env_rng, explore_rng,
                                 cfg.agent_hidden)
            buffer.add(ep)
            env_steps += ep.length
            if (len(buffer) >= cfg.batch_size
                    and episode_idx % cfg.train_every == 0):
                batch = buffer.sample(cfg.batch_size, buffer_rng)
                loss = train_step(batch, store, target_store, cfg.mixer,
                                  cfg.gamma, cfg.embed, cfg.agent_hidden,
                                  lr=cfg.lr, rms_decay=cfg.rms_decay,
                                  rms_eps=cfg.rms_eps, clip_norm=cfg.clip_norm)
                losses.append(loss)
                train_steps += 1
                if train_steps % cfg.target_interval == 0:
                    update_target(store, target_store)
            if (episode_idx + 1) % cfg.eval_interval == 0:
                stats = evaluate_policy(eval_env, store, cfg.eval_episodes,
                                        root.split(f"eval{eval_count}"),
                                        cfg.agent_hidden, optimal)
                eval_count += 1
                loss_ma = (float(np.mean(losses[-50:])) if losses else None)
                record = {
                    "step": env_steps,
                    "episode": episode_idx + 1,
                    "mixer": cfg.mixer,
                    "seed": seed,
                    "mean_return": stats["mean_return"],
                    "success_rate": stats["success_rate"],
                    "loss_ma": loss_ma,
                    "epsilon": eps,
                }
                metrics.write(json.dumps(record, sort_keys=True) + "\n")
                final_stats = record
                if cfg.stop_on_success and stats["success_rate"] >= 1.0:
                    break
    save_checkpoint(store, out_dir / "checkpoint")
    return {
        "seed": seed,
        "episodes": episode_idx + 1,
        "env_steps": env_steps,
        "train_steps": train_steps,
        "wall_seconds": time.time() - started,
        "final": final_stats,
        "metrics_path": str(metrics_path),
        "checkpoint": str(out_dir / "checkpoint"),
    }
