"""Per-agent recurrent Q-networks, action selection, and dead-agent masking.

One parameter-shared network serves all agents; each agent's input row is
its own observation, its previous action one-hot (zeros at episode start),
and its agent-id one-hot. Execution stays decentralized: action selection
sees a single agent's value row and availability mask only.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Var, relu
from .errors import ContractError
from .nn import LayerSpec, ParameterStore, gru_fwd, init_params, linear_fwd
from .rng import Rng


def agent_input_dim(obs_dim: int, n_actions: int, n_agents: int) -> int:
    return obs_dim + n_actions + n_agents


def init_agent_params(store: ParameterStore, obs_dim: int, n_actions: int,
                      n_agents: int, rng: Rng, hidden: int = 64,
                      prefix: str = "agent") -> None:
    d_in = agent_input_dim(obs_dim, n_actions, n_agents)
    init_params(store, f"{prefix}.fc1", LayerSpec("linear", d_in, hidden), rng)
    init_params(store, f"{prefix}.rnn", LayerSpec("gru-cell", hidden, hidden), rng)
    init_params(store, f"{prefix}.fc2", LayerSpec("linear", hidden, n_actions), rng)


def agent_forward(pv: dict[str, Var], inputs, hidden, prefix: str = "agent"):
    """One recurrent step for a row batch of agent inputs.

    Returns (q_values, new_hidden); rows may stack any number of agents
    and batch entries since the network is shared.
    """
    x = relu(linear_fwd(inputs, pv, f"{prefix}.fc1"))
    h = gru_fwd(x, hidden, pv, f"{prefix}.rnn")
    q = linear_fwd(h, pv, f"{prefix}.fc2")
    return q, h


def initial_hidden(rows: int, hidden: int = 64) -> np.ndarray:
    """Zero GRU state for the start of an episode."""
    return np.zeros((rows, hidden))


def build_agent_inputs(obs: np.ndarray, last_actions, n_actions: int) -> np.ndarray:
    """Stack per-agent input rows: obs ++ last-action one-hot ++ id one-hot.

    ``last_actions`` holds ints, or None for the first step of an episode.
    """
    obs = np.asarray(obs, dtype=np.float64)
    n = obs.shape[0]
    out = np.zeros((n, obs.shape[1] + n_actions + n))
    out[:, :obs.shape[1]] = obs
    for a in range(n):
        la = last_actions[a] if last_actions is not None else None
        if la is not None:
            out[a, obs.shape[1] + int(la)] = 1.0
        out[a, obs.shape[1] + n_actions + a] = 1.0
    return out


def select_action(q_values: np.ndarray, avail: np.ndarray, epsilon: float,
                  rng: Rng) -> int:
    """Epsilon-greedy over available actions; greedy ties break to lowest index."""
    q_values = np.asarray(q_values, dtype=np.float64).ravel()
    avail = np.asarray(avail, dtype=bool).ravel()
    candidates = np.flatnonzero(avail)
    if candidates.size == 0:
        raise ContractError("no available action for agent")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(candidates[rng.integers(candidates.size)])
    masked = np.where(avail, q_values, -np.inf)
    return int(np.argmax(masked))


def greedy_actions(q_rows: np.ndarray, avail_rows: np.ndarray) -> np.ndarray:
    """Row-wise greedy action indices under availability masks."""
    masked = np.where(np.asarray(avail_rows, dtype=bool),
                      np.asarray(q_rows, dtype=np.float64), -np.inf)
    return masked.argmax(axis=1)


def mask_dead_agent(obs: np.ndarray) -> np.ndarray:
    """Replace a dead/frozen agent's observation with the fixed mask value -1."""
    return np.full_like(np.asarray(obs, dtype=np.float64), -1.0)
