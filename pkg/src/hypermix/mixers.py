"""Joint-value mixing heads: additive, state-conditioned monotone, and
hypergraph-convolution variants.

All heads consume the per-agent chosen-action values for a batch of samples
and produce one joint value per sample. The state-conditioned head generates
its mixing weights from the global state through hypernetworks and takes
their absolute value, so the joint value is nondecreasing in every agent
value and the individual-global-max property holds by construction. The
hypergraph variants first pass the agent values through two convolution
layers whose incidence matrix is generated from the current observations
("hgcn-mix") or fixed to the identity ("hgcn-mix-oh", which reduces exactly
to the plain state-conditioned head).
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product

import numpy as np

from .autodiff import (Var, absval, add, concat_cols, elu, matmul, mul,
                       reduce_sum, select_rows)
from .errors import ConfigError
from .hypergraph import (Hypergraph, _tiled_eye, build_hypergraph,
                         build_hypergraph_rows, hgcn_transform,
                         hgcn_transform_rows, onehot_hypergraph)
from .nn import LayerSpec, ParameterStore, init_params, linear_fwd, mlp_fwd
from .rng import Rng

MIXER_KINDS = ("vdn", "qmix", "hgcn-mix", "hgcn-mix-oh")


@lru_cache(maxsize=64)
def _ones(rows: int, cols: int = 1) -> np.ndarray:
    return np.ones((rows, cols))


@lru_cache(maxsize=64)
def _eye(n: int) -> np.ndarray:
    return np.eye(n)


@lru_cache(maxsize=64)
def _col_selector(n: int, i: int) -> np.ndarray:
    e = np.zeros((n, 1))
    e[i, 0] = 1.0
    return e


@lru_cache(maxsize=256)
def _block_selector(n: int, embed: int, i: int) -> np.ndarray:
    # picks columns [i*embed, (i+1)*embed) out of a flattened (n, embed) row
    sel = np.zeros((n * embed, embed))
    sel[i * embed:(i + 1) * embed, :] = np.eye(embed)
    return sel


def validate_mixer_kind(kind: str) -> str:
    if kind not in MIXER_KINDS:
        raise ConfigError(f"unknown mixer kind {kind!r}, expected one of {MIXER_KINDS}")
    return kind


def init_mixer_params(store: ParameterStore, kind: str, n_agents: int,
                      obs_dim: int, state_dim: int, rng: Rng,
                      hyperedges: int = 32, embed: int = 32,
                      hypernet_hidden: int = 64) -> None:
    """Add all parameters the given mixer kind needs.

    Edge weights start at one (an unweighted hypergraph); the hypernetworks
    follow the usual uniform fan-in initialization.
    """
    validate_mixer_kind(kind)
    if kind == "vdn":
        return
    hh = hypernet_hidden
    init_params(store, "mix.hyper_w1",
                LayerSpec("mlp", state_dim, n_agents * embed, hh, "relu"), rng)
    init_params(store, "mix.hyper_b1", LayerSpec("linear", state_dim, embed), rng)
    init_params(store, "mix.hyper_w2",
                LayerSpec("mlp", state_dim, embed, hh, "relu"), rng)
    init_params(store, "mix.v", LayerSpec("mlp", state_dim, 1, hh, "relu"), rng)
    if kind == "hgcn-mix":
        init_params(store, "mix.gen", LayerSpec("linear", obs_dim, hyperedges), rng)
        edges = hyperedges + n_agents
    elif kind == "hgcn-mix-oh":
        edges = n_agents
    else:
        return
    store.add("mix.edge_w1", np.ones((edges, 1)))
    store.add("mix.edge_w2", np.ones((edges, 1)))


def vdn_mix(q_rows) -> Var:
    """Additive joint value: row-wise sum of agent values (S x n) -> (S x 1)."""
    q_rows = q_rows if isinstance(q_rows, Var) else Var(q_rows)
    return matmul(q_rows, _ones(q_rows.value.shape[1]))


def state_module(q_rows, s, pv: dict[str, Var], n_agents: int, embed: int) -> Var:
    """State-conditioned monotone head: (S x n) agent values -> (S x 1) joint.

    hidden = elu(|W1(s)|^T q + b1(s)); out = |W2(s)|^T hidden + V(s), with
    W1, W2 generated from the state and made nonnegative via abs.
    """
    q_rows = q_rows if isinstance(q_rows, Var) else Var(q_rows)
    w1 = absval(mlp_fwd(s, pv, "mix.hyper_w1"))   # S x (n*embed)
    b1 = linear_fwd(s, pv, "mix.hyper_b1")        # S x embed
    w2 = absval(mlp_fwd(s, pv, "mix.hyper_w2"))   # S x embed
    v = mlp_fwd(s, pv, "mix.v")                   # S x 1
    acc = None
    for i in range(n_agents):
        block = matmul(w1, _block_selector(n_agents, embed, i))
        qi = matmul(q_rows, _col_selector(n_agents, i))
        term = mul(block, qi)
        acc = term if acc is None else add(acc, term)
    hidden = elu(add(acc, b1))
    return add(matmul(mul(w2, hidden), _ones(embed)), v)


def _as_row(q) -> Var:
    """Normalize an n-vector (row, column, or 1-D) to a (1, n) row."""
    q = q if isinstance(q, Var) else Var(q)
    if q.value.shape[0] == 1:
        return q
    return matmul(_eye(1), q, transpose_b=True)


def fold_agents(chosen: Var, n_samples: int, n_agents: int) -> Var:
    """Reshape stacked per-agent values (S*n x 1) into sample rows (S x n)."""
    cols = [select_rows(chosen, np.arange(a, n_samples * n_agents, n_agents))
            for a in range(n_agents)]
    return concat_cols(*cols)


def hgcn_mix(q, Z, s, pv: dict[str, Var], n_agents: int, embed: int,
             onehot: bool = False) -> tuple[Var, Hypergraph]:
    """Full hypergraph head for a single sample.

    Builds the incidence matrix from observations Z (or the identity for the
    one-hot ablation), convolves the agent values, then applies the
    state-conditioned head. Returns (joint value 1x1, hypergraph).
    """
    q = q if isinstance(q, Var) else Var(q)
    if q.value.shape[1] != 1:
        q = matmul(q, _eye(q.value.shape[1]), transpose_a=True) if q.value.shape[0] == 1 else q
    if onehot:
        hg = onehot_hypergraph(n_agents)
    else:
        hg = build_hypergraph(Z, pv["mix.gen.w"], pv["mix.gen.b"])
    qp = hgcn_transform(q, hg.H, pv["mix.edge_w1"], pv["mix.edge_w2"])
    qtot = state_module(_as_row(qp), s, pv, n_agents, embed)
    return qtot, hg


def mix_batch(kind: str, pv: dict[str, Var], chosen: Var, Z: np.ndarray,
              s: np.ndarray, n_agents: int, embed: int,
              collect_h: bool = False):
    """Joint values for a batch of samples.

    ``chosen`` stacks per-agent chosen-action values as (S*n x 1) rows in
    sample-major order; ``Z`` stacks the matching observations (S*n x d_obs)
    and ``s`` the global states (S x d_state). Returns (S x 1 joint values,
    incidence matrices per sample or None).
    """
    s = np.asarray(s, dtype=np.float64)
    n_samples = s.shape[0]
    if kind == "vdn":
        return vdn_mix(fold_agents(chosen, n_samples, n_agents)), None
    if kind == "qmix":
        q_rows = fold_agents(chosen, n_samples, n_agents)
        return state_module(q_rows, s, pv, n_agents, embed), None
    validate_mixer_kind(kind)
    if kind == "hgcn-mix-oh":
        h_rows = Var(_tiled_eye(n_samples, n_agents))
    else:
        z_rows = np.asarray(Z, dtype=np.float64)
        h_rows, _ = build_hypergraph_rows(Var(z_rows), pv["mix.gen.w"],
                                          pv["mix.gen.b"], n_samples, n_agents)
    qp = hgcn_transform_rows(chosen, h_rows, pv["mix.edge_w1"],
                             pv["mix.edge_w2"], n_samples, n_agents)
    hs = None
    if collect_h:
        hs = [h_rows.value[e * n_agents:(e + 1) * n_agents]
              for e in range(n_samples)]
    q_rows = fold_agents(qp, n_samples, n_agents)
    return state_module(q_rows, s, pv, n_agents, embed), hs


def make_qtot_fn(kind: str, store: ParameterStore, Z, s, n_agents: int,
                 embed: int):
    """Forward-only joint-value evaluator for fixed parameters and context.

    Returns a callable mapping an n-vector of chosen agent values to a float.
    """
    validate_mixer_kind(kind)
    pv = store.bind(None)
    Z = np.asarray(Z, dtype=np.float64) if Z is not None else None
    s = np.asarray(np.atleast_2d(s), dtype=np.float64) if s is not None else None

    def qtot(chosen) -> float:
        col = Var(np.asarray(chosen, dtype=np.float64).reshape(-1, 1))
        if kind == "vdn":
            out = vdn_mix(_as_row(col))
        elif kind == "qmix":
            out = state_module(_as_row(col), s, pv, n_agents, embed)
        else:
            out, _ = hgcn_mix(col, Z, s, pv, n_agents, embed,
                              onehot=kind == "hgcn-mix-oh")
        return float(out.value[0, 0])

    return qtot


def igm_check(qtot_fn, q_tables: np.ndarray, tol: float = 1e-9,
              max_joint: int = 1_000_000) -> bool:
    """Exhaustively verify the individual-global-max property.

    True iff the joint value at the tuple of per-agent argmaxes is within
    ``tol`` of the maximum over every joint action. Refuses joint spaces
    larger than ``max_joint``.
    """
    q_tables = np.asarray(q_tables, dtype=np.float64)
    n, n_actions = q_tables.shape
    if n_actions ** n > max_joint:
        raise ValueError(
            f"igm_check: joint space {n_actions}^{n} exceeds {max_joint}"
        )
    greedy = q_tables.argmax(axis=1)
    value_at_greedy = qtot_fn(q_tables[np.arange(n), greedy])
    best = -np.inf
    for joint in product(range(n_actions), repeat=n):
        best = max(best, qtot_fn(q_tables[np.arange(n), joint]))
    return value_at_greedy >= best - tol
