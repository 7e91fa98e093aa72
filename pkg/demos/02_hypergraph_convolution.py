"""The observation-generated hypergraph and its convolution, step by step.

Run: python3 demos/02_hypergraph_convolution.py
"""

import numpy as np

from hypermix.autodiff import Var
from hypermix.hypergraph import (build_hypergraph, hgcn_layer, hgcn_transform,
                                 mixing_matrix, onehot_hypergraph)

rng = np.random.default_rng(1)
n_agents, n_edges, obs_dim = 4, 3, 5

# A shared linear generator maps each agent's observation to hyperedge
# memberships; ReLU keeps them nonnegative, and a scaled identity block
# gives every agent a self-edge of matching magnitude.
Z = rng.normal(size=(n_agents, obs_dim))
gen_w = rng.normal(size=(obs_dim, n_edges)) * 0.5
gen_b = np.zeros((1, n_edges))
hg = build_hypergraph(Var(Z), gen_w, gen_b)
print("incidence matrix H (learned block | scaled identity):")
print(np.round(hg.H.value, 3))
print(f"mean of learned block mu = {hg.mu.value[0, 0]:.4f}\n")

# Convolving per-agent values mixes them along shared hyperedges.
q = rng.normal(size=(n_agents, 1))
q_mixed = hgcn_transform(Var(q), hg.H, Var(np.ones((n_edges + n_agents, 1))),
                         Var(np.ones((n_edges + n_agents, 1))))
print("agent values before:", np.round(q.ravel(), 3))
print("agent values after: ", np.round(q_mixed.value.ravel(), 3), "\n")

# The effective mixing matrix is entrywise nonnegative, which is what
# preserves the monotonicity needed for greedy decentralized execution.
A = mixing_matrix(hg.H.value, np.ones(n_edges + n_agents))
print("effective mixing matrix (all entries >= 0):")
print(np.round(A, 3), "\n")

# Two special cases pin down the algebra:
# 1. identity incidence (the one-hot ablation) leaves values untouched;
oh = onehot_hypergraph(n_agents)
q_id = hgcn_transform(Var(q), oh.H, Var(np.ones((n_agents, 1))),
                      Var(np.ones((n_agents, 1))))
print("identity incidence max |q' - q|:",
      f"{np.abs(q_id.value - q).max():.2e}")

# 2. one all-ones hyperedge averages the values (mean pooling).
pool = hgcn_layer(Var(q), Var(np.ones((n_agents, 1))), Var(np.ones((1, 1))))
print("single uniform hyperedge output:", np.round(pool.value.ravel(), 4),
      "vs mean", round(float(q.mean()), 4))
