"""Shared test utilities: gradient checking and tiny model setups."""

import numpy as np

from hypermix import agents, autodiff as ad, mixers, nn
from hypermix.rng import Rng

GRAD_RTOL = 1e-4
GRAD_H = 1e-5


def assert_grad_close(analytic, fd, rtol=GRAD_RTOL, label=""):
    """Relative comparison with a unit floor for near-zero coordinates."""
    analytic = np.zeros_like(fd) if analytic is None else analytic
    err = np.abs(analytic - fd)
    tol = rtol * np.maximum(1.0, np.abs(fd))
    assert (err <= tol).all(), (
        f"gradient mismatch {label}: max err {err.max():.3e} vs fd"
        f" {np.abs(fd).max():.3e}"
    )


def check_gradients(build, inputs, rtol=GRAD_RTOL, h=GRAD_H, label=""):
    """Compare reverse-mode gradients of a scalar-valued build against
    central finite differences, for every input."""
    out, tape, leaves = ad.evaluate(build, *inputs)
    assert out.value.shape == (1, 1), "gradient check needs a scalar output"
    ad.gradient(tape, out)
    inputs = [ad.as_matrix(x) for x in inputs]
    for i, leaf in enumerate(leaves):
        def f(x, i=i):
            vals = list(inputs)
            vals[i] = x
            out2, _, _ = ad.evaluate(build, *vals)
            return float(out2.value[0, 0])

        fd = ad.finite_diff(f, inputs[i], h)
        assert_grad_close(leaf.grad, fd, rtol, label=f"{label} input {i}")


def shift_from_kinks(x, threshold=1e-3, amount=0.5):
    """Move coordinates away from nondifferentiable points near zero."""
    x = np.asarray(x, dtype=np.float64).copy()
    near = np.abs(x) < threshold
    x[near] = x[near] + np.where(x[near] >= 0, amount, -amount)
    return x


def tiny_mixer_store(kind, seed=0, n=2, obs_dim=3, state_dim=2, n_actions=2,
                     hyperedges=2, embed=3, agent_hidden=4, hypernet_hidden=4):
    """Small full model (agent nets + mixer) for end-to-end checks."""
    rng = Rng(seed).split("tiny")
    store = nn.ParameterStore()
    agents.init_agent_params(store, obs_dim, n_actions, n, rng.split("agent"),
                             hidden=agent_hidden)
    mixers.init_mixer_params(store, kind, n, obs_dim, state_dim,
                             rng.split("mixer"), hyperedges=hyperedges,
                             embed=embed, hypernet_hidden=hypernet_hidden)
    dims = dict(n=n, obs_dim=obs_dim, state_dim=state_dim, n_actions=n_actions,
                hyperedges=hyperedges, embed=embed, agent_hidden=agent_hidden)
    return store, dims


def composite_qtot(pv, kind, Z, s, actions, dims):
    """Traced agent forward + mixer for one sample; returns the 1x1 joint value."""
    n, n_actions = dims["n"], dims["n_actions"]
    inputs = agents.build_agent_inputs(Z, None, n_actions)
    hidden = agents.initial_hidden(n, dims["agent_hidden"])
    q, _ = agents.agent_forward(pv, ad.Var(inputs), hidden)
    onehot = np.zeros((n, n_actions))
    onehot[np.arange(n), actions] = 1.0
    chosen = ad.matmul(ad.mul(q, onehot), np.ones((n_actions, 1)))
    qtot, _ = mixers.mix_batch(kind, pv, chosen, np.asarray(Z, dtype=np.float64),
                               np.atleast_2d(s), n, dims["embed"])
    return qtot


def composite_qtot_value(store, kind, Z, s, actions, dims) -> float:
    pv = store.bind(None)
    return float(composite_qtot(pv, kind, Z, s, actions, dims).value[0, 0])


def composite_param_grads(store, kind, Z, s, actions, dims):
    """Analytic parameter gradients of the composite joint value."""
    tape = ad.Tape()
    pv = store.bind(tape)
    qtot = composite_qtot(pv, kind, Z, s, actions, dims)
    ad.gradient(tape, qtot)
    return {name: pv[name].grad for name in store.names()}
