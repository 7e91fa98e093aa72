"""Agent network forward pass, action selection, and dead-agent masking."""

import numpy as np
import pytest

from hypermix import agents as ag
from hypermix.autodiff import Var
from hypermix.errors import ContractError
from hypermix.nn import ParameterStore
from hypermix.rng import Rng

from _oracles import agent_forward_reference, store_values


def _store(obs_dim=3, n_actions=2, n=2, hidden=4, seed=0):
    store = ParameterStore()
    ag.init_agent_params(store, obs_dim, n_actions, n, Rng(seed), hidden=hidden)
    return store


class TestAgentForward:
    def test_zero_params_give_zero_q(self):
        store = _store()
        for name, p in store.items():
            p.value = np.zeros_like(p.value)
        inputs = ag.build_agent_inputs(np.ones((2, 3)), None, 2)
        q, h = ag.agent_forward(store.bind(None), Var(inputs),
                                ag.initial_hidden(2, 4))
        np.testing.assert_array_equal(q.value, np.zeros((2, 2)))
        assert np.isfinite(h.value).all()

    def test_deterministic_repeat(self):
        store = _store(seed=3)
        inputs = ag.build_agent_inputs(Rng(1).normal((2, 3)), [1, 0], 2)
        hidden = ag.initial_hidden(2, 4)
        q1, h1 = ag.agent_forward(store.bind(None), Var(inputs), hidden)
        q2, h2 = ag.agent_forward(store.bind(None), Var(inputs), hidden)
        np.testing.assert_array_equal(q1.value, q2.value)
        np.testing.assert_array_equal(h1.value, h2.value)

    def test_matches_straight_line_reference(self):
        rng = Rng(7)
        store = _store(obs_dim=4, n_actions=3, n=2, hidden=5, seed=11)
        params = store_values(store)
        hidden = rng.normal((2, 5))
        inputs = ag.build_agent_inputs(rng.normal((2, 4)), [2, 0], 3)
        q, h = ag.agent_forward(store.bind(None), Var(inputs), Var(hidden))
        q_ref, h_ref = agent_forward_reference(params, inputs, hidden)
        np.testing.assert_allclose(q.value, q_ref, atol=1e-12)
        np.testing.assert_allclose(h.value, h_ref, atol=1e-12)

    def test_hidden_state_carries_history(self):
        store = _store(seed=5)
        pv = store.bind(None)
        inputs = ag.build_agent_inputs(np.ones((2, 3)), None, 2)
        _, h1 = ag.agent_forward(pv, Var(inputs), ag.initial_hidden(2, 4))
        q_a, _ = ag.agent_forward(pv, Var(inputs), h1)
        q_b, _ = ag.agent_forward(pv, Var(inputs), ag.initial_hidden(2, 4))
        assert not np.array_equal(q_a.value, q_b.value)


class TestBuildInputs:
    def test_layout_obs_lastaction_id(self):
        obs = np.array([[0.1, 0.2], [0.3, 0.4]])
        rows = ag.build_agent_inputs(obs, [1, 0], 3)
        np.testing.assert_array_equal(rows[0], [0.1, 0.2, 0, 1, 0, 1, 0])
        np.testing.assert_array_equal(rows[1], [0.3, 0.4, 1, 0, 0, 0, 1])

    def test_episode_start_has_zero_action_block(self):
        rows = ag.build_agent_inputs(np.zeros((2, 2)), None, 3)
        assert rows[:, 2:5].sum() == 0.0
        assert rows[0, 5] == 1.0 and rows[1, 6] == 1.0


class TestSelectAction:
    def test_greedy_argmax(self):
        assert ag.select_action(np.array([1.0, 5.0, 3.0]),
                                np.ones(3, dtype=bool), 0.0, Rng(0)) == 1

    def test_masked_argmax(self):
        mask = np.array([True, False, True])
        assert ag.select_action(np.array([1.0, 5.0, 3.0]), mask, 0.0,
                                Rng(0)) == 2

    def test_unavailable_never_chosen_under_full_exploration(self):
        rng = Rng(8)
        mask = np.array([True, False, True, True])
        picks = {ag.select_action(np.zeros(4), mask, 1.0, rng)
                 for _ in range(500)}
        assert 1 not in picks and picks == {0, 2, 3}

    def test_uniform_exploration_frequencies_within_3_sigma(self):
        rng = Rng(9)
        draws = 100_000
        counts = np.zeros(3)
        mask = np.ones(3, dtype=bool)
        q = np.array([9.0, 1.0, 1.0])
        for _ in range(draws):
            counts[ag.select_action(q, mask, 1.0, rng)] += 1
        p = 1.0 / 3.0
        sigma = np.sqrt(draws * p * (1 - p))
        assert (np.abs(counts - draws * p) <= 3 * sigma).all()

    def test_empty_mask_is_contract_error(self):
        with pytest.raises(ContractError):
            ag.select_action(np.zeros(3), np.zeros(3, dtype=bool), 0.0, Rng(0))

    def test_tie_breaks_to_lowest_index(self):
        q = np.array([2.0, 2.0, 1.0])
        assert ag.select_action(q, np.ones(3, dtype=bool), 0.0, Rng(0)) == 0

    def test_greedy_is_permutation_equivariant(self):
        rng = Rng(10)
        for _ in range(200):
            q = rng.normal((5,)).ravel()
            mask = rng.uniform(0, 1, 5) > 0.3
            if not mask.any():
                mask[rng.integers(5)] = True
            # make the masked argmax unique so the permuted pick must follow it
            avail_idx = np.flatnonzero(mask)
            q[avail_idx[0]] += 10.0
            pick = ag.select_action(q, mask, 0.0, Rng(0))
            perm = rng.permutation(5)
            pick_p = ag.select_action(q[perm], mask[perm], 0.0, Rng(0))
            assert perm[pick_p] == pick


class TestGreedyActions:
    def test_rowwise_masked_argmax(self):
        q = np.array([[1.0, 5.0, 3.0], [9.0, 0.0, 2.0]])
        avail = np.array([[True, False, True], [False, True, True]])
        np.testing.assert_array_equal(ag.greedy_actions(q, avail), [2, 2])


class TestMaskDeadAgent:
    def test_masks_to_minus_one(self):
        np.testing.assert_array_equal(ag.mask_dead_agent(np.array([0.2, 0.7])),
                                      [-1.0, -1.0])

    def test_alive_agents_unchanged_elsewhere(self):
        obs = np.array([0.2, 0.7])
        masked = ag.mask_dead_agent(obs)
        np.testing.assert_array_equal(obs, [0.2, 0.7])  # no in-place change
        assert masked.shape == obs.shape

    def test_two_dead_agents_have_identical_generator_rows(self):
        from hypermix.hypergraph import build_hypergraph
        rng = Rng(11)
        gen_w = rng.normal((4, 3))
        gen_b = rng.normal((1, 3))
        obs = rng.normal((3, 4))
        obs[0] = ag.mask_dead_agent(obs[0])
        obs[2] = ag.mask_dead_agent(obs[2])
        hg = build_hypergraph(Var(obs), gen_w, gen_b)
        np.testing.assert_array_equal(hg.H.value[0, :3], hg.H.value[2, :3])
