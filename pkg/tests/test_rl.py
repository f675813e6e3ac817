"""Reward shaping and the policy-gradient step."""

from __future__ import annotations

import copy
import random

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from relpara.generator import ConditioningMode, GeneratorConfig, RelationParaphraser, make_rng
from relpara.oracle import SyntheticWorldBackend
from relpara.relations import EntailmentRelation, RewardConfig
from relpara.rl import (
    RolloutSet,
    Trajectory,
    discounted_returns,
    estimate_rewards,
    reinforce_step,
    rollout,
)
from relpara.scorers import ScorerBackends, TokenOverlapSimilarity
from relpara.vocab import Vocab

TINY = GeneratorConfig(layers=1, d_model=32, heads=2, ffn_dim=64, dropout=0.0, seed=0)


def _model():
    vocab = Vocab.from_corpus([tuple(f"w{i}" for i in range(10))])
    return RelationParaphraser(vocab, TINY, mode=ConditioningMode.AWARE)


def _backends():
    return ScorerBackends(
        similarity=TokenOverlapSimilarity(), oracle=SyntheticWorldBackend()
    )


class TestRolloutSet:
    def test_valid_structure(self):
        rs = RolloutSet(
            reference=("a", "b"),
            per_step_samples=(
                (("a",), ("a", "c")),
                (("a", "b"),),
            ),
        )
        assert len(rs.per_step_samples) == 2

    def test_requires_nonempty_reference(self):
        with pytest.raises(ValueError):
            RolloutSet(reference=(), per_step_samples=())

    def test_one_group_per_step(self):
        with pytest.raises(ValueError):
            RolloutSet(reference=("a", "b"), per_step_samples=((("a",),),))

    def test_samples_must_extend_prefix(self):
        with pytest.raises(ValueError):
            RolloutSet(
                reference=("a", "b"),
                per_step_samples=(
                    (("c", "d"),),      # does not start with ("a",)
                    (("a", "b"),),
                ),
            )

    def test_last_group_is_reference_alone(self):
        with pytest.raises(ValueError):
            RolloutSet(
                reference=("a", "b"),
                per_step_samples=(
                    (("a",),),
                    (("a", "b"), ("a", "b", "c")),
                ),
            )


class TestRollout:
    def test_structure_matches_reference_length(self):
        model = _model()
        cfg = RewardConfig(n_rollouts=2)
        rs = rollout(
            model, ("w0", "w1", "w2", "w3"), EntailmentRelation.FWD, cfg,
            min_len=2, max_len=6, rng=make_rng(0),
        )
        T = len(rs.reference)
        assert len(rs.per_step_samples) == T
        assert rs.per_step_samples[-1] == (rs.reference,)
        for t, group in enumerate(rs.per_step_samples[:-1], start=1):
            assert len(group) == cfg.n_rollouts
            for sample in group:
                assert sample[:t] == rs.reference[:t]

    def test_deterministic_under_seed(self):
        model = _model()
        cfg = RewardConfig()
        args = (model, ("w0", "w1", "w2"), EntailmentRelation.EQ, cfg)
        a = rollout(*args, min_len=2, max_len=6, rng=make_rng(3))
        b = rollout(*args, min_len=2, max_len=6, rng=make_rng(3))
        assert a == b


class TestDiscountedReturns:
    def test_hand_value(self):
        # r=(0.2, 0.1, -0.1), gamma=0.99:
        # Q3=-0.1; Q2=0.1+0.99*(-0.1)=0.001; Q1=0.2+0.99*0.001=0.20099
        q = discounted_returns((0.2, 0.1, -0.1), 0.99)
        assert q == pytest.approx((0.20099, 0.001, -0.1))

    def test_gamma_zero_is_identity(self):
        rewards = (0.4, -0.2, 0.3)
        assert discounted_returns(rewards, 0.0) == pytest.approx(rewards)

    @settings(max_examples=200)
    @given(
        st.lists(st.floats(-1, 1), min_size=1, max_size=12),
        st.floats(0.0, 1.0),
    )
    def test_matches_brute_force(self, rewards, gamma):
        q = discounted_returns(tuple(rewards), gamma)
        for t in range(len(rewards)):
            brute = sum(
                rewards[k] * gamma ** (k - t) for k in range(t, len(rewards))
            )
            assert q[t] == pytest.approx(brute, abs=1e-9)


class TestEstimateRewards:
    def setup_method(self):
        self.cfg = RewardConfig()
        self.backends = _backends()

    def _trajectory(self, x, reference, groups):
        rs = RolloutSet(reference=reference, per_step_samples=groups)
        return estimate_rewards(
            rs, x, EntailmentRelation.FWD, self.cfg, self.backends
        )

    def test_rewards_telescope_to_final_f(self):
        x = ("w0", "w1", "w2", "w3", "w4")
        reference = ("w0", "w1", "w2")
        groups = (
            (("w0", "w5"), ("w0", "w1", "w3")),
            (("w0", "w1", "w2"), ("w0", "w1")),
            (reference,),
        )
        traj = self._trajectory(x, reference, groups)
        assert sum(traj.rewards) == pytest.approx(traj.per_step_f[-1])
        assert traj.rewards[0] == pytest.approx(traj.per_step_f[0])
        for t in range(1, len(traj.rewards)):
            assert traj.rewards[t] == pytest.approx(
                traj.per_step_f[t] - traj.per_step_f[t - 1]
            )

    def test_returns_are_discounted_suffix_sums(self):
        x = ("w0", "w1", "w2", "w3", "w4")
        reference = ("w0", "w1")
        groups = ((("w0",), ("w0", "w3")), (reference,))
        traj = self._trajectory(x, reference, groups)
        assert traj.returns == pytest.approx(
            discounted_returns(traj.rewards, self.cfg.gamma)
        )

    def test_parallel_lengths(self):
        x = ("w0", "w1", "w2", "w3")
        reference = ("w0", "w1")
        groups = ((("w0",), ("w0", "w2")), (reference,))
        traj = self._trajectory(x, reference, groups)
        assert (
            len(traj.actions)
            == len(traj.per_step_f)
            == len(traj.rewards)
            == len(traj.returns)
            == 2
        )


def _make_trajectory(model, x, relation, cfg, backends, rng):
    rs = rollout(model, x, relation, cfg, min_len=2, max_len=6, rng=rng)
    return estimate_rewards(rs, x, relation, cfg, backends)


class TestReinforceStep:
    def setup_method(self):
        self.model = _model()
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=1e-3)
        self.cfg = RewardConfig()
        self.backends = _backends()

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            reinforce_step(self.model, [], self.optimizer)

    def test_all_zero_returns_take_no_step(self):
        traj = Trajectory(
            x=("w0", "w1"),
            relation=EntailmentRelation.FWD,
            actions=("w0",),
            per_step_f=(0.0,),
            rewards=(0.0,),
            returns=(0.0,),
        )
        before = copy.deepcopy(self.model.state_dict())
        loss = reinforce_step(self.model, [traj], self.optimizer)
        assert loss == 0.0
        after = self.model.state_dict()
        assert all(torch.equal(before[k], after[k]) for k in before)

    def test_step_changes_parameters(self):
        traj = _make_trajectory(
            self.model, ("w0", "w1", "w2", "w3"), EntailmentRelation.FWD,
            self.cfg, self.backends, make_rng(1),
        )
        if not any(traj.returns):
            pytest.skip("no reward signal in this rollout")
        before = copy.deepcopy(self.model.state_dict())
        reinforce_step(self.model, [traj], self.optimizer)
        changed = any(
            not torch.equal(before[k], v)
            for k, v in self.model.state_dict().items()
        )
        assert changed

    def test_stop_emission_shares_final_return(self):
        # the paraphraser returns one extra log-prob for the end token;
        # the step must accept it and still move the stop probability
        x, actions = ("w0", "w1"), ("w0",)
        lp = self.model.sequence_log_probs(x, EntailmentRelation.FWD, actions)
        assert lp.shape == (len(actions) + 1,)
        traj = Trajectory(
            x=x,
            relation=EntailmentRelation.FWD,
            actions=actions,
            per_step_f=(0.6,),
            rewards=(0.6,),
            returns=(0.6,),
        )
        with torch.no_grad():
            before = self.model.sequence_log_probs(
                x, EntailmentRelation.FWD, actions
            )[-1]
        for _ in range(3):
            reinforce_step(self.model, [traj], self.optimizer)
        with torch.no_grad():
            after = self.model.sequence_log_probs(
                x, EntailmentRelation.FWD, actions
            )[-1]
        assert after > before

    def test_misaligned_policy_rejected(self):
        class _BadPolicy(nn.Module):
            def __init__(self):
                super().__init__()
                self.theta = nn.Parameter(torch.zeros(4))

            def sequence_log_probs(self, x, relation, actions):
                return torch.log_softmax(self.theta, dim=0)[:3]

        policy = _BadPolicy()
        traj = Trajectory(
            x=("w0",),
            relation=EntailmentRelation.FWD,
            actions=("w0",),
            per_step_f=(0.5,),
            rewards=(0.5,),
            returns=(0.5,),
        )
        with pytest.raises(ValueError):
            reinforce_step(policy, [traj], torch.optim.SGD(policy.parameters(), lr=0.1))

    def test_nonfinite_rewards_skip_and_restore(self):
        traj = Trajectory(
            x=("w0", "w1"),
            relation=EntailmentRelation.FWD,
            actions=("w0",),
            per_step_f=(float("nan"),),
            rewards=(float("nan"),),
            returns=(float("nan"),),
        )
        before = copy.deepcopy(self.model.state_dict())
        reinforce_step(self.model, [traj], self.optimizer)
        after = self.model.state_dict()
        assert all(torch.equal(before[k], after[k]) for k in before)
        for p in self.model.parameters():
            assert torch.isfinite(p).all()

    def test_positive_return_increases_action_log_prob(self):
        x = ("w0", "w1", "w2")
        actions = ("w0", "w1")
        traj = Trajectory(
            x=x,
            relation=EntailmentRelation.FWD,
            actions=actions,
            per_step_f=(0.5, 0.5),
            rewards=(0.5, 0.0),
            returns=(0.5, 0.2),
        )
        with torch.no_grad():
            before = self.model.sequence_log_probs(
                x, EntailmentRelation.FWD, actions
            ).sum()
        for _ in range(5):
            reinforce_step(self.model, [traj], self.optimizer)
        with torch.no_grad():
            after = self.model.sequence_log_probs(
                x, EntailmentRelation.FWD, actions
            ).sum()
        assert after > before


class TestPolicyGradientDirection:
    """One-parameter policy: analytic gradient must match autograd."""

    def test_two_action_bandit_gradient(self):
        # policy: P(a0) = sigmoid(theta); reward 1 for a0, 0 for a1.
        # REINFORCE loss for realized a0 with Q=1: -log sigmoid(theta).
        # d/dtheta = -(1 - sigmoid(theta)) which is negative, so gradient
        # descent increases theta and with it P(a0).
        theta = torch.zeros(1, requires_grad=True)
        loss = -torch.nn.functional.logsigmoid(theta) * 1.0
        loss.backward()
        analytic = -(1.0 - torch.sigmoid(torch.zeros(1)))
        assert theta.grad == pytest.approx(analytic, abs=1e-6)
        assert theta.grad.item() < 0
