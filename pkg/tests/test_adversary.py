"""Hypothesis-only adversary: targets, exclusion, training, cold start."""

from __future__ import annotations

import pytest
import torch

from relpara.adversary import (
    AdversaryBatch,
    AdversaryConfig,
    HypothesisOnlyAdversary,
    batch_from_verdicts,
    make_target,
)
from relpara.oracle import OracleVerdict, SyntheticWorldBackend, oracle_verdict
from relpara.relations import CONTROL_RELATIONS, EntailmentRelation
from relpara.vocab import Vocab

EQ, FWD, REV = CONTROL_RELATIONS


def _verdict(eq=0.0, fwd=0.0, rev=0.0, contra=0.0, neutral=0.0, invalid=0.0):
    likelihoods = {
        EntailmentRelation.EQ: eq,
        EntailmentRelation.FWD: fwd,
        EntailmentRelation.REV: rev,
        EntailmentRelation.CONTRA: contra,
        EntailmentRelation.NEUTRAL: neutral,
        EntailmentRelation.INVALID: invalid,
    }
    best = max(likelihoods.values())
    relation = next(r for r, v in likelihoods.items() if v == best)
    return OracleVerdict(relation=relation, likelihoods=likelihoods)


def _vocab():
    return Vocab.from_corpus([("a", "b", "c"), ("d", "e")])


class TestMakeTarget:
    def test_renormalizes_over_control_mass(self):
        verdict = _verdict(eq=0.3, fwd=0.1, rev=0.1, neutral=0.5)
        assert make_target(verdict.likelihoods) == pytest.approx((0.6, 0.2, 0.2))

    def test_zero_control_mass_gives_zero_row(self):
        verdict = _verdict(neutral=1.0)
        assert make_target(verdict.likelihoods) == (0.0, 0.0, 0.0)

    def test_one_hot_collapses_to_argmax(self):
        verdict = _verdict(eq=0.5, fwd=0.3, rev=0.2)
        assert make_target(verdict.likelihoods, one_hot=True) == (1.0, 0.0, 0.0)


class TestBatchFromVerdicts:
    def test_excludes_noncontrol_verdicts(self):
        backend = SyntheticWorldBackend()
        y_hats = [("a",), ("b",), ("c",)]
        verdicts = [
            oracle_verdict(("a", "b"), ("a",), backend),      # FWD
            oracle_verdict(("a", "c"), ("b", "d"), backend),  # NEUTRAL
            oracle_verdict(("c", "d"), ("d", "c"), backend),  # EQ
        ]
        batch, excluded = batch_from_verdicts(y_hats, verdicts)
        assert len(batch) == 2
        assert excluded == 1
        assert batch.y_hats == [("a",), ("c",)]

    def test_parallel_validation(self):
        with pytest.raises(ValueError):
            batch_from_verdicts([("a",)], [])

    def test_one_hot_passthrough(self):
        backend = SyntheticWorldBackend()
        verdicts = [oracle_verdict(("a", "b"), ("a",), backend)]
        batch, _ = batch_from_verdicts([("a",)], verdicts, one_hot=True)
        assert batch.targets[0] == (0.0, 1.0, 0.0)


class TestHypothesisOnlyAdversary:
    def test_untrained_predicts_exact_uniform(self):
        adv = HypothesisOnlyAdversary(_vocab())
        probs = adv.predict(("a", "b"))
        assert probs == {EQ: 1.0 / 3.0, FWD: 1.0 / 3.0, REV: 1.0 / 3.0}
        assert not adv.trained

    def test_train_step_flips_trained_flag(self):
        adv = HypothesisOnlyAdversary(_vocab())
        batch = AdversaryBatch(y_hats=[("a",)], targets=[(1.0, 0.0, 0.0)])
        result = adv.train_step(batch)
        assert adv.trained
        assert result.used == 1
        assert result.dropped == 0

    def test_zero_target_rows_dropped(self):
        adv = HypothesisOnlyAdversary(_vocab())
        batch = AdversaryBatch(
            y_hats=[("a",), ("b",)],
            targets=[(0.0, 0.0, 0.0), (0.0, 1.0, 0.0)],
        )
        result = adv.train_step(batch)
        assert result.dropped == 1
        assert result.used == 1

    def test_all_zero_batch_takes_no_step(self):
        adv = HypothesisOnlyAdversary(_vocab())
        batch = AdversaryBatch(y_hats=[("a",)], targets=[(0.0, 0.0, 0.0)])
        result = adv.train_step(batch)
        assert result.used == 0
        assert not adv.trained

    def test_learns_separable_signal(self):
        # token "a" always EQ, token "b" always FWD: loss must fall
        torch.manual_seed(0)
        adv = HypothesisOnlyAdversary(_vocab(), AdversaryConfig(seed=1))
        batch = AdversaryBatch(
            y_hats=[("a",), ("b",)] * 8,
            targets=[(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)] * 8,
        )
        first = adv.train_step(batch).loss
        for _ in range(60):
            last = adv.train_step(batch).loss
        assert last < first
        probs = adv.predict(("a",))
        assert probs[EQ] > 0.8

    def test_predictions_are_distributions(self):
        adv = HypothesisOnlyAdversary(_vocab())
        adv.train_step(
            AdversaryBatch(y_hats=[("a", "b")], targets=[(0.2, 0.3, 0.5)])
        )
        probs = adv.predict(("c", "d"))
        assert set(probs) == set(CONTROL_RELATIONS)
        assert sum(probs.values()) == pytest.approx(1.0)

    def test_seeded_init_deterministic(self):
        a = HypothesisOnlyAdversary(_vocab(), AdversaryConfig(seed=7))
        b = HypothesisOnlyAdversary(_vocab(), AdversaryConfig(seed=7))
        for p1, p2 in zip(a.parameters(), b.parameters()):
            assert torch.equal(p1, p2)

    def test_empty_batch_rejected(self):
        adv = HypothesisOnlyAdversary(_vocab())
        with pytest.raises(ValueError):
            adv.train_step(AdversaryBatch(y_hats=[], targets=[]))

    def test_save_load_round_trip(self, tmp_path):
        adv = HypothesisOnlyAdversary(_vocab(), AdversaryConfig(seed=2))
        adv.train_step(
            AdversaryBatch(y_hats=[("a",)], targets=[(0.0, 0.0, 1.0)])
        )
        path = tmp_path / "adv.pt"
        adv.save(path)
        restored = HypothesisOnlyAdversary.load(path)
        assert restored.trained
        assert restored.predict(("a", "b")) == adv.predict(("a", "b"))
