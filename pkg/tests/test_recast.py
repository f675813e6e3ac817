"""SICK ingestion and recasting into relation-annotated paraphrase pairs."""

from __future__ import annotations

import pytest

from relpara.recast import (
    EXPECTED_SICK_COUNTS,
    MEANING_PRESERVING_GROUPS,
    RecastDataset,
    SickFormatError,
    SickRecord,
    Split,
    counts_match,
    filter_for_training,
    load_sick,
    recast,
)
from relpara.relations import EntailmentRelation, NLILabel, PairSource

E, N, C = NLILabel.E, NLILabel.N, NLILabel.C


def _record(a, b, ab, ba, group="S1aS2a", split=Split.TRAIN):
    return SickRecord(
        sentence_a=a, sentence_b=b, label_ab=ab, label_ba=ba,
        transformation_group=group, split=split,
    )


class TestRecast:
    def test_eq_pair_doubles_into_two_eq(self):
        out = recast([_record("a man walks", "a guy walks", E, E)])
        pairs = out.pairs[Split.TRAIN]
        assert [p.relation for p in pairs] == [
            EntailmentRelation.EQ, EntailmentRelation.EQ,
        ]
        assert pairs[0].pair.x == ("a", "man", "walks")
        assert pairs[1].pair.x == ("a", "guy", "walks")
        assert pairs[1].pair.y == ("a", "man", "walks")
        assert all(p.source is PairSource.GOLD for p in pairs)

    def test_fwd_pair_doubles_into_fwd_and_rev(self):
        out = recast([_record("a small dog runs", "a dog runs", E, N)])
        relations = [p.relation for p in out.pairs[Split.TRAIN]]
        assert relations == [EntailmentRelation.FWD, EntailmentRelation.REV]

    def test_rev_pair_doubles_into_rev_and_fwd(self):
        out = recast([_record("a dog runs", "a small dog runs", N, E)])
        relations = [p.relation for p in out.pairs[Split.TRAIN]]
        assert relations == [EntailmentRelation.REV, EntailmentRelation.FWD]

    def test_contradiction_dropped_entirely(self):
        out = recast([_record("a man sits", "no man sits", C, C)])
        assert out.pairs[Split.TRAIN] == []
        assert out.others[Split.TRAIN] == []
        assert out.rejects == []

    def test_neutral_goes_to_others_unreversed(self):
        out = recast([_record("a man reads", "a man is old", N, N)])
        assert out.pairs[Split.TRAIN] == []
        others = out.others[Split.TRAIN]
        assert len(others) == 1
        assert others[0].relation is EntailmentRelation.NEUTRAL

    def test_invalid_label_combo_goes_to_others(self):
        out = recast([_record("a man reads", "a man sleeps", E, C)])
        others = out.others[Split.TRAIN]
        assert len(others) == 1
        assert others[0].relation is EntailmentRelation.INVALID

    def test_meaning_altering_group_rejected(self):
        rec = _record("a man walks", "no man walks", E, E, group="S1aS2a_negated")
        out = recast([rec])
        assert out.rejects == [rec]
        assert out.pairs[Split.TRAIN] == []

    def test_splits_preserved(self):
        out = recast(
            [
                _record("a b", "b a", E, E, split=Split.DEV),
                _record("c d", "d c", E, E, split=Split.TEST),
            ]
        )
        assert len(out.pairs[Split.DEV]) == 2
        assert len(out.pairs[Split.TEST]) == 2
        assert out.pairs[Split.TRAIN] == []

    def test_counts_layout(self):
        out = recast(
            [
                _record("a man walks", "a guy walks", E, E),
                _record("a small dog runs", "a dog runs", E, N),
                _record("e f", "f g", N, N),
            ]
        )
        table = out.counts()
        assert table["TRAIN"] == {"EQ": 2, "FWD": 1, "REV": 1, "Others": 1}
        assert table["DEV"] == {"EQ": 0, "FWD": 0, "REV": 0, "Others": 0}


class TestFilterForTraining:
    def _dataset(self):
        return recast(
            [
                _record("a man walks", "a guy walks", E, E),
                _record("a red car moves", "a car moves", E, N),
                _record("x y", "y z", N, N),
                _record("p q", "q p", E, E, split=Split.DEV),
                _record("u v", "v w", N, N, split=Split.DEV),
            ]
        )

    def test_train_balanced_to_equal_counts(self):
        splits = filter_for_training(self._dataset(), seed=0)
        train = splits[Split.TRAIN]
        by_relation = {}
        for p in train:
            by_relation[p.relation] = by_relation.get(p.relation, 0) + 1
        assert len(set(by_relation.values())) == 1

    def test_dev_not_balanced_and_others_dropped(self):
        splits = filter_for_training(self._dataset(), seed=0)
        assert len(splits[Split.DEV]) == 2
        relations = {p.relation for p in splits[Split.DEV]}
        assert EntailmentRelation.NEUTRAL not in relations

    def test_deterministic(self):
        a = filter_for_training(self._dataset(), seed=4)
        b = filter_for_training(self._dataset(), seed=4)
        assert a == b


SICK_HEADER = (
    "pair_ID\tsentence_A\tsentence_B\tentailment_label\trelatedness_score\t"
    "entailment_AB\tentailment_BA\tsentence_A_original\tsentence_B_original\t"
    "sentence_A_dataset\tsentence_B_dataset\ttransformation_group\tSemEval_set"
)


def _sick_line(i, a, b, ab, ba, group, split):
    return (
        f"{i}\t{a}\t{b}\tENTAILMENT\t4.5\t{ab}\t{ba}\t{a}\t{b}\tFLICKR\tFLICKR\t"
        f"{group}\t{split}"
    )


class TestLoadSick:
    def _write(self, tmp_path, lines, header=SICK_HEADER):
        path = tmp_path / "sick.txt"
        path.write_text("\n".join([header] + lines) + "\n", encoding="utf-8")
        return path

    def test_round_trip(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                _sick_line(1, "A man walks", "A guy walks", "A_entails_B", "B_entails_A", "S1aS2a", "TRAIN"),
                _sick_line(2, "A dog runs", "A small dog runs", "A_neutral_B", "B_entails_A", "S1aS1b", "TRIAL"),
                _sick_line(3, "A cat sits", "A cat sleeps", "A_contradicts_B", "B_contradicts_A", "S1aS2b", "TEST"),
            ],
        )
        records = load_sick(path)
        assert len(records) == 3
        assert records[0].label_ab is E
        assert records[0].split is Split.TRAIN
        assert records[1].label_ab is N
        assert records[1].split is Split.DEV
        assert records[2].label_ba is C
        assert records[2].split is Split.TEST

    def test_plain_entailment_words_parse(self, tmp_path):
        path = self._write(
            tmp_path,
            [_sick_line(1, "a", "b", "ENTAILMENT", "NEUTRAL", "S1aS2a", "TRAIN")],
        )
        record = load_sick(path)[0]
        assert record.label_ab is E
        assert record.label_ba is N

    def test_group_column_alias(self, tmp_path):
        header = SICK_HEADER.replace("transformation_group", "pair_type")
        path = self._write(
            tmp_path,
            [_sick_line(1, "a", "b", "ENTAILMENT", "NEUTRAL", "S1aS2a", "TRAIN")],
            header=header,
        )
        assert load_sick(path)[0].transformation_group == "S1aS2a"

    def test_missing_group_column_raises(self, tmp_path):
        header = SICK_HEADER.replace("transformation_group", "mystery")
        path = self._write(
            tmp_path,
            [_sick_line(1, "a", "b", "ENTAILMENT", "NEUTRAL", "S1aS2a", "TRAIN")],
            header=header,
        )
        with pytest.raises(SickFormatError):
            load_sick(path)

    def test_missing_direction_column_raises(self, tmp_path):
        header = SICK_HEADER.replace("entailment_BA", "entailment_XX")
        path = self._write(
            tmp_path,
            [_sick_line(1, "a", "b", "ENTAILMENT", "NEUTRAL", "S1aS2a", "TRAIN")],
            header=header,
        )
        with pytest.raises(SickFormatError):
            load_sick(path)

    def test_bad_label_raises_with_line_number(self, tmp_path):
        path = self._write(
            tmp_path,
            [_sick_line(1, "a", "b", "MAYBE", "NEUTRAL", "S1aS2a", "TRAIN")],
        )
        with pytest.raises(SickFormatError, match="line 2"):
            load_sick(path)

    def test_bad_split_raises(self, tmp_path):
        path = self._write(
            tmp_path,
            [_sick_line(1, "a", "b", "ENTAILMENT", "NEUTRAL", "S1aS2a", "VAL")],
        )
        with pytest.raises(SickFormatError):
            load_sick(path)


class TestCountsMatch:
    def test_exact_match(self):
        assert counts_match(EXPECTED_SICK_COUNTS, EXPECTED_SICK_COUNTS)

    def test_single_cell_mismatch(self):
        observed = {s: dict(row) for s, row in EXPECTED_SICK_COUNTS.items()}
        observed["TRAIN"]["EQ"] += 1
        assert not counts_match(observed, EXPECTED_SICK_COUNTS)

    def test_missing_split(self):
        observed = {"TRAIN": EXPECTED_SICK_COUNTS["TRAIN"]}
        assert not counts_match(observed, EXPECTED_SICK_COUNTS)


class TestExpectedCountsShape:
    def test_symmetric_fwd_rev(self):
        for row in EXPECTED_SICK_COUNTS.values():
            assert row["FWD"] == row["REV"]

    def test_all_splits_present(self):
        assert set(EXPECTED_SICK_COUNTS) == {"TRAIN", "DEV", "TEST"}
