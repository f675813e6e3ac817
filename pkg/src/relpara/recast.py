"""Recast the SICK corpus into relation-annotated paraphrase pairs.

SICK carries human NLI labels in both directions for every sentence pair,
which is exactly what the relation case table needs. Records built from
meaning-preserving transformation groups are kept, the directional label
pair is mapped to an entailment relation, and entailing pairs are doubled
with their reversed twin (EQ reverses to EQ, FWD to REV, REV to FWD).
Contradictions are dropped as semantically divergent; neutral and invalid
pairs survive in a separate "Others" bucket. The SICK NLI splits are
preserved throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .oracle import BalanceMode, balance_corpus, derive_relation
from .relations import (
    CONTROL_RELATIONS,
    EntailmentRelation,
    NLILabel,
    PairSource,
    RelationAnnotatedPair,
    SentencePair,
)


class Split(str, Enum):
    TRAIN = "TRAIN"
    DEV = "DEV"
    TEST = "TEST"


# The five sentence-pair construction groups whose transformations preserve
# meaning; all other groups involve meaning-altering edits and are rejected.
MEANING_PRESERVING_GROUPS = frozenset(
    {"S1aS2a", "S1aS2b", "S1bS2a", "S1bS2b", "S1aS1b"}
)

_OTHERS_RELATIONS = (EntailmentRelation.NEUTRAL, EntailmentRelation.INVALID)


@dataclass(frozen=True)
class SickRecord:
    """One SICK row: a sentence pair with both directional NLI labels."""

    sentence_a: str
    sentence_b: str
    label_ab: NLILabel
    label_ba: NLILabel
    transformation_group: str
    split: Split

    def __post_init__(self) -> None:
        if not self.sentence_a.strip() or not self.sentence_b.strip():
            raise ValueError("SICK record sentences must be non-empty")


@dataclass
class RecastDataset:
    """Recast output: control-relation pairs and Others, per split."""

    pairs: dict[Split, list[RelationAnnotatedPair]] = field(
        default_factory=lambda: {s: [] for s in Split}
    )
    others: dict[Split, list[RelationAnnotatedPair]] = field(
        default_factory=lambda: {s: [] for s in Split}
    )
    rejects: list[SickRecord] = field(default_factory=list)

    def counts(self) -> dict[str, dict[str, int]]:
        """Per-split relation counts in the EQ/FWD/REV/Others layout."""
        table: dict[str, dict[str, int]] = {}
        for split in Split:
            row = {r.value: 0 for r in CONTROL_RELATIONS}
            for p in self.pairs[split]:
                row[p.relation.value] += 1
            row["Others"] = len(self.others[split])
            table[split.value] = row
        return table


_REVERSED_RELATION = {
    EntailmentRelation.EQ: EntailmentRelation.EQ,
    EntailmentRelation.FWD: EntailmentRelation.REV,
    EntailmentRelation.REV: EntailmentRelation.FWD,
}


def recast(records: Iterable[SickRecord]) -> RecastDataset:
    """Build the relation-annotated paraphrase dataset from SICK records.

    Records outside the meaning-preserving groups go to ``rejects`` rather
    than disappearing. For each kept record the relation comes from the
    directional label pair; entailing pairs additionally emit the reversed
    sentence pair under the reversed relation, in the same split. CONTRA
    is excluded; NEUTRAL and INVALID land in the Others bucket unreversed.
    """
    out = RecastDataset()
    for rec in records:
        if rec.transformation_group not in MEANING_PRESERVING_GROUPS:
            out.rejects.append(rec)
            continue
        relation = derive_relation(rec.label_ab, rec.label_ba)
        if relation is EntailmentRelation.CONTRA:
            continue
        pair = SentencePair.from_text(rec.sentence_a, rec.sentence_b)
        annotated = RelationAnnotatedPair(
            pair=pair, relation=relation, source=PairSource.GOLD
        )
        if relation in _OTHERS_RELATIONS:
            out.others[rec.split].append(annotated)
            continue
        out.pairs[rec.split].append(annotated)
        out.pairs[rec.split].append(
            RelationAnnotatedPair(
                pair=SentencePair.from_text(rec.sentence_b, rec.sentence_a),
                relation=_REVERSED_RELATION[relation],
                source=PairSource.GOLD,
            )
        )
    return out


def filter_for_training(
    dataset: RecastDataset, seed: int = 0
) -> dict[Split, list[RelationAnnotatedPair]]:
    """Drop the Others bucket and balance the training split.

    Only TRAIN is upsampled to equal class counts; DEV and TEST keep their
    natural relation distribution so evaluation stays unskewed.
    """
    out: dict[Split, list[RelationAnnotatedPair]] = {}
    for split in Split:
        kept = list(dataset.pairs[split])
        if split is Split.TRAIN:
            kept = balance_corpus(kept, BalanceMode.UPSAMPLE, seed=seed)
        out[split] = kept
    return out


# ---------------------------------------------------------------------------
# SICK TSV ingestion


_SPLIT_BY_TAG = {
    "TRAIN": Split.TRAIN,
    "TRIAL": Split.DEV,
    "DEV": Split.DEV,
    "TEST": Split.TEST,
}

# The official distribution has no transformation-group column; enriched
# copies carry it under varying names.
_GROUP_COLUMN_ALIASES = (
    "transformation_group",
    "group",
    "pair_group",
    "pair_type",
    "sentence_pair_type",
)


class SickFormatError(ValueError):
    """The SICK file lacks a required column or carries unparseable values."""


def _parse_label(raw: str, *, column: str, line: int) -> NLILabel:
    low = raw.strip().lower()
    if "entail" in low:
        return NLILabel.E
    if "neutral" in low:
        return NLILabel.N
    if "contradict" in low:
        return NLILabel.C
    raise SickFormatError(f"line {line}: unparseable {column} label {raw!r}")


def load_sick(path: str | Path) -> list[SickRecord]:
    """Read a tab-separated SICK file by column name.

    Requires the official bidirectional-label columns (sentence_A,
    sentence_B, entailment_AB, entailment_BA, SemEval_set) plus a
    transformation-group column under one of the accepted aliases.

    Raises:
        SickFormatError: missing columns or unparseable label/split values.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        header = reader.fieldnames or []
        by_lower = {name.lower(): name for name in header}

        def col(name: str) -> str:
            try:
                return by_lower[name.lower()]
            except KeyError:
                raise SickFormatError(
                    f"SICK file {path} is missing required column {name!r}"
                ) from None

        group_col = next(
            (by_lower[a.lower()] for a in _GROUP_COLUMN_ALIASES if a.lower() in by_lower),
            None,
        )
        if group_col is None:
            raise SickFormatError(
                f"SICK file {path} has no transformation-group column "
                f"(accepted names: {', '.join(_GROUP_COLUMN_ALIASES)}); the "
                "official distribution must be enriched with group tags "
                "before recasting"
            )
        a_col = col("sentence_A")
        b_col = col("sentence_B")
        ab_col = col("entailment_AB")
        ba_col = col("entailment_BA")
        split_col = col("SemEval_set")

        records: list[SickRecord] = []
        for i, row in enumerate(reader, start=2):
            split_tag = (row[split_col] or "").strip().upper()
            if split_tag not in _SPLIT_BY_TAG:
                raise SickFormatError(
                    f"line {i}: unknown SemEval_set value {row[split_col]!r}"
                )
            records.append(
                SickRecord(
                    sentence_a=row[a_col],
                    sentence_b=row[b_col],
                    label_ab=_parse_label(row[ab_col], column=ab_col, line=i),
                    label_ba=_parse_label(row[ba_col], column=ba_col, line=i),
                    transformation_group=(row[group_col] or "").strip(),
                    split=_SPLIT_BY_TAG[split_tag],
                )
            )
    return records


def counts_match(
    observed: Mapping[str, Mapping[str, int]],
    expected: Mapping[str, Mapping[str, int]],
) -> bool:
    """True when two per-split count tables agree cell for cell."""
    for split, row in expected.items():
        got = observed.get(split, {})
        for key, value in row.items():
            if got.get(key) != value:
                return False
    return True


# Published per-split relation counts for the recast corpus; used by tests
# and by the CLI to flag an unexpected ingest.
EXPECTED_SICK_COUNTS: dict[str, dict[str, int]] = {
    "TRAIN": {"EQ": 1344, "FWD": 684, "REV": 684, "Others": 420},
    "DEV": {"EQ": 196, "FWD": 63, "REV": 63, "Others": 43},
    "TEST": {"EQ": 1386, "FWD": 814, "REV": 814, "Others": 494},
}
