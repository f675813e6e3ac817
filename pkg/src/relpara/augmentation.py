"""Label-projected paraphrastic augmentation for entailment data.

Replacing a premise or hypothesis with a paraphrase changes what label
the pair should carry, depending on the paraphrase's entailment relation
and which side it lands on. Entailment composition gives a fixed
projection table: equivalents preserve the label everywhere, a more
specific premise or a more general hypothesis preserves entailment, and
the remaining combinations become unknown and are dropped from training.
Candidates where the oracle disputes a paraphrase's assumed relation can
be exported for human adjudication.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .oracle import NLIBackend, oracle_verdict
from .relations import CONTROL_RELATIONS, EntailmentRelation, tokenize

log = logging.getLogger(__name__)


class Variant(str, Enum):
    """How one side of an entailment pair was produced."""

    ORIG = "ORIG"
    EQ_PARA = "EQ_PARA"
    REV_PARA = "REV_PARA"
    FWD_PARA = "FWD_PARA"


class BinaryLabel(str, Enum):
    E = "E"
    NE = "NE"


class ProjectedLabel(str, Enum):
    E = "E"
    NE = "NE"
    U = "U"


VARIANT_BY_RELATION = {
    EntailmentRelation.EQ: Variant.EQ_PARA,
    EntailmentRelation.FWD: Variant.FWD_PARA,
    EntailmentRelation.REV: Variant.REV_PARA,
}
RELATION_BY_VARIANT = {v: r for r, v in VARIANT_BY_RELATION.items()}


def project_label(
    original: BinaryLabel,
    premise_variant: Variant,
    hypothesis_variant: Variant,
) -> ProjectedLabel:
    """Label of a pair after swapping in paraphrased sides.

    A generalized premise or a specialized hypothesis breaks the
    entailment chain entirely (unknown either way). A generalized
    hypothesis is still entailed when the original was, but a
    non-entailment stops being informative. Equivalent paraphrases and a
    specialized premise preserve the label. Total over all 16 variant
    combinations.
    """
    if premise_variant is Variant.FWD_PARA or hypothesis_variant is Variant.REV_PARA:
        return ProjectedLabel.U
    if hypothesis_variant is Variant.FWD_PARA:
        return ProjectedLabel.E if original is BinaryLabel.E else ProjectedLabel.U
    return ProjectedLabel(original.value)


@dataclass(frozen=True)
class EntailmentExample:
    """One binary-labeled premise/hypothesis row."""

    premise: str
    hypothesis: str
    label: BinaryLabel

    def to_record(self) -> dict:
        return {
            "premise": self.premise,
            "hypothesis": self.hypothesis,
            "label": self.label.value,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "EntailmentExample":
        return cls(
            premise=str(record["premise"]),
            hypothesis=str(record["hypothesis"]),
            label=BinaryLabel(record["label"]),
        )


@dataclass(frozen=True)
class AugmentedExample:
    """An augmented row plus where each side came from."""

    premise: str
    hypothesis: str
    label: BinaryLabel
    premise_variant: Variant
    hypothesis_variant: Variant
    projected_from: BinaryLabel
    original_premise: str
    original_hypothesis: str

    def to_record(self) -> dict:
        return {
            "premise": self.premise,
            "hypothesis": self.hypothesis,
            "label": self.label.value,
            "provenance": {
                "premise_variant": self.premise_variant.value,
                "hypothesis_variant": self.hypothesis_variant.value,
                "projected_from": self.projected_from.value,
                "original_premise": self.original_premise,
                "original_hypothesis": self.original_hypothesis,
            },
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "AugmentedExample":
        prov = record["provenance"]
        return cls(
            premise=str(record["premise"]),
            hypothesis=str(record["hypothesis"]),
            label=BinaryLabel(record["label"]),
            premise_variant=Variant(prov["premise_variant"]),
            hypothesis_variant=Variant(prov["hypothesis_variant"]),
            projected_from=BinaryLabel(prov["projected_from"]),
            original_premise=str(prov["original_premise"]),
            original_hypothesis=str(prov["original_hypothesis"]),
        )


class AugmentationMode(str, Enum):
    AWARE = "AWARE"
    UNAWARE = "UNAWARE"


@dataclass
class AugmentationStats:
    generated: int = 0
    emitted: int = 0
    dropped_unknown: int = 0
    paraphrase_failures: int = 0

    def to_json(self) -> dict:
        return {
            "generated": self.generated,
            "emitted": self.emitted,
            "dropped_unknown": self.dropped_unknown,
            "paraphrase_failures": self.paraphrase_failures,
        }


# A paraphraser takes (sentence, relation-or-None) and returns a paraphrase;
# None asks for a relation-unaware paraphrase.
Paraphraser = Callable[[str, EntailmentRelation | None], str]


def _variants_for(
    sentence: str,
    paraphraser: Paraphraser,
    relations: Sequence[EntailmentRelation],
    mode: AugmentationMode,
    stats: AugmentationStats,
) -> dict[Variant, str]:
    variants: dict[Variant, str] = {Variant.ORIG: sentence}
    if mode is AugmentationMode.UNAWARE:
        try:
            variants[Variant.EQ_PARA] = paraphraser(sentence, None)
        except Exception as exc:
            stats.paraphrase_failures += 1
            log.warning("paraphraser failed on %r: %s", sentence, exc)
        return variants
    for relation in relations:
        try:
            variants[VARIANT_BY_RELATION[relation]] = paraphraser(sentence, relation)
        except Exception as exc:
            stats.paraphrase_failures += 1
            log.warning("paraphraser failed on %r (%s): %s", sentence, relation, exc)
    return variants


def generate_augmentations(
    rows: Sequence[EntailmentExample],
    paraphraser: Paraphraser,
    relations: Sequence[EntailmentRelation] = (EntailmentRelation.EQ,),
    mode: AugmentationMode = AugmentationMode.AWARE,
) -> tuple[list[AugmentedExample], AugmentationStats]:
    """Emit every paraphrase-augmented variant pair with a projected label.

    Unaware mode generates one paraphrase per sentence and assumes it is
    an equivalent. Combinations projecting to unknown are dropped but
    counted; paraphraser failures skip that sentence's variant, also
    counted.
    """
    for relation in relations:
        if relation not in CONTROL_RELATIONS:
            raise ValueError(f"augmentation relations must be control relations, got {relation}")
    out: list[AugmentedExample] = []
    stats = AugmentationStats()
    ordered = [r for r in CONTROL_RELATIONS if r in set(relations)]
    for row in rows:
        premise_variants = _variants_for(
            row.premise, paraphraser, ordered, mode, stats
        )
        hypothesis_variants = _variants_for(
            row.hypothesis, paraphraser, ordered, mode, stats
        )
        for (pv, premise), (hv, hypothesis) in product(
            premise_variants.items(), hypothesis_variants.items()
        ):
            if pv is Variant.ORIG and hv is Variant.ORIG:
                continue
            stats.generated += 1
            projected = project_label(row.label, pv, hv)
            if projected is ProjectedLabel.U:
                stats.dropped_unknown += 1
                continue
            out.append(
                AugmentedExample(
                    premise=premise,
                    hypothesis=hypothesis,
                    label=BinaryLabel(projected.value),
                    premise_variant=pv,
                    hypothesis_variant=hv,
                    projected_from=row.label,
                    original_premise=row.premise,
                    original_hypothesis=row.hypothesis,
                )
            )
    stats.emitted = len(out)
    return out, stats


# ---------------------------------------------------------------------------
# Adversarial-candidate export


ADVERSARIAL_CSV_COLUMNS = (
    "original",
    "paraphrase",
    "side",
    "variant",
    "assumed_relation",
    "oracle_relation",
    "pair_label",
)


def export_adversarial_candidates(
    rows: Sequence[AugmentedExample], oracle_backend: NLIBackend
) -> list[dict]:
    """Rows whose paraphrase the oracle labels differently than assumed.

    Each paraphrased side is checked against its original sentence; a
    verdict that disagrees with the variant's assumed relation makes the
    row a candidate for human adjudication. Nothing is auto-relabeled.
    """
    candidates: list[dict] = []
    for row in rows:
        sides = (
            ("premise", row.premise_variant, row.original_premise, row.premise),
            ("hypothesis", row.hypothesis_variant, row.original_hypothesis, row.hypothesis),
        )
        for side, variant, original, current in sides:
            if variant is Variant.ORIG:
                continue
            assumed = RELATION_BY_VARIANT[variant]
            verdict = oracle_verdict(tokenize(original), tokenize(current), oracle_backend)
            if verdict.relation is not assumed:
                candidates.append(
                    {
                        "original": original,
                        "paraphrase": current,
                        "side": side,
                        "variant": variant.value,
                        "assumed_relation": assumed.value,
                        "oracle_relation": verdict.relation.value,
                        "pair_label": row.label.value,
                    }
                )
    return candidates


def write_adversarial_csv(candidates: Sequence[Mapping], path: str | Path) -> int:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ADVERSARIAL_CSV_COLUMNS)
        writer.writeheader()
        for row in candidates:
            writer.writerow({k: row[k] for k in ADVERSARIAL_CSV_COLUMNS})
    return len(candidates)


# ---------------------------------------------------------------------------
# Toy downstream probe


@dataclass
class EntailmentProbe:
    """Linear bag-of-tokens classifier exercising the augmented data path.

    Deliberately small: it validates that augmented rows are consumable
    and carry signal, not that any published accuracy is reproduced.
    """

    seed: int = 0
    _vectorizer: object = field(default=None, repr=False)
    _model: object = field(default=None, repr=False)

    @staticmethod
    def _features(row: EntailmentExample | AugmentedExample) -> dict[str, int]:
        feats: dict[str, int] = {}
        for t in tokenize(row.premise):
            feats[f"p:{t}"] = feats.get(f"p:{t}", 0) + 1
        for t in tokenize(row.hypothesis):
            feats[f"h:{t}"] = feats.get(f"h:{t}", 0) + 1
        return feats

    def fit(self, rows: Sequence[EntailmentExample | AugmentedExample]) -> "EntailmentProbe":
        from sklearn.feature_extraction import DictVectorizer
        from sklearn.linear_model import LogisticRegression

        if len({row.label for row in rows}) < 2:
            raise ValueError("probe training needs both labels present")
        self._vectorizer = DictVectorizer()
        features = self._vectorizer.fit_transform(self._features(r) for r in rows)
        self._model = LogisticRegression(max_iter=1000, random_state=self.seed)
        self._model.fit(features, [row.label.value for row in rows])
        return self

    def accuracy(self, rows: Sequence[EntailmentExample | AugmentedExample]) -> float:
        if self._model is None:
            raise RuntimeError("probe is not fitted")
        features = self._vectorizer.transform(self._features(r) for r in rows)
        predictions = self._model.predict(features)
        hits = sum(p == row.label.value for p, row in zip(predictions, rows))
        return hits / len(rows)
