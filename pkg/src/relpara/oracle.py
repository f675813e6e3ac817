"""Entailment relation oracle built on a bidirectional NLI backend.

A 3-class NLI backend is run forwards (x as premise) and backwards (y as
premise) over a sentence pair; the two directional label distributions are
composed into a distribution over the six-way relation set, and the argmax
(with a fixed tie-break order) is the oracle's verdict. The module also
provides weak labeling and class balancing for paraphrase corpora.
"""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import BackendError
from .relations import (
    CONTROL_RELATIONS,
    RELATION_ORDER,
    EntailmentRelation,
    NLILabel,
    PairSource,
    RelationAnnotatedPair,
    SentencePair,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NLIDistribution:
    """A proper distribution over the three NLI labels."""

    p_e: float
    p_n: float
    p_c: float

    def __post_init__(self) -> None:
        for p in (self.p_e, self.p_n, self.p_c):
            if not -1e-9 <= p <= 1 + 1e-9:
                raise ValueError(f"probability out of range: {p}")
        if abs(self.p_e + self.p_n + self.p_c - 1.0) > 1e-6:
            raise ValueError("NLI distribution must sum to 1")

    def prob(self, label: NLILabel) -> float:
        return {NLILabel.E: self.p_e, NLILabel.N: self.p_n, NLILabel.C: self.p_c}[label]

    def argmax(self) -> NLILabel:
        best = max((self.p_e, self.p_n, self.p_c))
        for label in (NLILabel.E, NLILabel.N, NLILabel.C):
            if self.prob(label) == best:
                return label
        raise AssertionError("unreachable")


class NLIBackend(Protocol):
    """Anything that can classify a premise/hypothesis token pair."""

    def classify(
        self, premise: Sequence[str], hypothesis: Sequence[str]
    ) -> NLIDistribution: ...


class SyntheticWorldBackend:
    """Deterministic NLI rules over token sets, for desk-scale verification.

    In this world a sentence means exactly its set of tokens: a hypothesis
    whose token set is contained in the premise's is entailed (dropping
    tokens loses information), a hypothesis introducing new tokens is
    neutral, and a pair differing in the presence of the negation marker
    contradicts both ways. Ground-truth relations are therefore computable,
    which makes the whole RL loop testable without trained models.
    """

    def __init__(self, negation_marker: str = "not") -> None:
        self.negation_marker = negation_marker

    def classify(
        self, premise: Sequence[str], hypothesis: Sequence[str]
    ) -> NLIDistribution:
        p_set, h_set = set(premise), set(hypothesis)
        if (self.negation_marker in p_set) != (self.negation_marker in h_set):
            return NLIDistribution(0.0, 0.0, 1.0)
        if h_set <= p_set:
            return NLIDistribution(1.0, 0.0, 0.0)
        return NLIDistribution(0.0, 1.0, 0.0)


class CallableNLIBackend:
    """Adapter for an external learned classifier.

    Wraps a callable mapping (premise_text, hypothesis_text) to an
    (entailment, neutral, contradiction) probability triple. Any failure
    in the callable surfaces as :class:`BackendError`.
    """

    def __init__(self, fn) -> None:
        self._fn = fn

    def classify(
        self, premise: Sequence[str], hypothesis: Sequence[str]
    ) -> NLIDistribution:
        try:
            p_e, p_n, p_c = self._fn(" ".join(premise), " ".join(hypothesis))
            return NLIDistribution(float(p_e), float(p_n), float(p_c))
        except Exception as exc:
            raise BackendError(f"NLI callable backend failed: {exc}") from exc


class HTTPNLIBackend:
    """NLI backend served over HTTP.

    POSTs ``{"premise": ..., "hypothesis": ...}`` to the endpoint and
    expects ``{"p_e": ..., "p_n": ..., "p_c": ...}`` back.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0) -> None:
        self.endpoint = endpoint
        self.timeout = timeout

    def classify(
        self, premise: Sequence[str], hypothesis: Sequence[str]
    ) -> NLIDistribution:
        import requests

        try:
            resp = requests.post(
                self.endpoint,
                json={"premise": " ".join(premise), "hypothesis": " ".join(hypothesis)},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
            return NLIDistribution(
                float(payload["p_e"]), float(payload["p_n"]), float(payload["p_c"])
            )
        except BackendError:
            raise
        except Exception as exc:
            raise BackendError(f"NLI endpoint {self.endpoint} failed: {exc}") from exc


def classify(
    premise: Sequence[str], hypothesis: Sequence[str], backend: NLIBackend
) -> NLIDistribution:
    """Run one directional NLI pass through the backend."""
    if not premise or not hypothesis:
        raise ValueError("premise and hypothesis must be non-empty")
    return backend.classify(premise, hypothesis)


_CASE_TABLE = {
    (NLILabel.E, NLILabel.E): EntailmentRelation.EQ,
    (NLILabel.E, NLILabel.N): EntailmentRelation.FWD,
    (NLILabel.N, NLILabel.E): EntailmentRelation.REV,
    (NLILabel.C, NLILabel.C): EntailmentRelation.CONTRA,
    (NLILabel.N, NLILabel.N): EntailmentRelation.NEUTRAL,
}


def derive_relation(forward: NLILabel, backward: NLILabel) -> EntailmentRelation:
    """Map a (forward, backward) NLI label pair to an entailment relation.

    (E,E) is equivalence, (E,N) forward entailment, (N,E) reverse
    entailment, (C,C) contradiction, (N,N) neutral; every other
    combination is invalid. Total over all nine combinations.
    """
    return _CASE_TABLE.get((forward, backward), EntailmentRelation.INVALID)


@dataclass(frozen=True)
class OracleVerdict:
    """Relation verdict plus the full likelihood breakdown behind it."""

    relation: EntailmentRelation
    likelihoods: Mapping[EntailmentRelation, float]


def oracle_verdict(
    x: Sequence[str], y: Sequence[str], backend: NLIBackend
) -> OracleVerdict:
    """Bidirectional relation verdict for a sentence pair.

    The two directional distributions are composed assuming independence:
    each relation's likelihood is the product of the directional label
    probabilities that define it in the case table, and INVALID absorbs
    the remaining mass. The verdict is the argmax under the fixed
    tie-break order EQ, FWD, REV, CONTRA, NEUTRAL, INVALID.
    """
    fwd = classify(x, y, backend)
    bwd = classify(y, x, backend)
    likelihoods = {
        EntailmentRelation.EQ: fwd.p_e * bwd.p_e,
        EntailmentRelation.FWD: fwd.p_e * bwd.p_n,
        EntailmentRelation.REV: fwd.p_n * bwd.p_e,
        EntailmentRelation.CONTRA: fwd.p_c * bwd.p_c,
        EntailmentRelation.NEUTRAL: fwd.p_n * bwd.p_n,
    }
    likelihoods[EntailmentRelation.INVALID] = max(
        0.0, 1.0 - sum(likelihoods.values())
    )
    best = max(likelihoods.values())
    relation = next(r for r in RELATION_ORDER if likelihoods[r] == best)
    return OracleVerdict(relation=relation, likelihoods=likelihoods)


@dataclass
class DivergenceStats:
    """Outcome counts from weak-labeling a paraphrase corpus."""

    total: int = 0
    skipped: int = 0
    per_relation: Counter = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.per_relation is None:
            self.per_relation = Counter()

    @property
    def divergent(self) -> int:
        return sum(
            self.per_relation[r]
            for r in (
                EntailmentRelation.CONTRA,
                EntailmentRelation.NEUTRAL,
                EntailmentRelation.INVALID,
            )
        )

    @property
    def divergent_fraction(self) -> float:
        return self.divergent / self.total if self.total else 0.0

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "skipped": self.skipped,
            "divergent_fraction": self.divergent_fraction,
            "per_relation": {r.value: self.per_relation[r] for r in RELATION_ORDER},
        }


def weak_label_corpus(
    items: Iterable[SentencePair | Mapping], backend: NLIBackend
) -> tuple[list[RelationAnnotatedPair], DivergenceStats]:
    """Annotate paraphrase pairs with oracle relations (source=ORACLE).

    Accepts ready-made :class:`SentencePair` values or raw ``{"x", "y"}``
    records; malformed records are skipped and counted rather than
    aborting the stream. Stats report the semantically-divergent fraction
    (pairs labeled CONTRA, NEUTRAL, or INVALID).
    """
    labeled: list[RelationAnnotatedPair] = []
    stats = DivergenceStats()
    for item in items:
        if isinstance(item, SentencePair):
            pair = item
        else:
            try:
                pair = SentencePair.from_text(str(item["x"]), str(item["y"]))
            except (KeyError, TypeError, ValueError):
                stats.skipped += 1
                continue
        verdict = oracle_verdict(pair.x, pair.y, backend)
        labeled.append(
            RelationAnnotatedPair(
                pair=pair, relation=verdict.relation, source=PairSource.ORACLE
            )
        )
        stats.total += 1
        stats.per_relation[verdict.relation] += 1
    return labeled, stats


class BalanceMode(str, Enum):
    UPSAMPLE = "UPSAMPLE"
    DOWNSAMPLE = "DOWNSAMPLE"


def balance_corpus(
    pairs: Sequence[RelationAnnotatedPair], mode: BalanceMode, seed: int
) -> list[RelationAnnotatedPair]:
    """Equalize class counts across the three control relations.

    DOWNSAMPLE draws each class down to the minimum class count without
    replacement; UPSAMPLE keeps every original and adds draws with
    replacement up to the maximum class count. Deterministic given the
    seed.

    Raises:
        ValueError: on non-control relations in the input or an empty class.
    """
    by_relation: dict[EntailmentRelation, list[RelationAnnotatedPair]] = {
        r: [] for r in CONTROL_RELATIONS
    }
    for p in pairs:
        if p.relation not in by_relation:
            raise ValueError(
                f"balance_corpus expects control relations only, got {p.relation.value}"
            )
        by_relation[p.relation].append(p)
    counts = {r: len(v) for r, v in by_relation.items()}
    if min(counts.values()) == 0:
        empty = [r.value for r, n in counts.items() if n == 0]
        raise ValueError(f"cannot balance: empty relation class(es) {empty}")

    rng = random.Random(seed)
    out: list[RelationAnnotatedPair] = []
    if mode is BalanceMode.DOWNSAMPLE:
        target = min(counts.values())
        for r in CONTROL_RELATIONS:
            out.extend(rng.sample(by_relation[r], target))
    else:
        target = max(counts.values())
        for r in CONTROL_RELATIONS:
            bucket = by_relation[r]
            out.extend(bucket)
            out.extend(rng.choices(bucket, k=target - len(bucket)))
    return out
