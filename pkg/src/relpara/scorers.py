"""Rollout scoring: similarity, diversity, consistency, adversary penalty.

Four per-sample scores feed the generator's reward. Semantic similarity
r_s keeps outputs on-topic, expression diversity r_d keeps them from
copying the input, relation consistency r_l is the oracle's likelihood of
the requested relation, and the adversary penalty p_l suppresses surface
artifacts that give the relation away. Similarity is thresholded into a
band and gates the other three; the combined score f mixes them with
fixed weights and averages over rollouts.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Collection, Mapping, Protocol, Sequence

from .errors import BackendError
from .oracle import NLIBackend, oracle_verdict
from .relations import (
    CONTROL_RELATIONS,
    EntailmentRelation,
    RewardConfig,
)

log = logging.getLogger(__name__)

Tokens = Sequence[str]


# ---------------------------------------------------------------------------
# Semantic similarity r_s


class SimilarityBackend(Protocol):
    """Scores how much of the input's meaning a candidate keeps, in [0,1]."""

    def score(self, x: Tokens, y_hat: Tokens) -> float: ...


class TokenOverlapSimilarity:
    """Deterministic reference backend: clipped token-overlap F1.

    Precision and recall come from multiset token overlap after removing
    stopwords; the default stopword set is empty, so every token counts.
    A learned scorer can replace this behind the same protocol.
    """

    def __init__(self, stopwords: Collection[str] = ()) -> None:
        self.stopwords = frozenset(stopwords)

    def _content(self, tokens: Tokens) -> Counter:
        return Counter(t for t in tokens if t not in self.stopwords)

    def score(self, x: Tokens, y_hat: Tokens) -> float:
        cx, cy = self._content(x), self._content(y_hat)
        if not cx or not cy:
            return 1.0 if cx == cy else 0.0
        overlap = sum((cx & cy).values())
        if overlap == 0:
            return 0.0
        precision = overlap / sum(cy.values())
        recall = overlap / sum(cx.values())
        return 2 * precision * recall / (precision + recall)


class CallableSimilarity:
    """Adapter wrapping an external (text, text) -> [0,1] scorer."""

    def __init__(self, fn) -> None:
        self._fn = fn

    def score(self, x: Tokens, y_hat: Tokens) -> float:
        try:
            return float(self._fn(" ".join(x), " ".join(y_hat)))
        except Exception as exc:
            raise BackendError(f"similarity backend failed: {exc}") from exc


def similarity(x: Tokens, y_hat: Tokens, backend: SimilarityBackend) -> float:
    """Raw semantic similarity score before thresholding."""
    value = backend.score(x, y_hat)
    if not 0.0 <= value <= 1.0:
        raise BackendError(f"similarity backend returned {value}, outside [0,1]")
    return value


# ---------------------------------------------------------------------------
# Expression diversity r_d


def _ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def modified_bleu(candidate: Tokens, reference: Tokens) -> float:
    """Sentence-level 4-gram BLEU variant used inside the diversity score.

    Geometric mean of clipped n-gram precisions with the brevity penalty
    forced to 1. Zero counts at orders 2..4 get add-1 smoothing so short
    prefixes keep a usable signal; a zero unigram precision short-circuits
    to 0 so token-disjoint pairs score exactly 0.
    """
    log_sum = 0.0
    for n in range(1, 5):
        cand = _ngrams(candidate, n)
        total = sum(cand.values())
        ref = _ngrams(reference, n)
        matched = sum(min(count, ref[gram]) for gram, count in cand.items())
        if n == 1:
            if matched == 0:
                return 0.0
            p = matched / total
        elif matched == 0:
            p = (matched + 1) / (total + 1)
        else:
            p = matched / total
        log_sum += math.log(p)
    return math.exp(log_sum / 4)


def diversity(x: Tokens, y_hat: Tokens) -> float:
    """How differently the candidate is worded: 1 minus its BLEU against x."""
    return 1.0 - modified_bleu(y_hat, x)


# ---------------------------------------------------------------------------
# Relation consistency r_l and adversary penalty p_l


def consistency(
    x: Tokens,
    y_hat: Tokens,
    relation: EntailmentRelation,
    oracle_backend: NLIBackend,
) -> float:
    """Oracle likelihood of the requested relation for (x, y_hat)."""
    if relation not in CONTROL_RELATIONS:
        raise ValueError(f"consistency requires a control relation, got {relation.value}")
    return oracle_verdict(x, y_hat, oracle_backend).likelihoods[relation]


class AdversaryPredictor(Protocol):
    """Hypothesis-only relation classifier, as the scorer sees it."""

    trained: bool

    def predict(self, y_hat: Tokens) -> Mapping[EntailmentRelation, float]: ...


def adversary_penalty(
    y_hat: Tokens,
    relation: EntailmentRelation,
    adversary: AdversaryPredictor | None,
) -> float:
    """Penalty for a paraphrase that betrays its relation on its own.

    Only fires when the adversary's argmax agrees with the control
    relation; an absent or untrained adversary contributes nothing.
    """
    if relation not in CONTROL_RELATIONS:
        raise ValueError(
            f"adversary_penalty requires a control relation, got {relation.value}"
        )
    if adversary is None or not adversary.trained:
        return 0.0
    dist = adversary.predict(y_hat)
    best = max(dist[r] for r in CONTROL_RELATIONS)
    predicted = next(r for r in CONTROL_RELATIONS if dist[r] == best)
    return float(dist[relation]) if predicted is relation else 0.0


# ---------------------------------------------------------------------------
# Thresholding and the combined score


def apply_thresholds(
    r_s: float, r_d: float, r_l: float, p_l: float, config: RewardConfig
) -> tuple[float, float, float, float]:
    """Band-pass the similarity score; it gates everything else.

    Similarity outside the closed [sim_low, sim_high] band zeroes out, and
    a zeroed similarity zeroes the remaining three scores too, so neither
    off-topic output nor near-copies earn any reward.
    """
    r_s_t = r_s if config.sim_low <= r_s <= config.sim_high else 0.0
    if r_s_t > 0.0:
        return r_s_t, r_d, r_l, p_l
    return 0.0, 0.0, 0.0, 0.0


@dataclass(frozen=True)
class ScorerBackends:
    """Everything the evaluator needs to score a candidate."""

    similarity: SimilarityBackend
    oracle: NLIBackend
    adversary: AdversaryPredictor | None = None


@dataclass(frozen=True)
class ScoreReport:
    """Raw and thresholded scores for one (x, y_hat, relation) triple."""

    raw_r_s: float
    raw_r_d: float
    raw_r_l: float
    raw_p_l: float
    r_s: float
    r_d: float
    r_l: float
    p_l: float
    f: float


def _blend(
    r_s: float, r_d: float, r_l: float, p_l: float, config: RewardConfig
) -> float:
    return (
        config.alpha * (r_l - p_l) + config.beta * r_s + config.delta * r_d
    )


def score_sample(
    x: Tokens,
    y_hat: Tokens,
    relation: EntailmentRelation,
    config: RewardConfig,
    backends: ScorerBackends,
) -> ScoreReport:
    """Score a single candidate; backend failures score 0 and are logged."""
    try:
        raw_r_s = similarity(x, y_hat, backends.similarity)
        raw_r_d = diversity(x, y_hat)
        raw_r_l = consistency(x, y_hat, relation, backends.oracle)
        raw_p_l = adversary_penalty(y_hat, relation, backends.adversary)
    except BackendError as exc:
        log.warning("scorer backend failure, sample scored 0: %s", exc)
        return ScoreReport(0, 0, 0, 0, 0, 0, 0, 0, 0.0)
    r_s, r_d, r_l, p_l = apply_thresholds(raw_r_s, raw_r_d, raw_r_l, raw_p_l, config)
    return ScoreReport(
        raw_r_s=raw_r_s,
        raw_r_d=raw_r_d,
        raw_r_l=raw_r_l,
        raw_p_l=raw_p_l,
        r_s=r_s,
        r_d=r_d,
        r_l=r_l,
        p_l=p_l,
        f=_blend(r_s, r_d, r_l, p_l, config),
    )


def combined_score(
    x: Tokens,
    relation: EntailmentRelation,
    rollouts: Sequence[Tokens],
    config: RewardConfig,
    backends: ScorerBackends,
) -> float:
    """Mean thresholded blend over a set of rollout completions."""
    if not rollouts:
        raise ValueError("combined_score requires at least one rollout")
    return sum(
        score_sample(x, y_hat, relation, config, backends).f for y_hat in rollouts
    ) / len(rollouts)
