"""Corpus evaluation: BLEU, iBLEU, Diversity, R-Consistency, re-ranking.

BLEU follows the standard WMT reference scorer's default behavior (13a
tokenization, corpus-level clipped 4-gram precisions, exponential
smoothing of zero counts, closest-reference length for the brevity
penalty) so published numbers are comparable. iBLEU discounts BLEU
against the source to punish copying; Diversity rewards rewording;
R-Consistency checks generated outputs against the oracle's relation
verdict.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .oracle import NLIBackend, oracle_verdict
from .relations import (
    CONTROL_RELATIONS,
    DecodeStrategy,
    EntailmentRelation,
    GenerationRequest,
    RewardConfig,
    tokenize,
)
from .scorers import ScorerBackends, modified_bleu, score_sample

log = logging.getLogger(__name__)

NGRAM_ORDER = 4
_LOG_ZERO = -9999999999


# ---------------------------------------------------------------------------
# Tokenization (mteval-13a compatible)


def tokenize_13a(line: str) -> str:
    """Language-independent tokenization used by the WMT BLEU tooling."""
    norm = line
    norm = norm.replace("<skipped>", "")
    norm = norm.replace("-\n", "")
    norm = norm.replace("\n", " ")
    norm = norm.replace("&quot;", '"')
    norm = norm.replace("&amp;", "&")
    norm = norm.replace("&lt;", "<")
    norm = norm.replace("&gt;", ">")
    norm = f" {norm} "
    norm = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", r" \1 ", norm)
    norm = re.sub(r"([^0-9])([\.,])", r"\1 \2 ", norm)
    norm = re.sub(r"([\.,])([^0-9])", r" \1 \2", norm)
    norm = re.sub(r"([0-9])(-)", r"\1 \2 ", norm)
    norm = re.sub(r"\s+", " ", norm)
    return norm.strip()


def _extract_ngrams(tokens: Sequence[str], max_order: int = NGRAM_ORDER) -> Counter:
    counts: Counter = Counter()
    for n in range(1, max_order + 1):
        for i in range(len(tokens) - n + 1):
            counts[tuple(tokens[i : i + n])] += 1
    return counts


def _merged_ref_stats(
    sys_tokens: Sequence[str], refs: Sequence[Sequence[str]]
) -> tuple[Counter, int]:
    """Max-merged reference n-grams and the closest reference length.

    Length ties between references break toward the shorter one.
    """
    merged: Counter = Counter()
    closest_diff: int | None = None
    closest_len = 0
    for ref in refs:
        diff = abs(len(sys_tokens) - len(ref))
        if closest_diff is None or diff < closest_diff:
            closest_diff = diff
            closest_len = len(ref)
        elif diff == closest_diff and len(ref) < closest_len:
            closest_len = len(ref)
        for gram, count in _extract_ngrams(ref).items():
            if count > merged[gram]:
                merged[gram] = count
    return merged, closest_len


def _my_log(num: float) -> float:
    return _LOG_ZERO if num == 0.0 else math.log(num)


# ---------------------------------------------------------------------------
# Corpus BLEU


def bleu(
    candidates: str | Sequence[str],
    reference_sets: Sequence[str] | Sequence[Sequence[str]],
) -> float:
    """Corpus BLEU in [0, 100].

    Accepts either one candidate with its reference list or parallel
    sequences of candidates and per-candidate reference lists. An empty
    candidate contributes zero matches rather than raising.
    """
    if isinstance(candidates, str):
        cand_list = [candidates]
        ref_list: Sequence[Sequence[str]] = [list(reference_sets)]  # type: ignore[list-item]
    else:
        cand_list = list(candidates)
        ref_list = [list(refs) for refs in reference_sets]  # type: ignore[union-attr]
    if len(cand_list) != len(ref_list):
        raise ValueError("candidates and reference sets must be parallel")
    if any(not refs for refs in ref_list):
        raise ValueError("every candidate needs at least one reference")

    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    sys_len = 0
    ref_len = 0
    for cand, refs in zip(cand_list, ref_list):
        sys_tokens = tokenize_13a(cand).split()
        ref_tokens = [tokenize_13a(r).split() for r in refs]
        sys_len += len(sys_tokens)
        merged, closest_len = _merged_ref_stats(sys_tokens, ref_tokens)
        ref_len += closest_len
        for gram, count in _extract_ngrams(sys_tokens).items():
            n = len(gram)
            correct[n - 1] += min(count, merged[gram])
            total[n - 1] += count
    return _compute_bleu(correct, total, sys_len, ref_len)


def _compute_bleu(
    correct: Sequence[int], total: Sequence[int], sys_len: int, ref_len: int
) -> float:
    precisions = [0.0] * NGRAM_ORDER
    smooth_mteval = 1.0
    for n in range(NGRAM_ORDER):
        if total[n] == 0:
            break
        if correct[n] == 0:
            smooth_mteval *= 2
            precisions[n] = 100.0 / (smooth_mteval * total[n])
        else:
            precisions[n] = 100.0 * correct[n] / total[n]
    if sys_len < ref_len:
        brevity_penalty = math.exp(1 - ref_len / sys_len) if sys_len > 0 else 0.0
    else:
        brevity_penalty = 1.0
    return brevity_penalty * math.exp(
        sum(_my_log(p) for p in precisions) / NGRAM_ORDER
    )


# ---------------------------------------------------------------------------
# iBLEU and Diversity


IBLEU_REFERENCE_WEIGHT = 0.8
IBLEU_SOURCE_WEIGHT = 0.2


def ibleu(
    candidates: str | Sequence[str],
    reference_sets: Sequence[str] | Sequence[Sequence[str]],
    sources: str | Sequence[str],
) -> float:
    """BLEU against references discounted by BLEU against the source.

    0.8 * BLEU(candidates, references) - 0.2 * BLEU(candidates, sources).
    """
    if isinstance(candidates, str):
        source_sets: Sequence[Sequence[str]] | Sequence[str] = [sources]  # type: ignore[list-item]
    else:
        source_sets = [[s] for s in sources]
    return IBLEU_REFERENCE_WEIGHT * bleu(
        candidates, reference_sets
    ) - IBLEU_SOURCE_WEIGHT * bleu(candidates, source_sets)


def diversity_metric(candidate: str, source: str) -> float:
    """Per-pair rewording score in [0, 100]; copies score exactly 0."""
    return 100.0 * (
        1.0 - modified_bleu(tokenize_13a(candidate).split(), tokenize_13a(source).split())
    )


# ---------------------------------------------------------------------------
# R-Consistency and corpus evaluation


@dataclass
class EvalRow:
    """One evaluation instance: input, generated output, gold references."""

    x: str
    y_hat: str
    references: list[str] = field(default_factory=list)
    relation: EntailmentRelation | None = None
    metrics: dict[str, float] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "x": self.x,
            "y_hat": self.y_hat,
            "references": list(self.references),
            "relation": self.relation.value if self.relation else None,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "EvalRow":
        rel = record.get("relation")
        return cls(
            x=str(record["x"]),
            y_hat=str(record["y_hat"]),
            references=[str(r) for r in record.get("references", [])],
            relation=EntailmentRelation(rel) if rel else None,
        )


def _consistency_counts(
    rows: Sequence[EvalRow], oracle_backend: NLIBackend
) -> tuple[int, int, int]:
    matched = considered = skipped = 0
    for row in rows:
        if row.relation is None or row.relation not in CONTROL_RELATIONS:
            skipped += 1
            continue
        considered += 1
        verdict = oracle_verdict(tokenize(row.x), tokenize(row.y_hat), oracle_backend)
        if verdict.relation is row.relation:
            matched += 1
    return matched, considered, skipped


def r_consistency(rows: Sequence[EvalRow], oracle_backend: NLIBackend) -> float:
    """Percentage of rows whose oracle verdict equals the requested relation.

    Rows without a control relation are excluded from the denominator and
    logged.
    """
    matched, considered, skipped = _consistency_counts(rows, oracle_backend)
    if skipped:
        log.info("r_consistency: excluded %d row(s) without a control relation", skipped)
    if considered == 0:
        raise ValueError("r_consistency needs at least one row with a control relation")
    return 100.0 * matched / considered


def evaluate(
    rows: Sequence[EvalRow], oracle_backend: NLIBackend | None = None
) -> dict:
    """Corpus metrics: BLEU, iBLEU, mean Diversity, optional R-Consistency."""
    if not rows:
        raise ValueError("evaluate needs at least one row")
    report: dict = {"n": len(rows)}
    scored = [r for r in rows if r.references]
    if scored:
        cands = [r.y_hat for r in scored]
        refs = [r.references for r in scored]
        report["bleu"] = bleu(cands, refs)
        report["ibleu"] = ibleu(cands, refs, [r.x for r in scored])
    report["diversity"] = sum(
        diversity_metric(r.y_hat, r.x) for r in rows
    ) / len(rows)
    if oracle_backend is not None:
        matched, considered, skipped = _consistency_counts(rows, oracle_backend)
        if considered:
            report["r_consistency"] = 100.0 * matched / considered
        if skipped:
            report["rows_without_relation"] = skipped
    return report


# ---------------------------------------------------------------------------
# Re-ranking baseline


class ParaphraseSampler(Protocol):
    """The slice of the generator the re-ranker needs."""

    def generate(self, request: GenerationRequest, rng=None) -> tuple[str, ...]: ...


def rerank(
    model: ParaphraseSampler,
    x: str,
    relation: EntailmentRelation,
    k: int,
    config: RewardConfig,
    backends: ScorerBackends,
    seed: int = 0,
    min_len: int = 5,
    max_len: int = 40,
) -> tuple[str, ...]:
    """Sample k nucleus candidates and keep the highest single-sample score.

    Draws come sequentially from one seeded sampler, so the candidate pool
    for a smaller k is a prefix of the pool for a larger k and the best
    score can only improve with k. Ties keep the earliest sample. Failed
    draws shrink the pool; an empty pool raises.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    from .generator import make_rng

    rng = make_rng(seed)
    request = GenerationRequest(
        x=x,
        relation=relation,
        decode=DecodeStrategy.NUCLEUS,
        min_len=min_len,
        max_len=max_len,
    )
    best: tuple[str, ...] | None = None
    best_f = -math.inf
    drawn = 0
    for _ in range(k):
        try:
            candidate = model.generate(request, rng=rng)
        except Exception as exc:
            log.warning("rerank: draw failed, pool reduced: %s", exc)
            continue
        drawn += 1
        f = score_sample(tokenize(x), candidate, relation, config, backends).f
        if f > best_f:
            best, best_f = candidate, f
    if best is None:
        raise RuntimeError(f"rerank: no usable samples out of {k} draws")
    log.debug("rerank: kept f=%.4f from pool of %d", best_f, drawn)
    return best
