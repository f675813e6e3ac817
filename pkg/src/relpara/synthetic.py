"""Synthetic paraphrase world with computable ground-truth relations.

Sentences are sequences of distinct tokens and mean exactly their token
set, so the rule-based NLI backend can verify any claim about them.
Three transforms generate relation-annotated pairs, and every target
copies a prefix of the source verbatim so the targets stay
n-gram-comparable to the source and a small model can actually fit
them: appending a duplicate token keeps the set equal (EQ) while
staying under the similarity ceiling, truncating up to half the tokens
generalizes (FWD), and appending fresh tokens specializes (REV). Every
transform keeps token overlap inside the similarity band, so each
relation is attainable under the thresholded reward, and the three
differ only in how the sequence ends, which makes relation control a
learnable decision rather than a memorized rewrite.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .oracle import SyntheticWorldBackend, oracle_verdict
from .relations import (
    CONTROL_RELATIONS,
    EntailmentRelation,
    PairSource,
    RelationAnnotatedPair,
    SentencePair,
)


@dataclass(frozen=True)
class SyntheticConfig:
    # Enough pairs per relation that a small transformer learns the
    # transforms as rules; far fewer and it memorizes the training set.
    n_train_per_relation: int = 500
    n_dev_per_relation: int = 15
    alphabet_size: int = 30
    min_sentence_len: int = 6
    max_sentence_len: int = 9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alphabet_size < 2 * self.max_sentence_len:
            raise ValueError(
                "alphabet must be at least twice the max sentence length so "
                "specializing transforms can add fresh tokens"
            )
        if self.min_sentence_len < 4:
            raise ValueError("sentences must have at least 4 tokens")


def _alphabet(size: int) -> list[str]:
    return [f"w{i}" for i in range(size)]


def _sentence(rng: random.Random, alphabet: list[str], config: SyntheticConfig) -> list[str]:
    length = rng.randint(config.min_sentence_len, config.max_sentence_len)
    return rng.sample(alphabet, length)


def _eq_variant(x: list[str], rng: random.Random) -> list[str]:
    return x + [rng.choice(x)]


def _fwd_variant(x: list[str], rng: random.Random) -> list[str]:
    drop = rng.randint(1, len(x) // 2)
    return x[: len(x) - drop]


def _rev_variant(
    x: list[str], rng: random.Random, alphabet: list[str]
) -> list[str]:
    fresh = [t for t in alphabet if t not in x]
    add = rng.randint(1, len(x) // 2)
    return x + rng.sample(fresh, add)


def synthetic_pairs(
    n_per_relation: int, rng: random.Random, config: SyntheticConfig
) -> list[RelationAnnotatedPair]:
    """Relation-balanced pair list; every pair verified against the rules."""
    alphabet = _alphabet(config.alphabet_size)
    backend = SyntheticWorldBackend()
    out: list[RelationAnnotatedPair] = []
    for _ in range(n_per_relation):
        for relation in CONTROL_RELATIONS:
            x = _sentence(rng, alphabet, config)
            if relation is EntailmentRelation.EQ:
                y = _eq_variant(x, rng)
            elif relation is EntailmentRelation.FWD:
                y = _fwd_variant(x, rng)
            else:
                y = _rev_variant(x, rng, alphabet)
            verdict = oracle_verdict(x, y, backend)
            if verdict.relation is not relation:
                raise AssertionError(
                    f"synthetic transform produced {verdict.relation}, wanted {relation}"
                )
            out.append(
                RelationAnnotatedPair(
                    pair=SentencePair(x=tuple(x), y=tuple(y)),
                    relation=relation,
                    source=PairSource.GOLD,
                )
            )
    return out


def build_synthetic_corpus(
    config: SyntheticConfig | None = None,
) -> tuple[list[RelationAnnotatedPair], list[RelationAnnotatedPair]]:
    """Deterministic (train, dev) corpora from independent RNG streams."""
    config = config or SyntheticConfig()
    train = synthetic_pairs(
        config.n_train_per_relation, random.Random(config.seed), config
    )
    dev = synthetic_pairs(
        config.n_dev_per_relation, random.Random(config.seed + 7919), config
    )
    return train, dev
