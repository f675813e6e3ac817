"""Core vocabulary shared across the toolkit.

Defines the six-way entailment relation set, NLI labels, sentence pairs,
generation requests, and the reward configuration. All types here are
immutable values and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class NLILabel(str, Enum):
    """Three-way NLI label: entailment, neutral, contradiction."""

    E = "E"
    N = "N"
    C = "C"


class EntailmentRelation(str, Enum):
    """Semantic relation between a sentence and its paraphrase.

    EQ: bidirectional entailment (equivalence).
    FWD: the input entails the paraphrase (generalization).
    REV: the paraphrase entails the input (specification).
    CONTRA, NEUTRAL, INVALID: semantically-divergent outcomes; never valid
    as generation conditions.
    """

    EQ = "EQ"
    FWD = "FWD"
    REV = "REV"
    CONTRA = "CONTRA"
    NEUTRAL = "NEUTRAL"
    INVALID = "INVALID"


#: Relations that may be used to condition generation.
CONTROL_RELATIONS: tuple[EntailmentRelation, ...] = (
    EntailmentRelation.EQ,
    EntailmentRelation.FWD,
    EntailmentRelation.REV,
)

#: Deterministic ordering used for argmax tie-breaks everywhere.
RELATION_ORDER: tuple[EntailmentRelation, ...] = (
    EntailmentRelation.EQ,
    EntailmentRelation.FWD,
    EntailmentRelation.REV,
    EntailmentRelation.CONTRA,
    EntailmentRelation.NEUTRAL,
    EntailmentRelation.INVALID,
)

_CONTROL_TOKENS = {
    EntailmentRelation.EQ: "<rel_eq>",
    EntailmentRelation.FWD: "<rel_fwd>",
    EntailmentRelation.REV: "<rel_rev>",
}


def control_token(relation: EntailmentRelation) -> str:
    """Reserved vocabulary token for a control relation.

    The mapping is injective and stable across runs. Tokens use an
    angle-bracket form so they can never collide with corpus tokens
    produced by :func:`tokenize`.

    Raises:
        ValueError: if ``relation`` is not a control relation.
    """
    try:
        return _CONTROL_TOKENS[relation]
    except KeyError:
        raise ValueError(f"{relation.value} is not a control relation") from None


def tokenize(text: str) -> tuple[str, ...]:
    """Whitespace tokenization with lowercasing.

    This is the rule-level tokenization used by the oracle and scorers;
    generator backends own their own (e.g. subword) tokenization.
    """
    return tuple(text.lower().split())


def detokenize(tokens: tuple[str, ...] | list[str]) -> str:
    return " ".join(tokens)


class PairSource(str, Enum):
    """Provenance of a relation annotation."""

    GOLD = "GOLD"
    ORACLE = "ORACLE"


@dataclass(frozen=True)
class SentencePair:
    """A sentence and its paraphrase, as token sequences."""

    x: tuple[str, ...]
    y: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.x or not self.y:
            raise ValueError("both sides of a sentence pair must be non-empty")
        object.__setattr__(self, "x", tuple(self.x))
        object.__setattr__(self, "y", tuple(self.y))

    @classmethod
    def from_text(cls, x: str, y: str) -> SentencePair:
        return cls(x=tokenize(x), y=tokenize(y))


@dataclass(frozen=True)
class RelationAnnotatedPair:
    """A sentence pair plus its entailment relation and provenance.

    The relation may be any of the six values; training consumers filter
    down to the control subset.
    """

    pair: SentencePair
    relation: EntailmentRelation
    source: PairSource

    def to_record(self) -> dict[str, str]:
        return {
            "x": detokenize(self.pair.x),
            "y": detokenize(self.pair.y),
            "relation": self.relation.value,
            "source": self.source.value,
        }

    @classmethod
    def from_record(cls, record: dict) -> RelationAnnotatedPair:
        return cls(
            pair=SentencePair.from_text(record["x"], record["y"]),
            relation=EntailmentRelation(record["relation"]),
            source=PairSource(record["source"]),
        )


class DecodeStrategy(str, Enum):
    BEAM = "BEAM"
    NUCLEUS = "NUCLEUS"


@dataclass(frozen=True)
class GenerationRequest:
    """A single controlled-generation request.

    ``x`` is stored as a token sequence; passing raw text applies the
    rule-level tokenization.
    """

    x: tuple[str, ...] | str
    relation: EntailmentRelation
    decode: DecodeStrategy = DecodeStrategy.BEAM
    max_len: int = 40
    min_len: int = 5

    def __post_init__(self) -> None:
        if self.relation not in CONTROL_RELATIONS:
            raise ValueError(f"{self.relation.value} is not a control relation")
        if self.min_len < 1:
            raise ValueError("min_len must be >= 1")
        if self.max_len < self.min_len:
            raise ValueError("max_len must be >= min_len")
        coerced = tokenize(self.x) if isinstance(self.x, str) else tuple(self.x)
        if not coerced:
            raise ValueError("input sequence must be non-empty")
        object.__setattr__(self, "x", coerced)


@dataclass(frozen=True)
class RewardConfig:
    """Weights and thresholds for the combined rollout reward.

    alpha weighs the consistency-minus-penalty term, beta the semantic
    similarity term, and delta the expression diversity term. Rollout
    scores outside [sim_low, sim_high] on similarity are zeroed before
    combination.
    """

    alpha: float = 0.4
    beta: float = 0.4
    delta: float = 0.2
    n_rollouts: int = 2
    gamma: float = 0.99
    sim_low: float = 0.3
    sim_high: float = 0.98

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.delta) < 0:
            raise ValueError("reward weights must be non-negative")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 <= self.sim_low < self.sim_high <= 1:
            raise ValueError("similarity thresholds must satisfy 0 <= low < high <= 1")
        if self.n_rollouts < 1:
            raise ValueError("n_rollouts must be >= 1")


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-sequence scorer outputs and, optionally, per-timestep rewards.

    r_s, r_d, r_l, p_l are the (thresholded) similarity, diversity,
    consistency, and adversary-penalty scores; f is their weighted
    combination. For trajectories, per_step_r holds the first-difference
    rewards and per_step_q the discounted returns.
    """

    r_s: float
    r_d: float
    r_l: float
    p_l: float
    f: float
    per_step_r: tuple[float, ...] = field(default=())
    per_step_q: tuple[float, ...] = field(default=())
