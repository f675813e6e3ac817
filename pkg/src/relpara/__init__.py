"""Entailment-relation-controlled paraphrase generation toolkit.

Generate paraphrases that stand in a requested entailment relation to
the input (equivalent, more general, or more specific), verified by a
bidirectional NLI oracle, trained with policy-gradient feedback from a
similarity/diversity/consistency evaluator, and applied to recasting,
re-ranking, and label-projected data augmentation.
"""

__version__ = "0.1.0"

from .relations import (
    CONTROL_RELATIONS,
    DecodeStrategy,
    EntailmentRelation,
    GenerationRequest,
    NLILabel,
    PairSource,
    RelationAnnotatedPair,
    RewardConfig,
    SentencePair,
    control_token,
)

__all__ = [
    "__version__",
    "CONTROL_RELATIONS",
    "DecodeStrategy",
    "EntailmentRelation",
    "GenerationRequest",
    "NLILabel",
    "PairSource",
    "RelationAnnotatedPair",
    "RewardConfig",
    "SentencePair",
    "control_token",
]
