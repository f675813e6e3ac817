"""Shared fixtures: small synthetic corpora and a tiny pretrained generator.

The pretrained model is session-scoped because even a toy transformer takes
a few seconds to train; tests that mutate model weights must deepcopy it.
"""

from __future__ import annotations

import copy

import pytest

from relpara.generator import ConditioningMode, GeneratorConfig, RelationParaphraser
from relpara.oracle import SyntheticWorldBackend
from relpara.scorers import ScorerBackends, TokenOverlapSimilarity
from relpara.synthetic import SyntheticConfig, build_synthetic_corpus
from relpara.training import PretrainConfig, pretrain

TINY_GEN = GeneratorConfig(layers=1, d_model=32, heads=2, ffn_dim=64, dropout=0.0, seed=3)
MIN_LEN = 3
MAX_LEN = 14


@pytest.fixture(scope="session")
def synthetic_corpus():
    cfg = SyntheticConfig(n_train_per_relation=6, n_dev_per_relation=3, seed=1)
    return build_synthetic_corpus(cfg)


@pytest.fixture(scope="session")
def oracle_backend():
    return SyntheticWorldBackend()


@pytest.fixture(scope="session")
def backends(oracle_backend):
    return ScorerBackends(similarity=TokenOverlapSimilarity(), oracle=oracle_backend)


@pytest.fixture(scope="session")
def pretrained_unaware(synthetic_corpus) -> RelationParaphraser:
    train, _ = synthetic_corpus
    cfg = PretrainConfig(
        epochs=8, batch_size=18, lr=2e-3, min_len=MIN_LEN, max_len=MAX_LEN,
        seed=3, generator=TINY_GEN,
    )
    model, _ = pretrain(train, ConditioningMode.UNAWARE, cfg, dev=None)
    return model


@pytest.fixture(scope="session")
def pretrained_aware(synthetic_corpus) -> RelationParaphraser:
    train, _ = synthetic_corpus
    cfg = PretrainConfig(
        epochs=8, batch_size=18, lr=2e-3, min_len=MIN_LEN, max_len=MAX_LEN,
        seed=3, generator=TINY_GEN,
    )
    model, _ = pretrain(train, ConditioningMode.AWARE, cfg, dev=None)
    return model


@pytest.fixture()
def unaware_model(pretrained_unaware) -> RelationParaphraser:
    return copy.deepcopy(pretrained_unaware)


@pytest.fixture()
def aware_model(pretrained_aware) -> RelationParaphraser:
    return copy.deepcopy(pretrained_aware)
