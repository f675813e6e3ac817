"""Training loops: supervised pre-training and alternating RL fine-tuning.

Pre-training is ordinary teacher-forced cross-entropy over paraphrase
pairs, either relation-aware (control token prepended, labels from gold
or oracle annotation) or relation-unaware (pairs as-is). Fine-tuning
alternates a REINFORCE phase over the training pairs with an adversary
phase over the same epoch's generation pool, checkpointing per epoch and
selecting the final model on dev quality.
"""

from __future__ import annotations

import copy
import json
import logging
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .adversary import HypothesisOnlyAdversary, batch_from_verdicts
from .errors import BackendError
from .generator import (
    ConditioningMode,
    GeneratorConfig,
    RelationParaphraser,
    make_rng,
)
from .metrics import EvalRow, evaluate
from .oracle import NLIBackend, oracle_verdict
from .relations import (
    CONTROL_RELATIONS,
    DecodeStrategy,
    EntailmentRelation,
    GenerationRequest,
    RelationAnnotatedPair,
    RewardConfig,
    SentencePair,
    detokenize,
)
from .rl import estimate_rewards, reinforce_step, rollout
from .scorers import ScorerBackends, score_sample
from .vocab import Vocab

log = logging.getLogger(__name__)


def harmonic_mean(a: float, b: float) -> float:
    """Model-selection blend; zero unless both components are positive."""
    return 2 * a * b / (a + b) if a > 0 and b > 0 else 0.0


# ---------------------------------------------------------------------------
# Pre-training


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 20
    batch_size: int = 256
    lr: float = 1e-4
    min_len: int = 5
    max_len: int = 40
    seed: int = 0
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)


def _to_annotated(
    corpus: Sequence[RelationAnnotatedPair | SentencePair],
    mode: ConditioningMode,
) -> list[RelationAnnotatedPair | SentencePair]:
    if not corpus:
        raise ValueError("training corpus is empty")
    if mode is ConditioningMode.AWARE:
        bad = [p for p in corpus if not isinstance(p, RelationAnnotatedPair)]
        if bad:
            raise ValueError(
                "aware pre-training needs relation annotations on every pair"
            )
        kept = [p for p in corpus if p.relation in CONTROL_RELATIONS]
        if not kept:
            raise ValueError("no control-relation pairs left for aware pre-training")
        return kept
    return list(corpus)


def _pair_of(item: RelationAnnotatedPair | SentencePair) -> SentencePair:
    return item.pair if isinstance(item, RelationAnnotatedPair) else item


def _relation_of(
    item: RelationAnnotatedPair | SentencePair,
) -> EntailmentRelation | None:
    if isinstance(item, RelationAnnotatedPair) and item.relation in CONTROL_RELATIONS:
        return item.relation
    return None


def _padded_batch(rows: list[list[int]], pad_id: int) -> torch.Tensor:
    width = max(len(r) for r in rows)
    return torch.tensor(
        [r + [pad_id] * (width - len(r)) for r in rows], dtype=torch.long
    )


def generate_eval_rows(
    model: RelationParaphraser,
    pairs: Sequence[RelationAnnotatedPair | SentencePair],
    min_len: int = 5,
    max_len: int = 40,
) -> list[EvalRow]:
    """Beam-decode each pair's input into an evaluation row.

    Unannotated pairs decode under a placeholder relation (ignored by an
    unaware model) and carry no relation in the row.
    """
    rows = []
    for item in pairs:
        pair = _pair_of(item)
        relation = _relation_of(item)
        request = GenerationRequest(
            x=pair.x,
            relation=relation or EntailmentRelation.EQ,
            decode=DecodeStrategy.BEAM,
            min_len=min_len,
            max_len=max_len,
        )
        y_hat = model.generate(request)
        rows.append(
            EvalRow(
                x=detokenize(pair.x),
                y_hat=detokenize(y_hat),
                references=[detokenize(pair.y)],
                relation=relation,
            )
        )
    return rows


def _dev_metrics(
    model: RelationParaphraser,
    dev: Sequence[RelationAnnotatedPair | SentencePair],
    oracle_backend: NLIBackend | None,
    min_len: int,
    max_len: int,
) -> dict:
    rows = generate_eval_rows(model, dev, min_len=min_len, max_len=max_len)
    report = evaluate(rows, oracle_backend)
    ibleu_value = report.get("ibleu", 0.0)
    consistency = report.get("r_consistency", 0.0)
    return {
        "dev_ibleu": ibleu_value,
        "dev_consistency": consistency,
        "harmonic_mean": harmonic_mean(ibleu_value, consistency),
    }


def pretrain(
    corpus: Sequence[RelationAnnotatedPair | SentencePair],
    mode: ConditioningMode,
    config: PretrainConfig,
    dev: Sequence[RelationAnnotatedPair | SentencePair] | None = None,
    oracle_backend: NLIBackend | None = None,
) -> tuple[RelationParaphraser, list[dict]]:
    """Supervised teacher-forcing over paraphrase pairs.

    Aware mode prepends each pair's control token to the source. With a
    dev set, the returned model is the epoch checkpoint with the best dev
    iBLEU (unaware) or best dev harmonic mean of iBLEU and R-Consistency
    (aware, which therefore needs an oracle backend).
    """
    items = _to_annotated(corpus, mode)
    if dev is not None and mode is ConditioningMode.AWARE and oracle_backend is None:
        raise ValueError("aware model selection needs an oracle backend for dev")
    vocab = Vocab.from_corpus(
        [_pair_of(p).x for p in items] + [_pair_of(p).y for p in items]
    )
    model = RelationParaphraser(vocab, config.generator, mode=mode)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    loss_fn = nn.CrossEntropyLoss(
        ignore_index=vocab.pad_id, label_smoothing=config.generator.label_smoothing
    )

    report: list[dict] = []
    best_metric = -1.0
    best_state = None
    order = list(range(len(items)))
    for epoch in range(1, config.epochs + 1):
        random.Random(config.seed + epoch).shuffle(order)
        model.train()
        total_loss = 0.0
        batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = [items[i] for i in order[start : start + config.batch_size]]
            src_rows, tgt_in_rows, tgt_out_rows = [], [], []
            for item in batch:
                pair = _pair_of(item)
                src = model.source_tokens(pair.x, _relation_of(item))
                tgt = vocab.encode(pair.y)
                src_rows.append(vocab.encode(src))
                tgt_in_rows.append([vocab.bos_id] + tgt)
                tgt_out_rows.append(tgt + [vocab.eos_id])
            logits = model(
                _padded_batch(src_rows, vocab.pad_id),
                _padded_batch(tgt_in_rows, vocab.pad_id),
            )
            targets = _padded_batch(tgt_out_rows, vocab.pad_id)
            loss = loss_fn(logits.flatten(0, 1), targets.flatten())
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            total_loss += loss.item()
            batches += 1
        row = {"epoch": epoch, "train_loss": total_loss / max(batches, 1)}
        if dev is not None:
            row.update(
                _dev_metrics(model, dev, oracle_backend, config.min_len, config.max_len)
            )
            metric = (
                row["harmonic_mean"]
                if mode is ConditioningMode.AWARE
                else row["dev_ibleu"]
            )
            if metric > best_metric:
                best_metric = metric
                best_state = copy.deepcopy(model.state_dict())
        report.append(row)
        log.info("pretrain %s", row)
    if best_state is not None:
        model.load_state_dict(best_state)
    return model, report


# ---------------------------------------------------------------------------
# RL fine-tuning


@dataclass(frozen=True)
class FinetuneConfig:
    epochs: int = 1
    batch_size: int = 16
    lr: float = 2e-5
    min_len: int = 5
    max_len: int = 40
    seed: int = 0
    adversary_enabled: bool = True
    reward: RewardConfig = field(default_factory=RewardConfig)
    checkpoint_dir: str | None = None


def finetune(
    model: RelationParaphraser,
    dataset: Sequence[RelationAnnotatedPair],
    config: FinetuneConfig,
    backends: ScorerBackends,
    dev: Sequence[RelationAnnotatedPair] | None = None,
    adversary: HypothesisOnlyAdversary | None = None,
    start_epoch: int = 0,
) -> tuple[RelationParaphraser, list[dict]]:
    """Alternating REINFORCE / adversary training over the dataset.

    Each epoch first runs generation, reward estimation, and policy
    updates over the training pairs, then trains the adversary on that
    epoch's generation pool against oracle verdicts. Every epoch is
    checkpointed; with a dev set the best checkpoint by harmonic mean of
    iBLEU and R-Consistency is returned. A backend outage aborts the
    epoch and keeps the last finished checkpoint.
    """
    for p in dataset:
        if p.relation not in CONTROL_RELATIONS:
            raise ValueError("finetune dataset must carry control relations only")
    model.mode = ConditioningMode.AWARE
    if config.adversary_enabled and adversary is not None:
        scoring_backends = replace(backends, adversary=adversary)
    else:
        scoring_backends = replace(backends, adversary=None)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    run_dir = Path(config.checkpoint_dir) if config.checkpoint_dir else None

    report: list[dict] = []
    best_metric = -1.0
    best_state = None
    order = list(range(len(dataset)))
    for epoch in range(start_epoch + 1, start_epoch + config.epochs + 1):
        random.Random(config.seed + epoch).shuffle(order)
        rng = make_rng(config.seed * 100003 + epoch)
        pool: list[tuple[tuple[str, ...], object]] = []
        sums = {"f": 0.0, "r_l": 0.0, "p_l": 0.0, "loss": 0.0}
        n_pairs = 0
        n_batches = 0
        try:
            model.eval()
            for start in range(0, len(order), config.batch_size):
                batch = [dataset[i] for i in order[start : start + config.batch_size]]
                trajectories = []
                for item in batch:
                    x, relation = item.pair.x, item.relation
                    rollout_set = rollout(
                        model,
                        x,
                        relation,
                        config.reward,
                        min_len=config.min_len,
                        max_len=config.max_len,
                        rng=rng,
                    )
                    traj = estimate_rewards(
                        rollout_set, x, relation, config.reward, scoring_backends
                    )
                    trajectories.append(traj)
                    reference = rollout_set.reference
                    verdict = oracle_verdict(x, reference, backends.oracle)
                    pool.append((reference, verdict))
                    ref_scores = score_sample(
                        x, reference, relation, config.reward, scoring_backends
                    )
                    sums["f"] += traj.per_step_f[-1]
                    sums["r_l"] += ref_scores.r_l
                    sums["p_l"] += ref_scores.p_l
                    n_pairs += 1
                sums["loss"] += reinforce_step(model, trajectories, optimizer)
                n_batches += 1
        except BackendError as exc:
            log.error("finetune: backend outage, epoch %d aborted: %s", epoch, exc)
            break

        row = {
            "epoch": epoch,
            "mean_f": sums["f"] / max(n_pairs, 1),
            "mean_r_l": sums["r_l"] / max(n_pairs, 1),
            "mean_p_l": sums["p_l"] / max(n_pairs, 1),
            "reinforce_loss": sums["loss"] / max(n_batches, 1),
        }

        if config.adversary_enabled and adversary is not None and pool:
            adv_batch, excluded = batch_from_verdicts(
                [y for y, _ in pool],
                [v for _, v in pool],
                one_hot=adversary.config.one_hot_targets,
            )
            adv_loss = 0.0
            adv_steps = 0
            adv_order = list(range(len(adv_batch)))
            random.Random(config.seed * 31 + epoch).shuffle(adv_order)
            for start in range(0, len(adv_order), config.batch_size):
                take = adv_order[start : start + config.batch_size]
                if not take:
                    continue
                sub = type(adv_batch)(
                    y_hats=[adv_batch.y_hats[i] for i in take],
                    targets=[adv_batch.targets[i] for i in take],
                )
                result = adversary.train_step(sub)
                adv_loss += result.loss
                adv_steps += 1
            row["adversary_loss"] = adv_loss / max(adv_steps, 1)
            row["adversary_excluded"] = excluded

        if dev is not None:
            row.update(
                _dev_metrics(
                    model, dev, backends.oracle, config.min_len, config.max_len
                )
            )
            if row["harmonic_mean"] > best_metric:
                best_metric = row["harmonic_mean"]
                best_state = copy.deepcopy(model.state_dict())

        if run_dir is not None:
            epoch_dir = run_dir / f"epoch_{epoch}"
            epoch_dir.mkdir(parents=True, exist_ok=True)
            model.save(epoch_dir / "generator.pt")
            if adversary is not None:
                adversary.save(epoch_dir / "adversary.pt")
            with open(run_dir / "report.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(row) + "\n")

        report.append(row)
        log.info("finetune %s", row)

    if best_state is not None:
        model.load_state_dict(best_state)
    return model, report
