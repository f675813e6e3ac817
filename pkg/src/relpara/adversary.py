"""Hypothesis-only adversary: relation classification from the output alone.

If a classifier that never sees the input can tell which relation a
generated paraphrase was conditioned on, the generator is leaking the
relation through surface artifacts (telltale tokens, length hacks). The
adversary is trained against oracle verdicts on generated text, GAN-style
in alternation with the generator, and its confident correct predictions
become a penalty in the generator's reward.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import torch
from torch import nn

from .oracle import OracleVerdict
from .relations import CONTROL_RELATIONS, EntailmentRelation
from .vocab import Vocab

log = logging.getLogger(__name__)

Tokens = Sequence[str]


@dataclass(frozen=True)
class AdversaryConfig:
    embed_dim: int = 64
    lr: float = 1e-3
    one_hot_targets: bool = False
    seed: int = 0


@dataclass
class AdversaryBatch:
    """Parallel generated outputs and their oracle-derived soft targets.

    Each target is a distribution over (EQ, FWD, REV) in that order; a row
    of zeros marks a sample whose oracle mass lies entirely outside the
    control relations and is dropped at training time.
    """

    y_hats: list[tuple[str, ...]] = field(default_factory=list)
    targets: list[tuple[float, float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.y_hats) != len(self.targets):
            raise ValueError("y_hats and targets must be parallel")

    def __len__(self) -> int:
        return len(self.y_hats)


def make_target(
    likelihoods: Mapping[EntailmentRelation, float], one_hot: bool = False
) -> tuple[float, float, float]:
    """Renormalize oracle likelihoods over the control relations.

    Returns all zeros when no mass falls on EQ/FWD/REV; with ``one_hot``
    the renormalized distribution collapses onto its argmax.
    """
    raw = [max(0.0, float(likelihoods.get(r, 0.0))) for r in CONTROL_RELATIONS]
    mass = sum(raw)
    if mass <= 0.0:
        return (0.0, 0.0, 0.0)
    dist = [v / mass for v in raw]
    if one_hot:
        top = max(range(3), key=lambda i: (dist[i], -i))
        dist = [1.0 if i == top else 0.0 for i in range(3)]
    return (dist[0], dist[1], dist[2])


def batch_from_verdicts(
    y_hats: Sequence[Tokens],
    verdicts: Sequence[OracleVerdict],
    one_hot: bool = False,
) -> tuple[AdversaryBatch, int]:
    """Build a training batch from generated outputs and oracle verdicts.

    Samples whose verdict is not a control relation are excluded; the
    count of exclusions is returned alongside the batch.
    """
    if len(y_hats) != len(verdicts):
        raise ValueError("y_hats and verdicts must be parallel")
    batch = AdversaryBatch()
    excluded = 0
    for y_hat, verdict in zip(y_hats, verdicts):
        if verdict.relation not in CONTROL_RELATIONS:
            excluded += 1
            continue
        batch.y_hats.append(tuple(y_hat))
        batch.targets.append(make_target(verdict.likelihoods, one_hot=one_hot))
    return batch, excluded


@dataclass
class AdversaryStepResult:
    loss: float
    used: int
    dropped: int


class HypothesisOnlyAdversary(nn.Module):
    """Bag-of-embeddings relation classifier over generated tokens.

    Mean-pooled token embeddings through a linear head to three logits.
    Deliberately small: its job at desk scale is detecting blatant
    artifacts, and the scorer contract only needs the distribution
    interface, so a bigger encoder can replace it unchanged.
    """

    def __init__(self, vocab: Vocab, config: AdversaryConfig | None = None) -> None:
        super().__init__()
        self.vocab = vocab
        self.config = config or AdversaryConfig()
        self.embed = nn.Embedding(len(vocab), self.config.embed_dim)
        self.head = nn.Linear(self.config.embed_dim, len(CONTROL_RELATIONS))
        g = torch.Generator().manual_seed(self.config.seed)
        with torch.no_grad():
            self.embed.weight.normal_(0.0, 1.0, generator=g)
            self.head.weight.uniform_(-0.1, 0.1, generator=g)
            self.head.bias.zero_()
        self.optimizer = torch.optim.Adam(self.parameters(), lr=self.config.lr)
        self.trained = False

    def _logits(self, y_hats: Sequence[Tokens]) -> torch.Tensor:
        pooled = []
        for y_hat in y_hats:
            ids = self.vocab.encode(y_hat) or [self.vocab.unk_id]
            vecs = self.embed(torch.tensor(ids, dtype=torch.long))
            pooled.append(vecs.mean(dim=0))
        return self.head(torch.stack(pooled))

    def predict(self, y_hat: Tokens) -> dict[EntailmentRelation, float]:
        """Distribution over control relations; exact uniform before any training."""
        if not self.trained:
            return {r: 1.0 / 3.0 for r in CONTROL_RELATIONS}
        self.eval()
        with torch.no_grad():
            probs = torch.softmax(self._logits([y_hat])[0], dim=-1)
        return {r: float(probs[i]) for i, r in enumerate(CONTROL_RELATIONS)}

    def train_step(self, batch: AdversaryBatch) -> AdversaryStepResult:
        """One gradient step on the soft cross-entropy against oracle targets.

        All-zero target rows are dropped and counted; a batch with no
        usable rows performs no step and reports loss 0.
        """
        if len(batch) == 0:
            raise ValueError("adversary train_step needs a non-empty batch")
        keep = [i for i, t in enumerate(batch.targets) if sum(t) > 0.0]
        dropped = len(batch) - len(keep)
        if dropped:
            log.debug("adversary: dropped %d zero-target sample(s)", dropped)
        if not keep:
            return AdversaryStepResult(loss=0.0, used=0, dropped=dropped)
        self.train()
        logits = self._logits([batch.y_hats[i] for i in keep])
        targets = torch.tensor(
            [batch.targets[i] for i in keep], dtype=torch.float32
        )
        loss = -(targets * torch.log_softmax(logits, dim=-1)).sum(dim=-1).mean()
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        self.trained = True
        return AdversaryStepResult(loss=loss.item(), used=len(keep), dropped=dropped)

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "state": self.state_dict(),
                "vocab": self.vocab.to_json(),
                "config": asdict(self.config),
                "trained": self.trained,
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "HypothesisOnlyAdversary":
        payload = torch.load(path, map_location="cpu", weights_only=False)
        model = cls(
            Vocab.from_json(payload["vocab"]),
            AdversaryConfig(**payload["config"]),
        )
        model.load_state_dict(payload["state"])
        model.trained = bool(payload["trained"])
        return model
