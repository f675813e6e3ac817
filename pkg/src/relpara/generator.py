"""Relation-conditioned paraphrase generator.

A compact transformer encoder-decoder over whitespace tokens. In aware
mode the relation's control token is prepended to the source sequence, so
conditioning rides on the ordinary input pathway and the same weights
serve all three relations. Decoding supports beam search (references)
and nucleus sampling (rollouts and re-ranking pools), both respecting
min/max length by banning or forcing the end token.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .relations import (
    DecodeStrategy,
    EntailmentRelation,
    GenerationRequest,
    control_token,
)
from .vocab import Vocab

log = logging.getLogger(__name__)

Tokens = Sequence[str]


@dataclass(frozen=True)
class GeneratorConfig:
    """Architecture and decoding hyperparameters.

    Defaults are the desk-scale shape; ``full_scale`` returns the
    published configuration.
    """

    layers: int = 2
    d_model: int = 128
    heads: int = 4
    ffn_dim: int = 256
    dropout: float = 0.1
    label_smoothing: float = 0.1
    beam_width: int = 5
    nucleus_p: float = 0.8
    temperature: float = 1.0
    seed: int = 0

    @classmethod
    def full_scale(cls) -> "GeneratorConfig":
        return cls(layers=6, d_model=512, heads=8, ffn_dim=2048)


class ConditioningMode(str, Enum):
    """Whether the source sequence carries a relation control token."""

    AWARE = "AWARE"
    UNAWARE = "UNAWARE"


def make_rng(seed: int) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(seed)
    return g


def _causal_mask(size: int) -> torch.Tensor:
    return torch.triu(torch.ones(size, size, dtype=torch.bool), diagonal=1)


class _PositionalEncoding(nn.Module):
    def __init__(self, d_model: int, max_len: int = 512) -> None:
        super().__init__()
        position = torch.arange(max_len).unsqueeze(1)
        div = torch.exp(torch.arange(0, d_model, 2) * (-math.log(10000.0) / d_model))
        pe = torch.zeros(max_len, d_model)
        pe[:, 0::2] = torch.sin(position * div)
        pe[:, 1::2] = torch.cos(position * div)
        self.register_buffer("pe", pe)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.pe[: x.size(1)].unsqueeze(0)


class RelationParaphraser(nn.Module):
    """Transformer encoder-decoder with optional relation conditioning."""

    def __init__(
        self,
        vocab: Vocab,
        config: GeneratorConfig | None = None,
        mode: ConditioningMode = ConditioningMode.AWARE,
    ) -> None:
        super().__init__()
        self.vocab = vocab
        self.config = config or GeneratorConfig()
        self.mode = mode
        torch.manual_seed(self.config.seed)
        d = self.config.d_model
        self.embed = nn.Embedding(len(vocab), d, padding_idx=vocab.pad_id)
        self.positional = _PositionalEncoding(d)
        self.transformer = nn.Transformer(
            d_model=d,
            nhead=self.config.heads,
            num_encoder_layers=self.config.layers,
            num_decoder_layers=self.config.layers,
            dim_feedforward=self.config.ffn_dim,
            dropout=self.config.dropout,
            batch_first=True,
        )
        self.out = nn.Linear(d, len(vocab))
        self._scale = math.sqrt(d)

    # -- encoding helpers ----------------------------------------------------

    def source_tokens(
        self, x: Tokens, relation: EntailmentRelation | None
    ) -> list[str]:
        """Source sequence as fed to the encoder; aware mode prepends the
        relation's control token."""
        tokens = list(x)
        if self.mode is ConditioningMode.AWARE:
            if relation is None:
                raise ValueError("aware mode requires a control relation")
            tokens = [control_token(relation)] + tokens
        return tokens

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        return self.positional(self.embed(ids) * self._scale)

    def forward(
        self,
        src_ids: torch.Tensor,
        tgt_in_ids: torch.Tensor,
    ) -> torch.Tensor:
        """Teacher-forced logits [batch, tgt_len, vocab]."""
        tgt_mask = _causal_mask(tgt_in_ids.size(1))
        hidden = self.transformer(
            self._embed(src_ids),
            self._embed(tgt_in_ids),
            tgt_mask=tgt_mask,
            src_key_padding_mask=src_ids.eq(self.vocab.pad_id),
            tgt_key_padding_mask=tgt_in_ids.eq(self.vocab.pad_id),
        )
        return self.out(hidden)

    def _encode_memory(
        self, x: Tokens, relation: EntailmentRelation | None
    ) -> torch.Tensor:
        ids = torch.tensor(
            [self.vocab.encode(self.source_tokens(x, relation))], dtype=torch.long
        )
        return self.transformer.encoder(self._embed(ids))

    def _decoder_logits(self, memory: torch.Tensor, tgt_ids: list[int]) -> torch.Tensor:
        """Next-token logits given decoder input ids (single sequence)."""
        tgt = torch.tensor([tgt_ids], dtype=torch.long)
        hidden = self.transformer.decoder(
            self._embed(tgt), memory, tgt_mask=_causal_mask(tgt.size(1))
        )
        return self.out(hidden[0, -1])

    def _step_log_probs(
        self,
        memory: torch.Tensor,
        tgt_ids: list[int],
        content_len: int,
        min_len: int,
        max_len: int,
        temperature: float = 1.0,
    ) -> torch.Tensor:
        """Masked next-token log-probabilities honoring length bounds."""
        logits = self._decoder_logits(memory, tgt_ids) / temperature
        logits[self.vocab.pad_id] = -math.inf
        logits[self.vocab.bos_id] = -math.inf
        if content_len < min_len:
            logits[self.vocab.eos_id] = -math.inf
        if content_len >= max_len:
            keep = logits[self.vocab.eos_id]
            logits = torch.full_like(logits, -math.inf)
            logits[self.vocab.eos_id] = keep
        return torch.log_softmax(logits, dim=-1)

    # -- decoding ------------------------------------------------------------

    @torch.no_grad()
    def generate(
        self, request: GenerationRequest, rng: torch.Generator | None = None
    ) -> tuple[str, ...]:
        """Decode one paraphrase for the request."""
        self.eval()
        x = request.x
        if request.decode is DecodeStrategy.BEAM:
            return self._beam_decode(x, request)
        return self.sample_continuation(x, request, prefix=(), rng=rng)

    @torch.no_grad()
    def sample_continuation(
        self,
        x: Tokens,
        request: GenerationRequest,
        prefix: Tokens,
        rng: torch.Generator | None = None,
    ) -> tuple[str, ...]:
        """Nucleus-sample a completion of a forced output prefix."""
        self.eval()
        memory = self._encode_memory(x, request.relation)
        out_tokens = list(prefix)
        ids = [self.vocab.bos_id] + self.vocab.encode(prefix)
        while len(out_tokens) < request.max_len:
            log_probs = self._step_log_probs(
                memory,
                ids,
                content_len=len(out_tokens),
                min_len=request.min_len,
                max_len=request.max_len,
                temperature=self.config.temperature,
            )
            probs = log_probs.exp()
            token_id = int(_nucleus_sample(probs, self.config.nucleus_p, rng))
            if token_id == self.vocab.eos_id:
                break
            ids.append(token_id)
            out_tokens.append(self.vocab.decode([token_id])[0])
        return tuple(out_tokens)

    @torch.no_grad()
    def _beam_decode(
        self, x: Tokens, request: GenerationRequest
    ) -> tuple[str, ...]:
        memory = self._encode_memory(x, request.relation)
        width = self.config.beam_width
        # (decoder ids, cumulative log prob)
        active: list[tuple[list[int], float]] = [([self.vocab.bos_id], 0.0)]
        finished: list[tuple[list[int], float]] = []
        for _ in range(request.max_len + 1):
            if not active or len(finished) >= width:
                break
            candidates: list[tuple[list[int], float]] = []
            for ids, score in active:
                content_len = len(ids) - 1
                log_probs = self._step_log_probs(
                    memory,
                    ids,
                    content_len=content_len,
                    min_len=request.min_len,
                    max_len=request.max_len,
                )
                top = torch.topk(log_probs, k=min(width, len(self.vocab)))
                for lp, tid in zip(top.values.tolist(), top.indices.tolist()):
                    if lp == -math.inf:
                        continue
                    candidates.append((ids + [tid], score + lp))
            candidates.sort(key=lambda c: -c[1])
            active = []
            for ids, score in candidates:
                if ids[-1] == self.vocab.eos_id:
                    if len(finished) < width:
                        finished.append((ids, score))
                elif len(active) < width:
                    active.append((ids, score))
                if len(active) >= width and len(finished) >= width:
                    break
        pool = finished or active
        best_ids, _ = max(pool, key=lambda c: c[1])
        return tuple(self.vocab.decode(best_ids))

    # -- training support ------------------------------------------------------

    def sequence_log_probs(
        self,
        x: Tokens,
        relation: EntailmentRelation | None,
        target: Tokens,
        include_end: bool = True,
    ) -> torch.Tensor:
        """Differentiable log P(y_t | state) at each realized target token.

        By default the end-token emission that terminated the sequence is
        appended as one extra entry, so the decision to stop carries
        policy gradient like any other action; ``include_end=False``
        scores the content tokens only.
        """
        if not target:
            raise ValueError("target must be non-empty")
        src = torch.tensor(
            [self.vocab.encode(self.source_tokens(x, relation))], dtype=torch.long
        )
        tgt_ids = self.vocab.encode(target)
        emitted = tgt_ids + [self.vocab.eos_id] if include_end else tgt_ids
        tgt_in = torch.tensor([[self.vocab.bos_id] + emitted[:-1]], dtype=torch.long)
        logits = self.forward(src, tgt_in)[0]
        log_probs = torch.log_softmax(logits, dim=-1)
        index = torch.tensor(emitted, dtype=torch.long).unsqueeze(1)
        return log_probs.gather(1, index).squeeze(1)

    # -- persistence -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "state": self.state_dict(),
                "vocab": self.vocab.to_json(),
                "config": asdict(self.config),
                "mode": self.mode.value,
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "RelationParaphraser":
        payload = torch.load(path, map_location="cpu", weights_only=False)
        model = cls(
            Vocab.from_json(payload["vocab"]),
            GeneratorConfig(**payload["config"]),
            ConditioningMode(payload["mode"]),
        )
        model.load_state_dict(payload["state"])
        return model


def _nucleus_sample(
    probs: torch.Tensor, top_p: float, rng: torch.Generator | None
) -> int:
    """Multinomial draw from the smallest prefix of mass >= top_p."""
    sorted_probs, sorted_ids = torch.sort(probs, descending=True)
    cumulative = torch.cumsum(sorted_probs, dim=-1)
    # keep every token up to and including the one crossing the threshold
    cutoff = int(torch.searchsorted(cumulative, top_p).item())
    keep = sorted_probs[: cutoff + 1]
    keep = keep / keep.sum()
    choice = torch.multinomial(keep, 1, generator=rng)
    return int(sorted_ids[choice])
