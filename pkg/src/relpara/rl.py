"""Policy-gradient machinery: rollouts, per-step rewards, REINFORCE.

Sequence-level scorers cannot judge a half-finished sentence, so each
prefix of the beam reference is completed by sampling, scored, and the
per-step reward is the first difference of the combined score along the
reference. Discounted suffix sums of those rewards weight the log
probability of each realized token in the REINFORCE loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import torch

from .generator import RelationParaphraser, make_rng
from .relations import (
    DecodeStrategy,
    EntailmentRelation,
    GenerationRequest,
    RewardConfig,
)
from .scorers import ScorerBackends, combined_score

log = logging.getLogger(__name__)

Tokens = Sequence[str]


@dataclass(frozen=True)
class RolloutSet:
    """A beam reference and sampled completions of each of its prefixes.

    ``per_step_samples[t-1]`` holds the completions used to score step t;
    every one extends the exact reference prefix of length t, and the
    final step's sole sample is the completed reference itself.
    """

    reference: tuple[str, ...]
    per_step_samples: tuple[tuple[tuple[str, ...], ...], ...]

    def __post_init__(self) -> None:
        if not self.reference:
            raise ValueError("rollout reference must be non-empty")
        if len(self.per_step_samples) != len(self.reference):
            raise ValueError("need one sample group per reference step")
        for t, group in enumerate(self.per_step_samples, start=1):
            if not group:
                raise ValueError(f"empty sample group at step {t}")
            prefix = self.reference[:t]
            for sample in group:
                if tuple(sample[: len(prefix)]) != prefix:
                    raise ValueError(
                        f"sample at step {t} does not extend the reference prefix"
                    )
        if self.per_step_samples[-1] != (self.reference,):
            raise ValueError("final step must hold exactly the completed reference")


@dataclass(frozen=True)
class Trajectory:
    """Realized reference actions with their rewards and returns."""

    x: tuple[str, ...]
    relation: EntailmentRelation
    actions: tuple[str, ...]
    per_step_f: tuple[float, ...]
    rewards: tuple[float, ...]
    returns: tuple[float, ...]

    def __post_init__(self) -> None:
        lengths = {
            len(self.actions),
            len(self.per_step_f),
            len(self.rewards),
            len(self.returns),
        }
        if len(lengths) != 1 or not self.actions:
            raise ValueError("trajectory fields must be non-empty and parallel")


def rollout(
    model: RelationParaphraser,
    x: Tokens,
    relation: EntailmentRelation,
    config: RewardConfig,
    min_len: int = 5,
    max_len: int = 40,
    rng: torch.Generator | None = None,
) -> RolloutSet:
    """Beam-decode a reference and sample n completions per prefix.

    A sampling failure at some prefix falls back to the completed
    reference as that step's single sample, so scoring always proceeds.
    """
    if rng is None:
        rng = make_rng(0)
    beam_request = GenerationRequest(
        x=tuple(x),
        relation=relation,
        decode=DecodeStrategy.BEAM,
        min_len=min_len,
        max_len=max_len,
    )
    reference = model.generate(beam_request)
    sample_request = GenerationRequest(
        x=tuple(x),
        relation=relation,
        decode=DecodeStrategy.NUCLEUS,
        min_len=min_len,
        max_len=max_len,
    )
    groups: list[tuple[tuple[str, ...], ...]] = []
    for t in range(1, len(reference)):
        prefix = reference[:t]
        try:
            groups.append(
                tuple(
                    model.sample_continuation(x, sample_request, prefix, rng=rng)
                    for _ in range(config.n_rollouts)
                )
            )
        except Exception as exc:
            log.warning(
                "rollout: sampling failed at prefix length %d, using reference: %s",
                t,
                exc,
            )
            groups.append((reference,))
    groups.append((reference,))
    return RolloutSet(reference=reference, per_step_samples=tuple(groups))


def discounted_returns(rewards: Sequence[float], gamma: float) -> tuple[float, ...]:
    """Q_t = sum over tau >= t of gamma^(tau-t) * r_tau."""
    q = 0.0
    out: list[float] = []
    for r in reversed(rewards):
        q = r + gamma * q
        out.append(q)
    return tuple(reversed(out))


def estimate_rewards(
    rollout_set: RolloutSet,
    x: Tokens,
    relation: EntailmentRelation,
    config: RewardConfig,
    backends: ScorerBackends,
) -> Trajectory:
    """Score each prefix's completions and shape per-step rewards.

    The combined score f of step t's samples becomes the step value; the
    reward is its first difference along the reference (r_1 = f_1), so
    rewards telescope back to the final f; returns discount the suffix.
    """
    per_step_f = tuple(
        combined_score(x, relation, group, config, backends)
        for group in rollout_set.per_step_samples
    )
    rewards = tuple(
        f - per_step_f[i - 1] if i else f for i, f in enumerate(per_step_f)
    )
    return Trajectory(
        x=tuple(x),
        relation=relation,
        actions=rollout_set.reference,
        per_step_f=per_step_f,
        rewards=rewards,
        returns=discounted_returns(rewards, config.gamma),
    )


def reinforce_step(
    model: RelationParaphraser,
    trajectories: Sequence[Trajectory],
    optimizer: torch.optim.Optimizer,
) -> float:
    """One gradient step on the negated REINFORCE objective.

    The loss is the mean over trajectories of -sum_t log P(y_t|s_t) Q_t at
    the realized reference tokens. A policy that models termination may
    return one extra log-prob for the stop emission; it shares the final
    step's return. A batch whose returns are all zero has an identically
    zero gradient and performs no update; a non-finite loss or parameter
    state aborts the step and restores the previous weights.
    """
    if not trajectories:
        raise ValueError("reinforce_step needs at least one trajectory")
    if all(q == 0.0 for traj in trajectories for q in traj.returns):
        return 0.0
    model.train()
    losses = []
    for traj in trajectories:
        log_probs = model.sequence_log_probs(traj.x, traj.relation, traj.actions)
        q_values = list(traj.returns)
        if log_probs.shape[0] == len(q_values) + 1:
            q_values.append(q_values[-1])
        elif log_probs.shape[0] != len(q_values):
            raise ValueError("policy log-probs do not align with returns")
        q = torch.tensor(q_values, dtype=log_probs.dtype)
        losses.append(-(log_probs * q).sum())
    loss = torch.stack(losses).mean()
    if not torch.isfinite(loss):
        log.warning("reinforce_step: non-finite loss %s, step skipped", loss)
        optimizer.zero_grad(set_to_none=True)
        return loss.item()
    snapshot = {k: v.detach().clone() for k, v in model.state_dict().items()}
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    optimizer.step()
    if any(not torch.isfinite(p).all() for p in model.parameters()):
        log.warning("reinforce_step: non-finite parameters after step, restored")
        model.load_state_dict(snapshot)
    return loss.item()
