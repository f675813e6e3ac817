"""Token vocabulary shared by the generator and the adversary."""

from __future__ import annotations

from typing import Iterable, Sequence

from .relations import CONTROL_RELATIONS, control_token

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
_SPECIALS = (PAD, BOS, EOS, UNK)


class Vocab:
    """Bidirectional token/id map with reserved special and control tokens.

    Ids 0..3 are pad/bos/eos/unk; the three relation control tokens come
    next so relation-aware encodings exist even for corpora that never
    contain them; corpus tokens follow in sorted order for determinism.
    """

    def __init__(self, tokens: Iterable[str] = ()) -> None:
        reserved = list(_SPECIALS) + [control_token(r) for r in CONTROL_RELATIONS]
        seen = set(reserved)
        ordered = reserved + sorted(t for t in set(tokens) if t not in seen)
        self._id_by_token = {t: i for i, t in enumerate(ordered)}
        self._token_by_id = ordered

    @classmethod
    def from_corpus(cls, sequences: Iterable[Sequence[str]]) -> "Vocab":
        return cls(t for seq in sequences for t in seq)

    def __len__(self) -> int:
        return len(self._token_by_id)

    def __contains__(self, token: str) -> bool:
        return token in self._id_by_token

    @property
    def pad_id(self) -> int:
        return self._id_by_token[PAD]

    @property
    def bos_id(self) -> int:
        return self._id_by_token[BOS]

    @property
    def eos_id(self) -> int:
        return self._id_by_token[EOS]

    @property
    def unk_id(self) -> int:
        return self._id_by_token[UNK]

    def token_id(self, token: str) -> int:
        return self._id_by_token.get(token, self.unk_id)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.token_id(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        skip = {self.pad_id, self.bos_id, self.eos_id}
        return [self._token_by_id[i] for i in ids if i not in skip]

    def to_json(self) -> list[str]:
        return list(self._token_by_id)

    @classmethod
    def from_json(cls, tokens: Sequence[str]) -> "Vocab":
        vocab = cls.__new__(cls)
        vocab._id_by_token = {t: i for i, t in enumerate(tokens)}
        vocab._token_by_id = list(tokens)
        return vocab
