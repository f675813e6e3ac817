"""JSONL persistence for annotated sentence pairs."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .relations import RelationAnnotatedPair


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    """Write one JSON object per line; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield JSON objects from a JSONL file, skipping blank lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def save_pairs(path: str | Path, pairs: Iterable[RelationAnnotatedPair]) -> int:
    return write_jsonl(path, (p.to_record() for p in pairs))


def load_pairs(path: str | Path) -> list[RelationAnnotatedPair]:
    return [RelationAnnotatedPair.from_record(rec) for rec in read_jsonl(path)]
