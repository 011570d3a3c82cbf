"""CSV dataset ingestion and whitespace tokenization.

Input files are RFC 4180 CSV with a `text,label` header.  The vocabulary is
built from the training split by lowercase whitespace tokenization with a
frequency cutoff; id 0 is reserved for padding and id 1 for unknown tokens.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import DataError, InvalidInputError

PAD_ID = 0
UNK_ID = 1


@dataclass
class Dataset:
    examples: List[Tuple[str, int]]
    vocab: Dict[str, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.examples)


def _tokens(text: str) -> List[str]:
    return text.lower().split()


def read_labeled_csv(path: str, num_classes: int) -> List[Tuple[str, int]]:
    rows: List[Tuple[str, int]] = []
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open dataset file {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["text", "label"]:
            raise DataError(f"{path}: expected header 'text,label', got {header}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise DataError(f"{path}:{line_no}: expected 2 fields, got {len(row)}")
            text, label_str = row
            try:
                label = int(label_str)
            except ValueError:
                raise DataError(f"{path}:{line_no}: label {label_str!r} is not an integer")
            if not 0 <= label < num_classes:
                raise DataError(f"{path}:{line_no}: label {label} outside [0, {num_classes})")
            rows.append((text, label))
    return rows


def build_vocab(examples: List[Tuple[str, int]], min_count: int = 2) -> Dict[str, int]:
    """Dense id map over tokens seen at least min_count times; 0=pad, 1=unk."""
    counts = Counter()
    for text, _ in examples:
        counts.update(_tokens(text))
    vocab = {"<pad>": PAD_ID, "<unk>": UNK_ID}
    for token, count in sorted(counts.items()):
        if count >= min_count:
            vocab[token] = len(vocab)
    return vocab


def load_dataset(path: str, num_classes: int, min_count: int = 2) -> Dataset:
    examples = read_labeled_csv(path, num_classes)
    return Dataset(examples, build_vocab(examples, min_count))


def tokenize(text: str, vocab: Dict[str, int], max_seq_len: int,
             truncate: bool = True) -> np.ndarray:
    """Lowercase, split on whitespace, map through the vocab with unk fallback."""
    ids = np.array([vocab.get(tok, UNK_ID) for tok in _tokens(text)], dtype=np.int64)
    if ids.size > max_seq_len:
        if not truncate:
            raise InvalidInputError(
                f"sequence of {ids.size} tokens exceeds max_seq_len {max_seq_len} "
                "and truncation is disabled")
        ids = ids[:max_seq_len]
    return ids


def encode_dataset(examples: List[Tuple[str, int]], vocab: Dict[str, int],
                   max_seq_len: int, truncate: bool = True):
    return [(tokenize(text, vocab, max_seq_len, truncate), label)
            for text, label in examples]
