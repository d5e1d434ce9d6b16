"""Vocabularies and sequential padded batches.

Batches are handed out strictly in example order; the loader keeps a record of
every example key it served so callers can audit what a training run saw.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1
IGNORE_INDEX = -100

# (language_code, split, sentence index)
ExampleKey = Tuple[str, str, int]


@dataclass(frozen=True)
class Example:
    key: ExampleKey
    tokens: Tuple[str, ...]
    tags: Tuple[str, ...]


@dataclass(frozen=True)
class Vocabulary:
    tokens: Tuple[str, ...]
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {token: i for i, token in enumerate(self.tokens)})

    @classmethod
    def build(cls, examples: Iterable[Example]) -> "Vocabulary":
        seen = sorted({token for example in examples for token in example.tokens})
        return cls(tokens=(PAD_TOKEN, UNK_TOKEN, *seen))

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.index.get(token, UNK_ID) for token in tokens]


@dataclass(frozen=True)
class LabelVocabulary:
    labels: Tuple[str, ...]
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {label: i for i, label in enumerate(self.labels)})

    @classmethod
    def build(cls, inventories: Iterable[Sequence[str]]) -> "LabelVocabulary":
        return cls(labels=tuple(sorted({label for inventory in inventories for label in inventory})))

    def __len__(self) -> int:
        return len(self.labels)

    def encode(self, tags: Sequence[str]) -> List[int]:
        try:
            return [self.index[tag] for tag in tags]
        except KeyError as exc:
            raise ValueError(f"tag {exc.args[0]!r} is not in the label vocabulary") from None

    def decode(self, ids: Sequence[int]) -> Tuple[str, ...]:
        return tuple(self.labels[i] for i in ids)


@dataclass(frozen=True)
class Batch:
    token_ids: np.ndarray
    attention: np.ndarray
    gold: np.ndarray
    keys: Tuple[ExampleKey, ...]
    lengths: Tuple[int, ...]


def make_batch(examples: Sequence[Example], vocab: Vocabulary, labels: LabelVocabulary, pad_to: Optional[int] = None) -> Batch:
    lengths = tuple(len(example.tokens) for example in examples)
    width = max(lengths) if pad_to is None else max(pad_to, max(lengths))
    token_ids = np.full((len(examples), width), PAD_ID, dtype=np.int64)
    gold = np.full((len(examples), width), IGNORE_INDEX, dtype=np.int64)
    attention = np.zeros((len(examples), width), dtype=bool)
    for row, example in enumerate(examples):
        n = len(example.tokens)
        token_ids[row, :n] = vocab.encode(example.tokens)
        gold[row, :n] = labels.encode(example.tags)
        attention[row, :n] = True
    return Batch(token_ids=token_ids, attention=attention, gold=gold, keys=tuple(e.key for e in examples), lengths=lengths)


class SequentialLoader:
    """Fixed-order batching over a list of examples, with an audit trail."""

    def __init__(self, examples: Sequence[Example], vocab: Vocabulary, labels: LabelVocabulary, batch_size: int):
        if batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        self.examples = list(examples)
        self.vocab = vocab
        self.labels = labels
        self.batch_size = batch_size
        self.served: List[ExampleKey] = []

    def __len__(self) -> int:
        return (len(self.examples) + self.batch_size - 1) // self.batch_size

    def __iter__(self) -> Iterator[Batch]:
        for start in range(0, len(self.examples), self.batch_size):
            chunk = self.examples[start : start + self.batch_size]
            self.served.extend(example.key for example in chunk)
            yield make_batch(chunk, self.vocab, self.labels)

    def served_keys(self) -> set:
        return set(self.served)
