import hashlib
import json
from typing import Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TaskKind = Literal["pos", "span"]
SplitName = Literal["train", "dev", "test"]
SPLIT_NAMES: Tuple[str, ...] = ("train", "dev", "test")

OUTSIDE_TAG = "O"
DEFAULT_ENTITY_TYPES: Tuple[str, ...] = ("PER", "ORG", "LOC", "MISC")
UNIVERSAL_POS_TAGS: Tuple[str, ...] = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)


def parse_bio(tag: str) -> Tuple[str, Optional[str]]:
    """Split a BIO tag into (prefix, entity type); O has no type."""
    if tag == OUTSIDE_TAG:
        return OUTSIDE_TAG, None
    prefix, sep, entity = tag.partition("-")
    if not sep or prefix not in ("B", "I") or not entity:
        raise ValueError(f"unknown BIO tag shape {tag!r}")
    return prefix, entity


def orphan_positions(tags: Sequence[str]) -> List[int]:
    """Positions of I-X tags not preceded by B-X or I-X."""
    orphans = []
    previous: Optional[str] = None
    for i, tag in enumerate(tags):
        prefix, entity = parse_bio(tag)
        if prefix == "I" and previous != entity:
            orphans.append(i)
        previous = entity
    return orphans


def repair_bio(tags: Sequence[str]) -> Tuple[Tuple[str, ...], int]:
    repaired = list(tags)
    orphans = orphan_positions(tags)
    for i in orphans:
        repaired[i] = "B-" + repaired[i][2:]
    return tuple(repaired), len(orphans)


def span_inventory(entity_types: Sequence[str]) -> Tuple[str, ...]:
    return (OUTSIDE_TAG, *(f"{prefix}-{entity}" for entity in entity_types for prefix in ("B", "I")))


class Sentence(BaseModel):
    model_config = ConfigDict(frozen=True)

    tokens: Tuple[str, ...]
    tags: Tuple[str, ...]

    @model_validator(mode="after")
    def _aligned(self) -> "Sentence":
        if len(self.tokens) < 1:
            raise ValueError("a sentence needs at least one token")
        if len(self.tokens) != len(self.tags):
            raise ValueError(f"{len(self.tokens)} tokens but {len(self.tags)} tags")
        return self

    def __len__(self) -> int:
        return len(self.tokens)


class Corpus(BaseModel):
    model_config = ConfigDict(frozen=True)

    language_code: str
    task_kind: TaskKind
    splits: Dict[SplitName, Tuple[Sentence, ...]]
    label_inventory: Tuple[str, ...]
    generation_seed: Optional[int] = None

    @model_validator(mode="after")
    def _labels_valid(self) -> "Corpus":
        inventory = set(self.label_inventory)
        for split, sentences in self.splits.items():
            for idx, sentence in enumerate(sentences):
                unknown = set(sentence.tags) - inventory
                if unknown:
                    raise ValueError(f"{split}[{idx}]: tags {sorted(unknown)} are not in the label inventory")
                if self.task_kind == "span" and orphan_positions(sentence.tags):
                    raise ValueError(f"{split}[{idx}]: I- tag without a preceding B- or I- of the same type")
        if self.task_kind == "span":
            for label in self.label_inventory:
                parse_bio(label)
        return self

    def split(self, name: str) -> Tuple[Sentence, ...]:
        return self.splits.get(name, ())

    def has_split(self, name: str) -> bool:
        return len(self.split(name)) > 0

    def with_split(self, name: str, sentences: Sequence[Sentence]) -> "Corpus":
        splits = dict(self.splits)
        splits[name] = tuple(sentences)
        return Corpus(
            language_code=self.language_code,
            task_kind=self.task_kind,
            splits=splits,
            label_inventory=self.label_inventory,
            generation_seed=self.generation_seed,
        )

    def sizes(self) -> Dict[str, int]:
        return {name: len(self.split(name)) for name in SPLIT_NAMES}

    def content_digest(self, names: Sequence[str] = SPLIT_NAMES) -> str:
        """sha256 over the tokens and tags of the named splits."""
        digest = hashlib.sha256()
        for name in names:
            digest.update(f"#{name}\n".encode("utf-8"))
            for sentence in self.split(name):
                line = json.dumps([sentence.tokens, sentence.tags], ensure_ascii=False, separators=(",", ":"))
                digest.update(line.encode("utf-8") + b"\n")
        return digest.hexdigest()


class LanguageProfile(BaseModel):
    """Recipe for one synthetic language."""

    model_config = ConfigDict(frozen=True)

    language_code: str = Field(min_length=1)
    vocab_seed: int = Field(ge=0)
    reorder_window: int = Field(default=1, ge=1)
    noise_rate: float = Field(default=0.0, ge=0.0, lt=0.5)
    train_size: int = Field(default=200, ge=1)
    dev_size: int = Field(default=40, ge=1)
    test_size: int = Field(default=40, ge=1)
    shared_lexicon_rate: float = Field(default=0.0, ge=0.0, le=1.0)
    grammar_seed: Optional[int] = Field(default=None, ge=0)

    @field_validator("language_code")
    @classmethod
    def _code_is_path_safe(cls, value: str) -> str:
        if not value.replace("_", "").replace("-", "").isalnum():
            raise ValueError(f"language code {value!r} must be alphanumeric")
        return value

    def split_size(self, split: str) -> int:
        return {"train": self.train_size, "dev": self.dev_size, "test": self.test_size}[split]
