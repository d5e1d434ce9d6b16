import json
import logging
import os
import re
from pathlib import Path
from typing import List, Sequence, Tuple

from pydantic import ValidationError

from ...application.domain.entities.corpus import SPLIT_NAMES, Corpus, Sentence, TaskKind, parse_bio, repair_bio
from ...application.domain.errors import CorpusFormatError, MissingArtifactError
from ...application.domain.interfaces.corpus import ICorpusRepository

logger = logging.getLogger(__name__)

CORPUS_FORMAT_VERSION = "1.0"
META_FILE = "meta.json"
_WHITESPACE = re.compile(r"\s+")


def _split_columns(line: str) -> List[str]:
    if "\t" in line:
        return line.split("\t")
    return _WHITESPACE.split(line.strip())


def parse_conll(text: str, task_kind: TaskKind, source: str = "<text>") -> Tuple[List[Sentence], int]:
    """Parse two-column CoNLL text into sentences; returns (sentences, BIO repairs made)."""
    sentences: List[Sentence] = []
    tokens: List[str] = []
    tags: List[str] = []
    repairs = 0

    def close_sentence():
        nonlocal repairs
        if not tokens:
            return
        fixed = tuple(tags)
        if task_kind == "span":
            fixed, count = repair_bio(fixed)
            repairs += count
        sentences.append(Sentence(tokens=tuple(tokens), tags=fixed))
        tokens.clear()
        tags.clear()

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            close_sentence()
            continue
        columns = _split_columns(line)
        if len(columns) != 2 or not all(columns):
            raise CorpusFormatError(f"expected 2 columns (token, tag), found {len(columns)}", source, number)
        token, tag = columns
        if task_kind == "span":
            try:
                parse_bio(tag)
            except ValueError as exc:
                raise CorpusFormatError(str(exc), source, number) from None
        tokens.append(token)
        tags.append(tag)
    close_sentence()

    if not sentences:
        raise CorpusFormatError("no sentences", source)
    return sentences, repairs


def render_conll(sentences: Sequence[Sentence]) -> str:
    blocks = ["".join(f"{token}\t{tag}\n" for token, tag in zip(s.tokens, s.tags)) for s in sentences]
    return "\n".join(blocks) + ("\n" if blocks else "")


def _observed_inventory(sentences: Sequence[Sentence], task_kind: TaskKind) -> Tuple[str, ...]:
    labels = {tag for sentence in sentences for tag in sentence.tags}
    if task_kind == "span":
        labels.add("O")
        entities = {parse_bio(tag)[1] for tag in labels if tag != "O"}
        labels |= {f"{prefix}-{entity}" for entity in entities for prefix in ("B", "I")}
    return tuple(sorted(labels))


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    staging = path.with_name(path.name + ".tmp")
    staging.write_text(text, encoding="utf-8")
    os.replace(staging, path)


class CorpusRepository(ICorpusRepository):
    """Corpora on disk: one directory per (task, language) with CoNLL splits and a meta sidecar."""

    def __init__(self, corpus_dir: Path):
        self.corpus_dir = Path(corpus_dir)

    def _language_dir(self, task_kind: str, language_code: str) -> Path:
        return self.corpus_dir / task_kind / language_code

    def _read_text(self, path: Path) -> str:
        try:
            return Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise MissingArtifactError(f"corpus file {path} does not exist") from None
        except (OSError, UnicodeDecodeError) as exc:
            raise CorpusFormatError(f"unreadable file: {exc}", str(path)) from None

    def load_conll(self, path: Path, task_kind: TaskKind, language_code: str = "und", split: str = "train") -> Tuple[Corpus, int]:
        sentences, repairs = parse_conll(self._read_text(path), task_kind, str(path))
        if repairs:
            logger.warning("%s: repaired %d orphan I- tag(s) to B-", path, repairs)
        try:
            corpus = Corpus(
                language_code=language_code,
                task_kind=task_kind,
                splits={split: tuple(sentences)},
                label_inventory=_observed_inventory(sentences, task_kind),
            )
        except ValidationError as exc:
            raise CorpusFormatError(str(exc), str(path)) from None
        return corpus, repairs

    def write_conll(self, sentences: Sequence[Sentence], path: Path) -> Path:
        path = Path(path)
        _write_atomic(path, render_conll(sentences))
        return path

    def save(self, corpus: Corpus) -> Path:
        directory = self._language_dir(corpus.task_kind, corpus.language_code)
        for split in SPLIT_NAMES:
            if corpus.has_split(split):
                self.write_conll(corpus.split(split), directory / f"{split}.conll")
        meta = {
            "format_version": CORPUS_FORMAT_VERSION,
            "language_code": corpus.language_code,
            "task_kind": corpus.task_kind,
            "label_inventory": list(corpus.label_inventory),
            "generation_seed": corpus.generation_seed,
            "splits": [split for split in SPLIT_NAMES if corpus.has_split(split)],
        }
        _write_atomic(directory / META_FILE, json.dumps(meta, indent=2, sort_keys=True) + "\n")
        logger.info("Saved %s corpus %s to %s", corpus.task_kind, corpus.language_code, directory)
        return directory

    def get(self, task_kind: TaskKind, language_code: str) -> Corpus:
        directory = self._language_dir(task_kind, language_code)
        meta_path = directory / META_FILE
        if not meta_path.exists():
            raise MissingArtifactError(f"no {task_kind} corpus for language {language_code!r} under {self.corpus_dir}")
        meta = json.loads(self._read_text(meta_path))
        version = str(meta.get("format_version", ""))
        if version.split(".")[0] != CORPUS_FORMAT_VERSION.split(".")[0]:
            raise CorpusFormatError(f"unsupported corpus format_version {version!r}", str(meta_path))

        splits = {}
        for split in meta.get("splits", SPLIT_NAMES):
            sentences, repairs = parse_conll(self._read_text(directory / f"{split}.conll"), task_kind, str(directory / f"{split}.conll"))
            if repairs:
                logger.warning("%s/%s: repaired %d orphan I- tag(s) to B-", directory, split, repairs)
            splits[split] = tuple(sentences)
        try:
            return Corpus(
                language_code=meta["language_code"],
                task_kind=meta["task_kind"],
                splits=splits,
                label_inventory=tuple(meta["label_inventory"]),
                generation_seed=meta.get("generation_seed"),
            )
        except (KeyError, ValidationError) as exc:
            raise CorpusFormatError(f"invalid corpus metadata: {exc}", str(meta_path)) from None

    def exists(self, task_kind: TaskKind, language_code: str) -> bool:
        return (self._language_dir(task_kind, language_code) / META_FILE).exists()

    def list_languages(self, task_kind: TaskKind) -> List[str]:
        root = self.corpus_dir / task_kind
        if not root.is_dir():
            return []
        return sorted(entry.name for entry in root.iterdir() if (entry / META_FILE).exists())
