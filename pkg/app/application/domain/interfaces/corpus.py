from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Sequence, Tuple

from ..entities.corpus import Corpus, Sentence, TaskKind


class ICorpusRepository(ABC):
    @abstractmethod
    def load_conll(self, path: Path, task_kind: TaskKind, language_code: str = "und", split: str = "train") -> Tuple[Corpus, int]:
        pass

    @abstractmethod
    def write_conll(self, sentences: Sequence[Sentence], path: Path) -> Path:
        pass

    @abstractmethod
    def save(self, corpus: Corpus) -> Path:
        pass

    @abstractmethod
    def get(self, task_kind: TaskKind, language_code: str) -> Corpus:
        pass

    @abstractmethod
    def exists(self, task_kind: TaskKind, language_code: str) -> bool:
        pass

    @abstractmethod
    def list_languages(self, task_kind: TaskKind) -> List[str]:
        pass
