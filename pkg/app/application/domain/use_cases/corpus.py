from abc import ABC, abstractmethod
from typing import List, Sequence

from ..entities.corpus import DEFAULT_ENTITY_TYPES, Corpus, LanguageProfile, TaskKind


class IGenerateCorpusUseCase(ABC):
    @abstractmethod
    def execute(self, profiles: Sequence[LanguageProfile], task_kind: TaskKind, master_seed: int,
                entity_types: Sequence[str] = DEFAULT_ENTITY_TYPES) -> List[Corpus]:
        pass
