from abc import ABC, abstractmethod
from typing import Sequence, Tuple

from ..entities.importance import CorrelationTable, HeadImportanceMatrix


class ICorrelateUseCase(ABC):
    @abstractmethod
    def execute(self, matrices: Sequence[HeadImportanceMatrix]) -> Tuple[CorrelationTable, str]:
        pass
