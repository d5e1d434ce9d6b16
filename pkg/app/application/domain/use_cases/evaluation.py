from abc import ABC, abstractmethod
from pathlib import Path

from ..entities.corpus import TaskKind
from ..entities.metrics import EvalResult


class IEvaluateUseCase(ABC):
    @abstractmethod
    def execute(self, gold_path: Path, predicted_path: Path, task_kind: TaskKind) -> EvalResult:
        pass
