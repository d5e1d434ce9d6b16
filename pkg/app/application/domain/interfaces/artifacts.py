from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional

from ai_engine.encoder import EncoderModel, HeadMask

from ..entities.importance import CorrelationTable, HeadImportanceMatrix


class IArtifactRepository(ABC):
    @abstractmethod
    def relative(self, path: Path) -> str:
        pass

    @abstractmethod
    def resolve(self, name: str) -> Path:
        pass

    @abstractmethod
    def importance_path(self, task_kind: str, language_code: str, key: str) -> Path:
        pass

    @abstractmethod
    def save_importance(self, matrix: HeadImportanceMatrix, path: Path) -> Path:
        pass

    @abstractmethod
    def load_importance(self, path: Path) -> HeadImportanceMatrix:
        pass

    @abstractmethod
    def checkpoint_path(self, task_kind: str, language_code: str, key: str) -> Path:
        pass

    @abstractmethod
    def save_checkpoint(self, model: EncoderModel, path: Path) -> Path:
        pass

    @abstractmethod
    def load_checkpoint(self, path: Path) -> EncoderModel:
        pass

    @abstractmethod
    def mask_path(self, task_kind: str, spec_hash: str, kind: str) -> Path:
        pass

    @abstractmethod
    def save_mask(self, mask: HeadMask, path: Path) -> Path:
        pass

    @abstractmethod
    def load_mask(self, path: Path) -> HeadMask:
        pass

    @abstractmethod
    def save_correlation(self, table: CorrelationTable, path: Optional[Path] = None) -> Path:
        pass

    @abstractmethod
    def load_correlation(self, path: Path) -> CorrelationTable:
        pass

    @abstractmethod
    def save_text(self, relative_path: str, text: str) -> Path:
        pass
