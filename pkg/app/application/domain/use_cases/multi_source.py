from abc import ABC, abstractmethod

from ..entities.protocol import ExperimentSpec, MultiSourceResult


class IMultiSourceUseCase(ABC):
    @abstractmethod
    def execute(self, spec: ExperimentSpec, force: bool = False) -> MultiSourceResult:
        pass
