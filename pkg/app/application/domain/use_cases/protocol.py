from abc import ABC, abstractmethod
from typing import Optional

from ..entities.importance import HeadRanking
from ..entities.protocol import ExperimentSpec


class IRankPipelineUseCase(ABC):
    @abstractmethod
    def execute(self, spec: ExperimentSpec, language_code: str, force: bool = False):
        pass


class IPruneSweepUseCase(ABC):
    @abstractmethod
    def execute(self, spec: ExperimentSpec, ranking: HeadRanking, kind: str = "sweep"):
        pass

    @abstractmethod
    def baseline_max_prune(self, spec: ExperimentSpec, ranking: HeadRanking):
        pass

    @abstractmethod
    def baseline_random_prune(self, spec: ExperimentSpec, seed: Optional[int] = None):
        pass


class ITrainUseCase(ABC):
    @abstractmethod
    def execute(self, spec: ExperimentSpec, force: bool = False):
        pass
