from abc import ABC, abstractmethod

from ..entities.protocol import ExperimentSpec
from ..entities.runner import ReportSpec


class IRunExperimentUseCase(ABC):
    @abstractmethod
    def execute(self, spec: ExperimentSpec, force: bool = False):
        pass


class ISubsampleStudyUseCase(ABC):
    @abstractmethod
    def execute(self, spec: ExperimentSpec, force: bool = False):
        pass


class IReportUseCase(ABC):
    @abstractmethod
    def execute(self, report: ReportSpec) -> str:
        pass
