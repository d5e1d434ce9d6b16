from abc import ABC, abstractmethod
from typing import List

from ..entities.runner import ResultRecord, RunRecord


class IResultsRepository(ABC):
    @abstractmethod
    def append(self, record: ResultRecord) -> None:
        pass

    @abstractmethod
    def has_spec_hash(self, spec_hash: str) -> bool:
        pass

    @abstractmethod
    def records(self) -> List[ResultRecord]:
        pass

    @abstractmethod
    def append_run(self, run: RunRecord) -> None:
        pass

    @abstractmethod
    def runs(self) -> List[RunRecord]:
        pass
