import json
import logging
import os
from pathlib import Path
from typing import List, Type, TypeVar

from pydantic import BaseModel, ValidationError

from ...application.domain.entities.runner import RESULTS_FORMAT_VERSION, ResultRecord, RunRecord
from ...application.domain.errors import ArtifactFormatError
from ...application.domain.interfaces.results import IResultsRepository

logger = logging.getLogger(__name__)

RecordT = TypeVar("RecordT", bound=BaseModel)


def canonical_line(record: BaseModel) -> str:
    return json.dumps(record.model_dump(mode="json"), sort_keys=True, separators=(",", ":")) + "\n"


def _append_line(path: Path, line: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()
        os.fsync(fh.fileno())


def _read_lines(path: Path, model: Type[RecordT]) -> List[RecordT]:
    if not path.exists():
        return []
    records = []
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                document = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ArtifactFormatError(f"{path}:{number}: not valid JSON ({exc})") from None
            version = str(document.get("format_version", ""))
            if version.split(".")[0] != RESULTS_FORMAT_VERSION.split(".")[0]:
                raise ArtifactFormatError(f"{path}:{number}: unsupported format_version {version!r}")
            try:
                records.append(model.model_validate(document))
            except ValidationError as exc:
                raise ArtifactFormatError(f"{path}:{number}: {exc}") from None
    return records


class ResultsRepository(IResultsRepository):
    """Append-only JSONL logs. Results hold deterministic payloads; runs hold timings and resources."""

    def __init__(self, results_log: Path, runs_log: Path):
        self.results_log = Path(results_log)
        self.runs_log = Path(runs_log)

    def append(self, record: ResultRecord) -> None:
        _append_line(self.results_log, canonical_line(record))
        logger.info("Committed %s record %s", record.record_type, record.spec_hash)

    def has_spec_hash(self, spec_hash: str) -> bool:
        return any(record.spec_hash == spec_hash for record in self.records())

    def records(self) -> List[ResultRecord]:
        return _read_lines(self.results_log, ResultRecord)

    def append_run(self, run: RunRecord) -> None:
        _append_line(self.runs_log, canonical_line(run))

    def runs(self) -> List[RunRecord]:
        return _read_lines(self.runs_log, RunRecord)
