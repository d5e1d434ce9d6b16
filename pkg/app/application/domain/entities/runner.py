from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .corpus import TaskKind
from .protocol import ExperimentKind, ExperimentSpec

RESULTS_FORMAT_VERSION = "1.0"

ReportFormat = Literal["markdown", "csv"]
ReportGrouping = Literal["source", "target", "k", "rho"]


class ResultRecord(BaseModel):
    """One line of the append-only results log. Holds only deterministic data."""

    model_config = ConfigDict(frozen=True)

    format_version: str = RESULTS_FORMAT_VERSION
    record_type: ExperimentKind
    spec_hash: str
    spec: ExperimentSpec
    payload: Dict[str, Any]


class RunRecord(BaseModel):
    """Per-run bookkeeping: artifacts, timings and resource use."""

    model_config = ConfigDict(frozen=True)

    format_version: str = RESULTS_FORMAT_VERSION
    spec_hash: str
    command: str
    inputs: Tuple[str, ...] = ()
    outputs: Tuple[str, ...] = ()
    wall_time_seconds: float = Field(ge=0.0)
    per_k_seconds: Tuple[float, ...] = ()
    seed: int
    toolkit_version: str
    peak_rss_bytes: Optional[int] = None
    detail: Dict[str, Any] = Field(default_factory=dict)


class ReportSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    record_types: Tuple[ExperimentKind, ...] = ("sweep",)
    task_kind: Optional[TaskKind] = None
    source_language: Optional[str] = None
    target_language: Optional[str] = None
    spec_hashes: Tuple[str, ...] = ()
    output_format: ReportFormat = "markdown"
    group_by: ReportGrouping = "target"

    def matches(self, record: ResultRecord) -> bool:
        spec = record.spec
        if record.record_type not in self.record_types:
            return False
        if self.task_kind is not None and spec.task_kind != self.task_kind:
            return False
        if self.source_language is not None and self.source_language not in spec.source_languages:
            return False
        if self.target_language is not None and spec.target_language != self.target_language:
            return False
        if self.spec_hashes and record.spec_hash not in self.spec_hashes:
            return False
        return True
