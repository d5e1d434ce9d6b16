"""Experiment dispatch and the append-only bookkeeping around it.

The results log gets one ResultRecord per experiment holding only deterministic
data; timings and resource use go to the runs log as RunRecords.
"""

import logging
import math
import os
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

import psutil

from ai_engine.encoder import HeadMask

from ... import __version__
from ..domain.entities.importance import HeadImportanceMatrix
from ..domain.entities.protocol import (
    ExperimentSpec,
    MultiSourceResult,
    SubsampleRow,
    SubsampleStudyResult,
    SweepResult,
)
from ..domain.entities.runner import ReportSpec, ResultRecord, RunRecord
from ..domain.errors import IdempotenceError, InputValidationError, MissingArtifactError
from ..domain.interfaces.artifacts import IArtifactRepository
from ..domain.interfaces.results import IResultsRepository
from ..domain.use_cases.runner import IReportUseCase, IRunExperimentUseCase, ISubsampleStudyUseCase
from .importance import CorrelateUseCase, correlation_table, spearman_rho
from .multi_source import MultiSourceUseCase
from .protocol import PruneSweepUseCase, RankPipelineUseCase, TrainUseCase

logger = logging.getLogger(__name__)

SWEEP_KINDS = ("sweep", "baseline-max", "baseline-rand")


def resident_bytes() -> Optional[int]:
    try:
        return psutil.Process(os.getpid()).memory_info().rss
    except psutil.Error:
        return None


class _Bookkeeper:
    """Shared commit logic for the experiment use cases."""

    def __init__(self, results_repo: IResultsRepository, artifact_repo: IArtifactRepository):
        self.results_repo = results_repo
        self.artifact_repo = artifact_repo

    def guard(self, spec: ExperimentSpec, force: bool) -> None:
        spec_hash = spec.spec_hash()
        if self.results_repo.has_spec_hash(spec_hash):
            if not force:
                logger.warning("Spec %s is already recorded; refusing to rerun", spec_hash)
                raise IdempotenceError(spec_hash)
            logger.warning("Spec %s is already recorded; rerunning because of --force", spec_hash)

    def commit(self, spec: ExperimentSpec, command: str, payload: Dict[str, Any], started: float,
               inputs: Sequence[str] = (), outputs: Sequence[str] = (), per_k_seconds: Sequence[float] = (),
               detail: Optional[Dict[str, Any]] = None, record: bool = True) -> RunRecord:
        missing = [path for path in outputs if not self.artifact_repo.resolve(path).exists()]
        if missing:
            raise MissingArtifactError(f"run produced no file at {', '.join(missing)}")
        spec_hash = spec.spec_hash()
        if record:
            self.results_repo.append(
                ResultRecord(record_type=spec.kind, spec_hash=spec_hash, spec=spec, payload=payload)
            )
        run = RunRecord(
            spec_hash=spec_hash,
            command=command,
            inputs=tuple(inputs),
            outputs=tuple(outputs),
            wall_time_seconds=time.perf_counter() - started,
            per_k_seconds=tuple(per_k_seconds),
            seed=spec.seed,
            toolkit_version=__version__,
            peak_rss_bytes=resident_bytes(),
            detail=detail or {},
        )
        self.results_repo.append_run(run)
        logger.info("%s %s finished in %.1fs", command, spec_hash, run.wall_time_seconds)
        return run


class SubsampleStudyUseCase(ISubsampleStudyUseCase):
    """Multi-lingual sweeps over growing target-train subsets, ranking fixed from the sources."""

    def __init__(self, results_repo: IResultsRepository, artifact_repo: IArtifactRepository,
                 rank_pipeline: RankPipelineUseCase, prune_sweep: PruneSweepUseCase):
        self.bookkeeper = _Bookkeeper(results_repo, artifact_repo)
        self.rank_pipeline = rank_pipeline
        self.prune_sweep = prune_sweep

    def execute(self, spec: ExperimentSpec, force: bool = False) -> Tuple[SubsampleStudyResult, List[RunRecord]]:
        if spec.setting != "multi_lingual":
            raise InputValidationError("subsample-study requires setting=multi_lingual")
        self.bookkeeper.guard(spec, force)
        ranking, ranked = self.rank_pipeline.rank_sources(spec, force)
        inputs = [outcome.importance_path for outcome in ranked.values()]

        rows: List[SubsampleRow] = []
        runs: List[RunRecord] = []
        for tenths in spec.tenths:
            started = time.perf_counter()
            subsampled = spec.model_copy(update={"target_train_tenths": tenths})
            outcome = self.prune_sweep.execute(subsampled, ranking, kind="sweep")
            indices = outcome.target_train_indices(spec.target_language)
            rows.append(
                SubsampleRow(
                    tenths=tenths,
                    target_train_sentences=len(indices),
                    unpruned_score=outcome.result.unpruned_score,
                    pruned_score=outcome.result.best_score,
                    best_k=outcome.result.best_k,
                    target_train_indices=indices,
                )
            )
            logger.info("tenths=%d: %d target sentences, unpruned %.4f, pruned %.4f", tenths, len(indices),
                        outcome.result.unpruned_score, outcome.result.best_score)
            runs.append(
                self.bookkeeper.commit(subsampled, "subsample-study", {}, started, inputs=inputs,
                                       per_k_seconds=outcome.per_k_seconds, detail={"tenths": tenths},
                                       record=False)
            )

        result = SubsampleStudyResult(
            spec_hash=spec.spec_hash(),
            task_kind=spec.task_kind,
            source_languages=spec.source_languages,
            target_language=spec.target_language,
            rows=tuple(rows),
        )
        self.bookkeeper.results_repo.append(
            ResultRecord(record_type=spec.kind, spec_hash=spec.spec_hash(), spec=spec,
                         payload=result.model_dump(mode="json"))
        )
        return result, runs


class RunExperimentUseCase(IRunExperimentUseCase):
    def __init__(self, results_repo: IResultsRepository, artifact_repo: IArtifactRepository,
                 train_use_case: TrainUseCase, rank_pipeline: RankPipelineUseCase,
                 prune_sweep: PruneSweepUseCase, multi_source: MultiSourceUseCase,
                 subsample_study: SubsampleStudyUseCase, correlate: CorrelateUseCase):
        self.bookkeeper = _Bookkeeper(results_repo, artifact_repo)
        self.train_use_case = train_use_case
        self.rank_pipeline = rank_pipeline
        self.prune_sweep = prune_sweep
        self.multi_source = multi_source
        self.subsample_study = subsample_study
        self.correlate_use_case = correlate

    def execute(self, spec: ExperimentSpec, force: bool = False) -> Any:
        """Runs the experiment named by spec.kind and returns its result object."""
        if spec.kind == "subsample-study":
            result, _ = self.subsample_study.execute(spec, force)
            return result

        self.bookkeeper.guard(spec, force)
        started = time.perf_counter()
        inputs: List[str] = []
        outputs: List[str] = []
        per_k: List[float] = []
        detail: Dict[str, Any] = {}

        if spec.kind == "train":
            outcome = self.train_use_case.execute(spec, force)
            result = outcome
            payload = {"evaluation": outcome.evaluation.model_dump(mode="json"), "checkpoint": outcome.checkpoint_path}
            outputs.append(outcome.checkpoint_path)
        elif spec.kind == "rank":
            result = {code: self.rank_pipeline.execute(spec, code, force) for code in spec.source_languages}
            payload = self._rank_payload(result)
            for outcome in result.values():
                outputs.extend([outcome.importance_path, outcome.checkpoint_path])
        elif spec.kind == "multi-source":
            outcome = self.multi_source.execute(spec, force)
            result = outcome.result
            payload = result.model_dump(mode="json")
            inputs.extend(outcome.importance_paths)
            detail["per_k_seconds"] = outcome.per_k_seconds
            detail["trainings_required"] = result.trainings_required
        else:
            if spec.kind == "baseline-rand":
                outcome = self.prune_sweep.baseline_random_prune(spec)
            else:
                ranking, ranked = self.rank_pipeline.rank_sources(spec, force)
                inputs.extend(o.importance_path for o in ranked.values())
                if spec.kind == "baseline-max":
                    outcome = self.prune_sweep.baseline_max_prune(spec, ranking)
                else:
                    outcome = self.prune_sweep.execute(spec, ranking, kind="sweep")
            result = outcome.result
            payload = result.model_dump(mode="json")
            per_k = outcome.per_k_seconds
            outputs.append(self._save_best_mask(spec, result))

        self.bookkeeper.commit(spec, spec.kind, payload, started, inputs=inputs, outputs=outputs,
                               per_k_seconds=per_k, detail=detail)
        return result

    def _save_best_mask(self, spec: ExperimentSpec, result: SweepResult) -> str:
        artifacts = self.bookkeeper.artifact_repo
        mask = HeadMask.from_pruned(spec.encoder.num_layers, spec.encoder.num_heads_per_layer, result.pruned_heads)
        path = artifacts.save_mask(mask, artifacts.mask_path(spec.task_kind, result.spec_hash, spec.kind))
        return artifacts.relative(path)

    @staticmethod
    def _rank_payload(ranked) -> Dict[str, Any]:
        return {
            "importance": {
                code: {
                    "path": outcome.importance_path,
                    "checkpoint": outcome.checkpoint_path,
                    "degenerate": outcome.matrix.degenerate,
                }
                for code, outcome in ranked.items()
            }
        }

    def correlate(self, spec: ExperimentSpec, force: bool = False):
        """Rank every source language (reusing cached importance) and write their rho table."""
        if len(spec.source_languages) < 2:
            raise InputValidationError("correlate needs at least two source languages")
        rank_spec = spec.model_copy(update={"kind": "rank"})
        started = time.perf_counter()
        ranked = {code: self.rank_pipeline.execute(rank_spec, code, force) for code in spec.source_languages}
        table, path = self.correlate_use_case.execute([outcome.matrix for outcome in ranked.values()])
        record = not self.bookkeeper.results_repo.has_spec_hash(rank_spec.spec_hash())
        self.bookkeeper.commit(rank_spec, "correlate", self._rank_payload(ranked), started,
                               inputs=[o.importance_path for o in ranked.values()], outputs=[path], record=record)
        return table, path


class ReportUseCase(IReportUseCase):
    """Pure function of the results log (plus the importance files it references)."""

    def __init__(self, results_repo: IResultsRepository, artifact_repo: IArtifactRepository, export_service):
        self.results_repo = results_repo
        self.artifact_repo = artifact_repo
        self.export_service = export_service

    def execute(self, report: ReportSpec) -> str:
        records = [record for record in self.results_repo.records() if report.matches(record)]
        if not records:
            raise MissingArtifactError("no recorded results match the report selection")
        kinds = {record.record_type for record in records}
        if len(kinds) > 1:
            raise InputValidationError(f"report mixes record types {sorted(kinds)}; select one")
        kind = kinds.pop()
        exporter = self.export_service

        if kind == "rank":
            return exporter.correlation_csv(correlation_table(self._latest_matrices(records)))
        if kind == "multi-source":
            frame = exporter.multi_source_frame([MultiSourceResult.model_validate(r.payload) for r in records])
            return exporter.to_csv(frame) if report.output_format == "csv" else exporter.to_markdown(frame)
        if kind == "subsample-study":
            frame = exporter.subsample_frame(SubsampleStudyResult.model_validate(records[-1].payload))
            pairs = [("Unpruned", "Pruned")]
            return exporter.to_csv(frame, pairs) if report.output_format == "csv" else exporter.to_markdown(frame, pairs)
        if kind not in SWEEP_KINDS:
            raise InputValidationError(f"record type {kind!r} has no tabular report")

        latest: Dict[str, SweepResult] = {}
        for record in records:
            latest[record.spec_hash] = SweepResult.model_validate(record.payload)
        if report.group_by == "rho":
            return self._transfer_report(list(latest.values()), report.output_format)
        frame = exporter.sweep_frame(list(latest.values()), report.group_by)
        pairs = [] if report.group_by == "k" else exporter.score_pairs()
        return exporter.to_csv(frame, pairs) if report.output_format == "csv" else exporter.to_markdown(frame, pairs)

    def _latest_matrices(self, records: Sequence[ResultRecord]) -> List[HeadImportanceMatrix]:
        paths: Dict[str, str] = {}
        for record in records:
            for code, entry in record.payload.get("importance", {}).items():
                paths[code] = entry["path"]
        return [self.artifact_repo.load_importance(self.artifact_repo.resolve(path)) for path in paths.values()]

    def _transfer_report(self, results: Sequence[SweepResult], output_format: str) -> str:
        """Pruning gain of each single-source sweep next to the source/target ranking rho."""
        matrices: Dict[Tuple[str, str], HeadImportanceMatrix] = {}
        for task_kind in sorted({result.task_kind for result in results}):
            ranked = [r for r in self.results_repo.records() if r.record_type == "rank" and r.spec.task_kind == task_kind]
            for matrix in self._latest_matrices(ranked):
                matrices[(task_kind, matrix.language_code)] = matrix

        rows = []
        for result in results:
            if len(result.source_languages) != 1:
                continue
            source = matrices.get((result.task_kind, result.source_languages[0]))
            target = matrices.get((result.task_kind, result.target_language))
            rho = float("nan")
            if source is not None and target is not None and source.shape == target.shape:
                rho = spearman_rho(source, target).rho
            rows.append((result, rho))
        if all(math.isnan(rho) for _, rho in rows):
            raise MissingArtifactError("no ranked source/target pair matches the selected sweeps; run correlate first")

        exporter = self.export_service
        frame = exporter.transfer_frame(rows)
        summary = exporter.transfer_summary(frame)
        if output_format == "csv":
            return exporter.to_csv(frame) + exporter.summary_comments(summary)
        return exporter.to_markdown(frame) + "\n" + exporter.to_markdown(summary)
