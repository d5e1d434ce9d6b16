"""Dependency Injection Container"""

from dependency_injector import containers, providers

from ..infrastructure.config.settings import Settings
from ..infrastructure.repositories import ArtifactRepository, CorpusRepository, ResultsRepository
from ..infrastructure.utils.export_service import ExportService
from ..infrastructure.utils.seed_service import SyntheticCorpusService
from .use_cases import (
    CorrelateUseCase,
    EvaluateUseCase,
    GenerateCorpusUseCase,
    MultiSourceUseCase,
    PruneSweepUseCase,
    RankPipelineUseCase,
    ReportUseCase,
    RunExperimentUseCase,
    SubsampleStudyUseCase,
    TrainUseCase,
)


class Container(containers.DeclarativeContainer):
    """Application dependency injection container"""

    # Configuration
    config = providers.Singleton(Settings)

    # Repositories
    corpus_repository = providers.Singleton(CorpusRepository, corpus_dir=config.provided.corpus_dir)
    artifact_repository = providers.Singleton(ArtifactRepository, artifacts_dir=config.provided.artifacts_dir)
    results_repository = providers.Singleton(
        ResultsRepository, results_log=config.provided.results_log, runs_log=config.provided.runs_log
    )

    # Services
    seed_service = providers.Singleton(SyntheticCorpusService, corpus_repo=corpus_repository)
    export_service = providers.Singleton(ExportService)

    # Use Cases
    generate_corpus_use_case = providers.Singleton(GenerateCorpusUseCase, seed_service=seed_service)
    evaluate_use_case = providers.Singleton(EvaluateUseCase, corpus_repo=corpus_repository)
    correlate_use_case = providers.Singleton(CorrelateUseCase, artifact_repo=artifact_repository)
    train_use_case = providers.Singleton(TrainUseCase, corpus_repo=corpus_repository, artifact_repo=artifact_repository)
    rank_pipeline_use_case = providers.Singleton(
        RankPipelineUseCase, corpus_repo=corpus_repository, artifact_repo=artifact_repository
    )
    prune_sweep_use_case = providers.Singleton(
        PruneSweepUseCase, corpus_repo=corpus_repository, max_workers=config.provided.max_workers
    )
    multi_source_use_case = providers.Singleton(
        MultiSourceUseCase, rank_pipeline=rank_pipeline_use_case, prune_sweep=prune_sweep_use_case
    )
    subsample_study_use_case = providers.Singleton(
        SubsampleStudyUseCase,
        results_repo=results_repository,
        artifact_repo=artifact_repository,
        rank_pipeline=rank_pipeline_use_case,
        prune_sweep=prune_sweep_use_case,
    )
    run_experiment_use_case = providers.Singleton(
        RunExperimentUseCase,
        results_repo=results_repository,
        artifact_repo=artifact_repository,
        train_use_case=train_use_case,
        rank_pipeline=rank_pipeline_use_case,
        prune_sweep=prune_sweep_use_case,
        multi_source=multi_source_use_case,
        subsample_study=subsample_study_use_case,
        correlate=correlate_use_case,
    )
    report_use_case = providers.Singleton(
        ReportUseCase, results_repo=results_repository, artifact_repo=artifact_repository, export_service=export_service
    )


# Global container instance
container = Container()
