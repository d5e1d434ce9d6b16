from pathlib import Path

import pytest
from dependency_injector import providers

from ai_engine.encoder import ModelConfig
from app.application.container import Container
from app.application.domain.entities.corpus import LanguageProfile
from app.application.domain.entities.protocol import ExperimentSpec, TrainConfig
from app.infrastructure.config.settings import Settings
from app.infrastructure.repositories import ArtifactRepository, CorpusRepository, ResultsRepository
from app.infrastructure.utils.seed_service import SyntheticCorpusService

TINY_ENCODER = dict(num_layers=2, num_heads_per_layer=2, model_dim=8, feedforward_dim=16, max_sequence_length=40)
FAST_TRAIN = dict(epochs=2, learning_rate=5e-3, batch_size=8)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow directional reproductions")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-seed reproductions, run with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def small_profiles(train_size: int = 20, dev_size: int = 10, test_size: int = 10):
    return [
        LanguageProfile(language_code=code, vocab_seed=seed, reorder_window=window, train_size=train_size,
                        dev_size=dev_size, test_size=test_size, shared_lexicon_rate=0.5)
        for code, seed, window in (("aa", 1, 1), ("bb", 2, 2), ("cc", 3, 1))
    ]


@pytest.fixture
def tiny_config() -> ModelConfig:
    return ModelConfig(**TINY_ENCODER)


@pytest.fixture
def settings(tmp_path: Path) -> Settings:
    artifacts = tmp_path / "artifacts"
    return Settings(
        corpus_dir=tmp_path / "corpora",
        artifacts_dir=artifacts,
        results_log=artifacts / "results.jsonl",
        runs_log=artifacts / "runs.jsonl",
    )


@pytest.fixture
def corpus_repo(settings) -> CorpusRepository:
    return CorpusRepository(settings.corpus_dir)


@pytest.fixture
def artifact_repo(settings) -> ArtifactRepository:
    return ArtifactRepository(settings.artifacts_dir)


@pytest.fixture
def results_repo(settings) -> ResultsRepository:
    return ResultsRepository(settings.results_log, settings.runs_log)


@pytest.fixture
def pos_suite(corpus_repo):
    return SyntheticCorpusService(corpus_repo).generate_and_save(small_profiles(), "pos", 0)


@pytest.fixture
def span_suite(corpus_repo):
    return SyntheticCorpusService(corpus_repo).generate_and_save(small_profiles(), "span", 0)


@pytest.fixture
def container(settings) -> Container:
    app_container = Container()
    app_container.config.override(providers.Object(settings))
    return app_container


@pytest.fixture
def make_spec():
    def build(**overrides) -> ExperimentSpec:
        fields = dict(
            task_kind="pos",
            source_languages=("aa",),
            target_language="bb",
            encoder=ModelConfig(**TINY_ENCODER),
            train=TrainConfig(**FAST_TRAIN),
            prune_limit=2,
        )
        fields.update(overrides)
        return ExperimentSpec(**fields)

    return build
