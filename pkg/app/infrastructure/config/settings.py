import logging
from pathlib import Path

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    debug: bool = False
    log_level: str = "INFO"
    data_dir: Path = Path("data")
    corpus_dir: Path = Path("data/corpora")
    artifacts_dir: Path = Path("artifacts")
    results_log: Path = Path("artifacts/results.jsonl")
    runs_log: Path = Path("artifacts/runs.jsonl")
    learning_rate: float = 5e-5
    epochs: int = 3
    batch_size: int = 16
    prune_limit: int = 12
    random_prune_seed: int = 42
    max_workers: int = 1

    class Config:
        env_file = ".env"
        env_prefix = "HEADPRUNE_"

    def logging_level(self) -> int:
        """DEBUG when debug is on, otherwise the named log_level."""
        if self.debug:
            return logging.DEBUG
        return getattr(logging, self.log_level.upper(), logging.INFO)


settings = Settings()
