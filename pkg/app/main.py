import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dependency_injector import providers
from pydantic import ValidationError

from ai_engine.autodiff import AutodiffError
from ai_engine.encoder import ConfigError, MaskError
from ai_engine.train_model import NonFiniteLossError

from . import __version__
from .application.container import Container
from .application.domain.errors import InputValidationError, NumericFailureError, ToolkitError
from .application.handler.commands import COMMAND_GROUPS
from .infrastructure.config.settings import Settings

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headprune",
        description="Gradient-based attention-head ranking and pruning for cross-lingual sequence labeling",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--out", type=Path, default=None, help="artifact directory (logs are kept inside it)")
    parser.add_argument("--corpus-dir", type=Path, default=None)
    parser.add_argument("--workers", type=int, default=None, help="parallel fine-tunes per sweep")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for group in COMMAND_GROUPS:
        group.register(subparsers)
    return parser


def configure(args: argparse.Namespace) -> Settings:
    overrides = {}
    if args.out is not None:
        overrides.update(
            artifacts_dir=args.out, results_log=args.out / "results.jsonl", runs_log=args.out / "runs.jsonl"
        )
    if args.corpus_dir is not None:
        overrides["corpus_dir"] = args.corpus_dir
    if args.workers is not None:
        overrides["max_workers"] = args.workers
    return Settings(**overrides)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = configure(args)
    except ValidationError as exc:
        print(f"invalid settings:\n{exc}", file=sys.stderr)
        return 2
    logging.basicConfig(
        level=settings.logging_level(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    container = Container()
    container.config.override(providers.Object(settings))
    try:
        return args.handler(args, container)
    except ValidationError as exc:
        logger.error("invalid input:\n%s", exc)
        return 2
    except ToolkitError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except (AutodiffError, ConfigError, MaskError) as exc:
        logger.error("invalid model input: %s", exc)
        return InputValidationError.exit_code
    except NonFiniteLossError as exc:
        logger.error("%s", exc)
        return NumericFailureError.exit_code
