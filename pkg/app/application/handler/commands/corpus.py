import logging
from pathlib import Path

from ...domain.entities.corpus import DEFAULT_ENTITY_TYPES, LanguageProfile
from ....infrastructure.utils.export_service import ExportService
from .common import read_json

logger = logging.getLogger(__name__)


def gen_data(args, container) -> int:
    document = read_json(args.languages)
    profiles = [LanguageProfile.model_validate(entry) for entry in document.get("languages", [])]
    entity_types = tuple(document.get("entity_types", DEFAULT_ENTITY_TYPES))
    use_case = container.generate_corpus_use_case()
    tasks = ("pos", "span") if args.task == "both" else (args.task,)
    for task_kind in tasks:
        for corpus in use_case.execute(profiles, task_kind, args.seed, entity_types):
            print(f"{task_kind}\t{corpus.language_code}\t{corpus.sizes()}")
    return 0


def evaluate(args, container) -> int:
    result = container.evaluate_use_case().execute(args.gold, args.pred, args.task)
    print("task,precision,recall,f1,support")
    print(ExportService.eval_line(args.task, result))
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen-data", help="generate the synthetic multilingual corpus suite")
    parser.add_argument("--languages", type=Path, default=Path("data/languages.json"), help="language profiles (JSON)")
    parser.add_argument("--task", choices=("pos", "span", "both"), default="both")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.set_defaults(handler=gen_data)

    parser = subparsers.add_parser("eval", help="score a prediction file against gold CoNLL")
    parser.add_argument("--gold", type=Path, required=True)
    parser.add_argument("--pred", type=Path, required=True)
    parser.add_argument("--task", choices=("pos", "span"), required=True)
    parser.set_defaults(handler=evaluate)
