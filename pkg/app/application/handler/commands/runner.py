import logging

from ...domain.entities.runner import ReportSpec
from .common import add_spec_arguments, load_spec

logger = logging.getLogger(__name__)


def subsample_study(args, container) -> int:
    spec = load_spec(args.spec, "subsample-study", container.config(), args.seed)
    result, _ = container.subsample_study_use_case().execute(spec, args.force)
    print("tenths,target_train,unpruned,pruned,best_k")
    for row in result.rows:
        print(f"{row.tenths},{row.target_train_sentences},{row.unpruned_score:.4f},{row.pruned_score:.4f},{row.best_k}")
    unpruned_peak, pruned_peak = result.peak_tenths()
    print(f"peak tenths: unpruned={unpruned_peak} pruned={pruned_peak}")
    return 0


def report(args, container) -> int:
    spec = ReportSpec(
        record_types=tuple(args.type),
        task_kind=args.task,
        source_language=args.source,
        target_language=args.target,
        spec_hashes=tuple(args.spec_hash or ()),
        output_format=args.format,
        group_by=args.group_by,
    )
    document = container.report_use_case().execute(spec)
    if args.save:
        path = container.artifact_repository().save_text(f"reports/{args.save}", document)
        logger.info("Report written to %s", path)
    print(document, end="")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("subsample-study", help="pruned vs unpruned over 1..9 tenths of target train")
    add_spec_arguments(parser)
    parser.set_defaults(handler=subsample_study)

    parser = subparsers.add_parser("report", help="tables from the results log")
    parser.add_argument("--type", nargs="+", default=["sweep"],
                        choices=("train", "rank", "sweep", "baseline-max", "baseline-rand", "multi-source",
                                 "subsample-study"))
    parser.add_argument("--task", choices=("pos", "span"), default=None)
    parser.add_argument("--source", default=None)
    parser.add_argument("--target", default=None)
    parser.add_argument("--spec-hash", nargs="*", default=None)
    parser.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    parser.add_argument("--group-by", choices=("source", "target", "k", "rho"), default="target",
                        help="rho puts each pruning gain next to the source/target ranking correlation")
    parser.add_argument("--save", default=None, help="also write the report under <artifacts>/reports/")
    parser.set_defaults(handler=report)
