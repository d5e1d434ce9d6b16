from .common import add_spec_arguments, load_spec


def rank(args, container) -> int:
    spec = load_spec(args.spec, "rank", container.config(), args.seed)
    ranked = container.run_experiment_use_case().execute(spec, args.force)
    for code, outcome in ranked.items():
        flag = " (degenerate)" if outcome.matrix.degenerate else ""
        print(f"{code}\t{outcome.importance_path}{flag}")
    return 0


def correlate(args, container) -> int:
    spec = load_spec(args.spec, "rank", container.config(), args.seed)
    table, path = container.run_experiment_use_case().correlate(spec, args.force)
    for result in table.off_diagonal():
        print(f"{result.pair[0]}\t{result.pair[1]}\t{result.rho:.4f}")
    print(path)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("rank", help="fine-tune each source language and rank its attention heads")
    add_spec_arguments(parser)
    parser.set_defaults(handler=rank)

    parser = subparsers.add_parser("correlate", help="Spearman correlation table of head rankings across languages")
    add_spec_arguments(parser)
    parser.set_defaults(handler=correlate)
