from .common import add_spec_arguments, load_spec


def _print_sweep(result) -> None:
    print("k,score,pruned")
    for entry in result.per_k_scores:
        heads = " ".join(f"{layer}:{head}" for layer, head in entry.pruned_heads)
        print(f"{entry.k},{entry.score:.4f},{heads}")
    print(f"best_k={result.best_k} best_score={result.best_score:.4f} unpruned={result.unpruned_score:.4f}")


def train(args, container) -> int:
    spec = load_spec(args.spec, "train", container.config(), args.seed)
    outcome = container.run_experiment_use_case().execute(spec, args.force)
    print(f"{outcome.checkpoint_path}\tf1={outcome.evaluation.f1:.4f}")
    return 0


def _sweep_command(kind: str):
    def handler(args, container) -> int:
        spec = load_spec(args.spec, kind, container.config(), args.seed)
        _print_sweep(container.run_experiment_use_case().execute(spec, args.force))
        return 0

    return handler


def multi_source(args, container) -> int:
    spec = load_spec(args.spec, "multi-source", container.config(), args.seed)
    result = container.run_experiment_use_case().execute(spec, args.force)
    print(f"FL={result.unpruned_score:.4f}")
    for heuristic, sweep in result.sweeps.items():
        print(f"{heuristic}={sweep.best_score:.4f} best_k={sweep.best_k} trainings={result.trainings_required[heuristic]}")
    if result.ec_language is not None:
        print(f"EC source={result.ec_language}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="fine-tune without pruning and score the target test split")
    add_spec_arguments(parser)
    parser.set_defaults(handler=train)

    for kind, help_text in (
        ("sweep", "prune the lowest-ranked heads, k = 0..limit"),
        ("baseline-max", "prune the highest-ranked heads instead"),
        ("baseline-rand", "prune randomly drawn heads"),
    ):
        parser = subparsers.add_parser(kind, help=help_text)
        add_spec_arguments(parser)
        parser.set_defaults(handler=_sweep_command(kind))

    parser = subparsers.add_parser("multi-source", help="MD/SD/EC rankings for several source languages")
    add_spec_arguments(parser)
    parser.set_defaults(handler=multi_source)
