import numpy as np
import pytest

from app.application.use_cases.protocol import PruneSweepUseCase, prepare_data
from app.application.use_cases.training import ScoringJob, train_and_score

from .oracles import OracleReport, exhaustive_prune, fd_gradient, print_reports


def test_fd_gradient_of_a_quadratic():
    x = np.array([3.0])
    grad = fd_gradient(lambda: float(x[0] ** 2), x)
    assert grad[0] == pytest.approx(6.0, abs=1e-6)
    assert x[0] == 3.0


def test_fd_gradient_of_a_constant_is_zero():
    x = np.array([[1.0, -2.0]])
    assert not fd_gradient(lambda: 4.0, x).any()


def test_fd_gradient_rejects_bad_inputs():
    x = np.array([1.0])
    with pytest.raises(ValueError):
        fd_gradient(lambda: 0.0, x, eps=0.0)
    with pytest.raises(ArithmeticError):
        fd_gradient(lambda: float("inf"), x)


def test_oracle_report_pass_flag_follows_tolerance(capsys):
    close = OracleReport.compare("close", 2.0, 2.001, tolerance=1e-3)
    far = OracleReport.compare("far", 2.0, 2.1, tolerance=1e-3)
    assert close.passed and not far.passed
    assert far.abs_error == pytest.approx(0.1)
    print_reports([close, far])
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == OracleReport.csv_header()
    assert lines[2].startswith("far,2,2.1,")
    assert lines[2].split(",")[5] == "0"


def test_exhaustive_prune_budget():
    with pytest.raises(ValueError, match="budget"):
        exhaustive_prune(lambda heads: 0.0, 3, 2)


def test_exhaustive_prune_agrees_with_the_unpruned_sweep(pos_suite, corpus_repo, make_spec):
    spec = make_spec(prune_limit=1)
    data = prepare_data(spec, corpus_repo)

    def score(pruned):
        job = ScoringJob(k=len(pruned), config=data.config, train_config=spec.train, task_kind=spec.task_kind,
                         vocab=data.vocab, labels=data.labels, train_examples=data.train_examples,
                         eval_examples=data.eval_examples, pruned_heads=tuple(pruned))
        return train_and_score(job).evaluation.f1

    table = exhaustive_prune(score, 2, 2)
    assert len(table) == 2 * 2 + 1
    sweep = PruneSweepUseCase(corpus_repo).baseline_random_prune(spec).result
    assert table[None] == sweep.unpruned_score
    pruned_first = sweep.per_k_scores[1].pruned_heads[0]
    assert table[pruned_first] == sweep.per_k_scores[1].score
    reports = [OracleReport.compare(f"prune{head}", table[None], value, tolerance=1.0, floor=1.0)
               for head, value in table.items() if head is not None]
    print_reports(reports)
