import json
import logging

import pytest

from ai_engine.autodiff import ShapeError
from ai_engine.encoder import ConfigError, MaskError, build_model
from ai_engine.train_model import NonFiniteLossError
from app import __version__
from app.application.domain.entities.importance import HeadImportanceMatrix
from app.application.domain.entities.metrics import EvalResult
from app.application.domain.entities.protocol import KScore, SweepResult
from app.application.domain.entities.runner import ReportSpec, ResultRecord
from app.application.domain.errors import (
    ArtifactFormatError,
    IdempotenceError,
    InputValidationError,
    MissingArtifactError,
)
from app.application.handler.commands import runner as runner_commands
from app.infrastructure.config.settings import Settings
from app.infrastructure.repositories.results import canonical_line
from app.main import main

from .conftest import FAST_TRAIN, TINY_ENCODER


def _result(spec, scores):
    evaluation = EvalResult.from_counts(1, 2, 2, spec.task_kind)
    per_k = tuple(KScore(k=k, score=score, evaluation=evaluation) for k, score in enumerate(scores))
    best = max(per_k, key=lambda entry: (entry.score, -entry.k))
    return SweepResult(spec_hash=spec.spec_hash(), kind=spec.kind, setting=spec.setting, task_kind=spec.task_kind,
                       source_languages=spec.source_languages, target_language=spec.target_language,
                       per_k_scores=per_k, best_k=best.k, best_score=best.score, pruned_heads=(),
                       ranking_provenance="gradient:aa", trainings=len(per_k))


def _record(results_repo, spec, scores):
    result = _result(spec, scores)
    results_repo.append(ResultRecord(record_type=spec.kind, spec_hash=spec.spec_hash(), spec=spec,
                                     payload=result.model_dump(mode="json")))
    return result


# reports from hand-made records

def test_markdown_report_bolds_the_higher_cell(results_repo, container, make_spec):
    _record(results_repo, make_spec(), [0.5, 0.7])
    _record(results_repo, make_spec(setting="multi_lingual"), [0.6, 0.4])
    text = container.report_use_case().execute(ReportSpec())
    lines = text.splitlines()
    assert lines[0] == "| SL | TL | Unpruned CrLing | Pruned CrLing | Unpruned MulLing | Pruned MulLing |"
    # a tie bolds the unpruned cell
    assert lines[2] == "| aa | bb | 0.5000 | **0.7000** | **0.6000** | 0.6000 |"


def test_csv_report_carries_higher_flags(results_repo, container, make_spec):
    _record(results_repo, make_spec(), [0.5, 0.7])
    _record(results_repo, make_spec(setting="multi_lingual"), [0.6, 0.4])
    text = container.report_use_case().execute(ReportSpec(output_format="csv"))
    header, row = text.splitlines()
    assert header.endswith("Pruned CrLing higher,Pruned MulLing higher")
    assert row == "aa,bb,0.5000,0.7000,0.6000,0.6000,1,0"


def test_report_grouped_by_k_lists_every_prefix(results_repo, container, make_spec):
    _record(results_repo, make_spec(), [0.5, 0.7, 0.2])
    text = container.report_use_case().execute(ReportSpec(output_format="csv", group_by="k"))
    lines = text.splitlines()
    assert lines[0] == "SL,TL,k,CrLing,MulLing"
    assert lines[1:] == ["aa,bb,0,0.5000,", "aa,bb,1,0.7000,", "aa,bb,2,0.2000,"]


def test_report_uses_the_latest_record_per_spec(results_repo, container, make_spec):
    _record(results_repo, make_spec(), [0.5, 0.7])
    _record(results_repo, make_spec(), [0.5, 0.9])
    text = container.report_use_case().execute(ReportSpec(output_format="csv"))
    assert text.splitlines()[1].startswith("aa,bb,0.5000,0.9000")


def test_report_selection_errors(results_repo, container, make_spec):
    with pytest.raises(MissingArtifactError):
        container.report_use_case().execute(ReportSpec())
    _record(results_repo, make_spec(), [0.5])
    _record(results_repo, make_spec(kind="baseline-rand"), [0.5])
    with pytest.raises(InputValidationError, match="mixes"):
        container.report_use_case().execute(ReportSpec(record_types=("sweep", "baseline-rand")))
    with pytest.raises(MissingArtifactError):
        container.report_use_case().execute(ReportSpec(target_language="cc"))


def test_results_log_lines_are_canonical(results_repo, make_spec):
    spec = make_spec()
    result = _record(results_repo, spec, [0.5, 0.6])
    stored = results_repo.records()
    assert len(stored) == 1
    assert stored[0].spec == spec
    assert SweepResult.model_validate(stored[0].payload) == result
    line = results_repo.results_log.read_text(encoding="utf-8")
    assert line == canonical_line(stored[0])
    assert "seconds" not in line


def _rank_record(results_repo, artifact_repo, make_spec, matrices):
    importance = {}
    for code, scores in matrices.items():
        matrix = HeadImportanceMatrix(scores=scores, language_code=code, task_kind="pos", model_config_hash="h",
                                      dev_sentence_count=10)
        path = artifact_repo.save_importance(matrix, artifact_repo.importance_path("pos", code, "k"))
        importance[code] = {"path": artifact_repo.relative(path), "checkpoint": "", "degenerate": False}
    spec = make_spec(kind="rank", source_languages=tuple(matrices), setting="multi_lingual")
    results_repo.append(ResultRecord(record_type="rank", spec_hash=spec.spec_hash(), spec=spec,
                                     payload={"importance": importance}))


def test_rho_report_relates_pruning_gain_to_ranking_similarity(results_repo, artifact_repo, container, make_spec):
    _record(results_repo, make_spec(source_languages=("aa",)), [0.5, 0.8])
    _record(results_repo, make_spec(source_languages=("cc",)), [0.5, 0.7])
    _record(results_repo, make_spec(source_languages=("dd",)), [0.5, 0.6])
    with pytest.raises(MissingArtifactError):
        container.report_use_case().execute(ReportSpec(group_by="rho"))

    _rank_record(results_repo, artifact_repo, make_spec, {
        "bb": ((0.0, 0.25), (0.5, 1.0)),
        "aa": ((0.0, 0.25), (0.5, 1.0)),
        "cc": ((0.25, 0.0), (0.5, 1.0)),
        "dd": ((1.0, 0.5), (0.25, 0.0)),
    })
    text = container.report_use_case().execute(ReportSpec(group_by="rho", output_format="csv"))
    assert text.splitlines() == [
        "SL,TL,setting,ranking rho,improvement",
        "aa,bb,CrLing,1.0000,0.3000",
        "cc,bb,CrLing,0.8000,0.2000",
        "dd,bb,CrLing,-1.0000,0.1000",
        "# improvement_vs_rho CrLing: 1.0000 over 3 pairs",
        "# improvement_vs_rho MulLing: n/a over 0 pairs",
    ]
    markdown = container.report_use_case().execute(ReportSpec(group_by="rho"))
    assert "| setting | pairs | rho(improvement, ranking rho) |" in markdown
    assert "| CrLing | 3 | 1.0000 |" in markdown


# experiments through the container

def test_sweep_experiment_records_once(pos_suite, results_repo, artifact_repo, container, make_spec):
    spec = make_spec(prune_limit=1)
    runner = container.run_experiment_use_case()
    result = runner.execute(spec)
    assert [record.spec_hash for record in results_repo.records()] == [spec.spec_hash()]
    run = results_repo.runs()[0]
    assert run.command == "sweep"
    assert len(run.per_k_seconds) == result.trainings == 2
    assert run.toolkit_version == __version__
    assert run.inputs and run.inputs[0].startswith("importance/pos/aa/")
    mask = artifact_repo.load_mask(artifact_repo.resolve(run.outputs[0]))
    assert sorted(mask.pruned_heads()) == sorted(result.pruned_heads)
    with pytest.raises(IdempotenceError):
        runner.execute(spec)
    again = runner.execute(spec, force=True)
    assert again.per_k_scores == result.per_k_scores
    assert len(results_repo.records()) == 2


def test_train_experiment_records_its_checkpoint(pos_suite, results_repo, artifact_repo, container, make_spec):
    spec = make_spec(kind="train")
    outcome = container.run_experiment_use_case().execute(spec)
    record = results_repo.records()[0]
    assert record.payload["checkpoint"] == outcome.checkpoint_path
    assert artifact_repo.resolve(outcome.checkpoint_path).exists()
    assert results_repo.runs()[0].outputs == (outcome.checkpoint_path,)


def test_correlation_report_reproduces_the_saved_table(pos_suite, artifact_repo, container, make_spec):
    spec = make_spec(kind="rank", source_languages=("aa", "cc"))
    runner = container.run_experiment_use_case()
    table, path = runner.correlate(spec)
    saved = artifact_repo.resolve(path).read_text(encoding="utf-8")
    report = container.report_use_case().execute(ReportSpec(record_types=("rank",)))
    assert report == saved
    assert table.languages == ("aa", "cc")
    # a second correlate reuses the importance files and records nothing new
    runner.correlate(spec)
    assert len(container.results_repository().records()) == 1


def test_subsample_study_reports_one_row_per_tenths(pos_suite, results_repo, container, make_spec):
    spec = make_spec(kind="subsample-study", setting="multi_lingual", tenths=(5, 1), prune_limit=0)
    result = container.run_experiment_use_case().execute(spec)
    assert [row.tenths for row in result.rows] == [1, 5]
    assert [row.target_train_sentences for row in result.rows] == [2, 10]
    assert set(result.rows[0].target_train_indices) <= set(result.rows[1].target_train_indices)
    assert len(results_repo.records()) == 1
    assert [run.detail["tenths"] for run in results_repo.runs()] == [1, 5]

    report = container.report_use_case().execute(ReportSpec(record_types=("subsample-study",)))
    lines = report.splitlines()
    assert len(lines) == 2 + len(spec.tenths)
    assert "Unpruned" in lines[0] and "Pruned" in lines[0]
    with pytest.raises(IdempotenceError):
        container.subsample_study_use_case().execute(spec)


# command line

@pytest.fixture
def cli(tmp_path):
    corpora = tmp_path / "corpora"
    languages = tmp_path / "languages.json"
    languages.write_text(json.dumps({"languages": [
        {"language_code": code, "vocab_seed": seed, "train_size": 20, "dev_size": 10, "test_size": 10,
         "shared_lexicon_rate": 0.5}
        for code, seed in (("aa", 1), ("bb", 2))
    ]}), encoding="utf-8")
    assert main(["--corpus-dir", str(corpora), "gen-data", "--languages", str(languages), "--task", "pos"]) == 0

    def run(out, *argv):
        return main(["--corpus-dir", str(corpora), "--out", str(out), *argv])

    return run


def _write_spec(path, **overrides):
    document = {"task_kind": "pos", "source_languages": ["aa"], "target_language": "bb", "encoder": TINY_ENCODER,
                "train": FAST_TRAIN, "prune_limit": 1}
    document.update(overrides)
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_cli_exit_codes(cli, tmp_path):
    out = tmp_path / "out"
    spec = _write_spec(tmp_path / "spec.json")
    assert cli(out, "sweep", "--spec", str(spec)) == 0
    assert cli(out, "sweep", "--spec", str(spec)) == 2
    assert cli(out, "sweep", "--spec", str(spec), "--force") == 0
    assert cli(out, "sweep", "--spec", str(tmp_path / "missing.json")) == 3
    leaky = _write_spec(tmp_path / "leaky.json", source_languages=["aa", "bb"])
    assert cli(out, "sweep", "--spec", str(leaky)) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    assert cli(out, "sweep", "--spec", str(broken)) == 2
    assert cli(out, "report", "--type", "baseline-max") == 3
    assert cli(out, "report", "--save", "sweeps.md") == 0
    assert (out / "reports" / "sweeps.md").exists()


def test_cli_results_are_identical_across_output_directories(cli, tmp_path):
    spec = _write_spec(tmp_path / "spec.json")
    first, second = tmp_path / "first", tmp_path / "second"
    assert cli(first, "sweep", "--spec", str(spec)) == 0
    assert cli(second, "sweep", "--spec", str(spec)) == 0
    assert (first / "results.jsonl").read_bytes() == (second / "results.jsonl").read_bytes()
    assert (first / "runs.jsonl").exists()
    importance = sorted(path.relative_to(first) for path in (first / "importance").rglob("*.json"))
    assert len(importance) == 1
    for relative in importance:
        assert (first / relative).read_bytes() == (second / relative).read_bytes()


def test_cli_seed_override_changes_the_spec_hash(cli, tmp_path, capsys):
    spec = _write_spec(tmp_path / "spec.json", prune_limit=0)
    out = tmp_path / "out"
    assert cli(out, "train", "--spec", str(spec)) == 0
    assert cli(out, "train", "--spec", str(spec), "--seed", "3") == 0
    lines = [line for line in (out / "results.jsonl").read_text(encoding="utf-8").splitlines() if line]
    hashes = {json.loads(line)["spec_hash"] for line in lines}
    assert len(hashes) == 2
    assert "f1=" in capsys.readouterr().out


def test_cli_eval_prints_a_csv_line(cli, tmp_path, capsys):
    gold = tmp_path / "gold.conll"
    gold.write_text("a\tB-PER\nb\tO\n", encoding="utf-8")
    assert cli(tmp_path / "out", "eval", "--gold", str(gold), "--pred", str(gold), "--task", "span") == 0
    assert capsys.readouterr().out.splitlines()[-1] == "span,1.0000,1.0000,1.0000,1"


def test_truncated_checkpoint_reads_as_a_format_error(artifact_repo, tiny_config):
    model = build_model(tiny_config.resolved(vocab_size=5, num_labels=3))
    path = artifact_repo.save_checkpoint(model, artifact_repo.checkpoint_path("pos", "aa", "k"))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ArtifactFormatError, match="missing parameter bytes"):
        artifact_repo.load_checkpoint(path)


@pytest.mark.parametrize("error, code", [
    (ShapeError("forward", ((1, 9),), "sequence length 9 exceeds 8"), 2),
    (ConfigError(["num_layers must be at least 1"]), 2),
    (MaskError("head mask leaves layer(s) [0] without an active head"), 2),
    (NonFiniteLossError("loss became nan"), 4),
])
def test_cli_maps_engine_errors_to_exit_codes(monkeypatch, tmp_path, error, code):
    def failing(args, container):
        raise error

    monkeypatch.setattr(runner_commands, "report", failing)
    assert main(["--out", str(tmp_path / "out"), "report"]) == code


def test_debug_setting_forces_debug_logging():
    assert Settings(debug=True, log_level="WARNING").logging_level() == logging.DEBUG
    assert Settings(log_level="warning").logging_level() == logging.WARNING
