import itertools

import numpy as np
import pytest

from app.application.domain.entities.importance import HeadImportanceMatrix
from app.application.domain.errors import ArtifactFormatError, InputValidationError, MissingArtifactError, NumericFailureError
from app.application.use_cases.importance import (
    CorrelateUseCase,
    correlation_table,
    normalize_matrix,
    normalize_scores,
    rank_correlation,
    rank_heads,
    rank_scores,
    spearman_rho,
)

from .oracles import naive_average_ranks, naive_spearman


def _matrix(code, scores, **fields):
    return HeadImportanceMatrix(
        scores=tuple(tuple(float(v) for v in row) for row in scores),
        language_code=code,
        task_kind=fields.pop("task_kind", "pos"),
        model_config_hash="abc",
        dev_sentence_count=10,
        **fields,
    )


def test_normalized_scores_span_the_unit_interval():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        shape = (int(rng.integers(1, 7)), int(rng.integers(2, 7)))
        raw = rng.exponential(size=shape)
        scores, degenerate = normalize_matrix(raw)
        assert not degenerate
        assert scores.min() == 0.0
        assert scores.max() == 1.0
        assert np.all((scores >= 0.0) & (scores <= 1.0))


def test_normalization_ignores_overall_scale():
    rng = np.random.default_rng(1)
    raw = rng.exponential(size=(4, 3))
    base, _ = normalize_matrix(raw)
    for factor in (1e-3, 7.0, 1e4):
        scaled, _ = normalize_matrix(raw * factor)
        np.testing.assert_allclose(scaled, base, atol=1e-12, rtol=0)


def test_layers_are_normalized_before_global_scaling():
    raw = np.array([[3.0, 4.0], [0.0, 100.0]])
    scores, _ = normalize_matrix(raw)
    # layer norms 5 and 100 give rows (0.6, 0.8) and (0, 1)
    np.testing.assert_allclose(scores, [[0.6, 0.8], [0.0, 1.0]])
    unit, _ = normalize_matrix(np.array([[3.0, 4.0], [0.0, 1.0]]))
    np.testing.assert_allclose(unit, [[0.6, 0.8], [0.0, 1.0]])


def test_constant_matrix_is_degenerate():
    scores, degenerate = normalize_matrix(np.full((2, 3), 4.2))
    assert degenerate
    assert np.all(scores == 0.5)
    zero, degenerate = normalize_matrix(np.zeros((2, 2)))
    assert degenerate and np.all(zero == 0.5)


def test_normalization_rejects_bad_input():
    with pytest.raises(NumericFailureError):
        normalize_matrix(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        normalize_matrix(np.array([[1.0, -0.5]]))
    with pytest.raises(ValueError):
        normalize_matrix(np.ones(3))


def test_normalize_scores_records_provenance():
    matrix = normalize_scores(np.array([[1.0, 2.0], [3.0, 4.0]]), language_code="aa", task_kind="pos",
                              model_config_hash="h", dev_sentence_count=12, seed=4, epochs=2)
    assert matrix.shape == (2, 2)
    assert matrix.dev_sentence_count == 12
    assert not matrix.degenerate


def test_ranking_is_ascending_with_row_major_ties():
    ranking = rank_scores(np.array([[0.5, 0.5], [0.1, 0.5]]))
    assert ranking.order == ((1, 0), (0, 0), (0, 1), (1, 1))
    assert ranking.descending()[0] == (1, 1)


def test_rank_heads_is_a_permutation_of_all_heads():
    rng = np.random.default_rng(2)
    matrix = _matrix("aa", rng.random((3, 4)))
    ranking = rank_heads(matrix)
    assert sorted(ranking.order) == [(l, h) for l in range(3) for h in range(4)]
    values = [matrix.scores[l][h] for l, h in ranking.order]
    assert values == sorted(values)
    assert ranking.provenance == "gradient:aa"


def test_rank_correlation_matches_the_naive_oracle_on_permutations():
    base = list(range(1, 9))
    for perm in itertools.permutations(base):
        assert rank_correlation(np.array(base, float), np.array(perm, float)) == pytest.approx(
            naive_spearman(base, perm), abs=1e-12
        )


def test_rank_correlation_matches_the_naive_oracle_with_ties():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        x = rng.integers(0, 4, size=8).astype(float)
        y = rng.integers(0, 4, size=8).astype(float)
        assert rank_correlation(x, y) == pytest.approx(naive_spearman(x, y), abs=1e-12)


def test_average_ranks_share_tied_positions():
    assert naive_average_ranks([10, 20, 20, 30]) == [1.0, 2.5, 2.5, 4.0]


def test_rank_correlation_hand_cases():
    assert rank_correlation(np.array([1.0, 2.0, 3.0]), np.array([1.0, 3.0, 2.0])) == pytest.approx(0.5)
    assert rank_correlation(np.array([1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0])) == pytest.approx(-1.0)
    assert rank_correlation(np.array([2.0, 2.0]), np.array([5.0, 5.0])) == 1.0
    assert rank_correlation(np.array([2.0, 2.0, 2.0]), np.array([1.0, 2.0, 3.0])) == 0.0


def test_spearman_rho_requires_matching_shapes():
    with pytest.raises(InputValidationError, match="dimensions differ"):
        spearman_rho(_matrix("aa", np.eye(2)), _matrix("bb", np.eye(3)))
    result = spearman_rho(_matrix("aa", [[0.0, 1.0]]), _matrix("bb", [[0.0, 1.0]]))
    assert result.rho == 1.0
    assert result.n == 2


def test_correlation_table_is_symmetric_with_unit_diagonal():
    rng = np.random.default_rng(4)
    matrices = [_matrix(code, rng.random((2, 3))) for code in ("aa", "bb", "cc")]
    table = correlation_table(matrices)
    values = np.array(table.values)
    np.testing.assert_array_equal(values, values.T)
    np.testing.assert_array_equal(np.diag(values), np.ones(3))
    assert table.rho("aa", "cc") == pytest.approx(spearman_rho(matrices[0], matrices[2]).rho)
    assert len(table.off_diagonal()) == 3


def test_correlation_table_rejects_duplicates_and_singletons():
    matrix = _matrix("aa", np.eye(2))
    with pytest.raises(InputValidationError):
        correlation_table([matrix])
    with pytest.raises(InputValidationError, match="duplicate"):
        correlation_table([matrix, matrix])


def test_correlate_use_case_writes_a_readable_table(artifact_repo):
    matrices = [_matrix("aa", [[0.0, 0.2], [0.7, 1.0]]), _matrix("bb", [[1.0, 0.2], [0.7, 0.0]])]
    table, relative = CorrelateUseCase(artifact_repo).execute(matrices)
    assert relative == "correlation/pos.csv"
    loaded = artifact_repo.load_correlation(artifact_repo.resolve(relative))
    assert loaded.languages == ("aa", "bb")
    assert loaded.rho("aa", "bb") == pytest.approx(table.rho("aa", "bb"), abs=1e-6)
    assert loaded.task_kind == "pos"


def test_correlation_csv_without_metadata_is_rejected(artifact_repo, tmp_path):
    path = tmp_path / "bare.csv"
    path.write_text("# format_version: 1.0\nlanguage,aa,bb\naa,1.0,0.5\nbb,0.5,1.0\n", encoding="utf-8")
    with pytest.raises(ArtifactFormatError, match="task_kind"):
        artifact_repo.load_correlation(path)
    path.write_text("# format_version: 1.0\n# task_kind: span\n# heads_compared: 4\nlanguage,aa,bb\naa,1.0,x\nbb,0.5,1.0\n",
                    encoding="utf-8")
    with pytest.raises(ArtifactFormatError, match="malformed"):
        artifact_repo.load_correlation(path)


def test_importance_matrix_rejects_out_of_range_scores():
    with pytest.raises(ValueError):
        _matrix("aa", [[0.0, 1.5]])
    with pytest.raises(ValueError):
        _matrix("aa", [[0.0, 1.0], [0.5]])


def test_importance_file_round_trip(artifact_repo):
    matrix = _matrix("aa", [[0.0, 0.25], [0.5, 1.0]], seed=3, epochs=2)
    path = artifact_repo.save_importance(matrix, artifact_repo.importance_path("pos", "aa", "k1"))
    assert artifact_repo.load_importance(path).model_dump() == matrix.model_dump()


def test_importance_file_errors(artifact_repo, tmp_path):
    with pytest.raises(MissingArtifactError):
        artifact_repo.load_importance(tmp_path / "none.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"format_version": "1.0", "L": 2, "H": 2, "scores": [0.1]}', encoding="utf-8")
    with pytest.raises(ArtifactFormatError):
        artifact_repo.load_importance(broken)
    future = tmp_path / "future.json"
    future.write_text('{"format_version": "2.0"}', encoding="utf-8")
    with pytest.raises(ArtifactFormatError, match="format_version"):
        artifact_repo.load_importance(future)
