from collections import Counter
from itertools import permutations

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import chisquare

from app.application.domain.entities.importance import HeadImportanceMatrix
from app.application.domain.entities.metrics import EvalResult
from app.application.domain.entities.protocol import KScore, SweepResult
from app.application.domain.errors import HygieneViolationError, InputValidationError, MissingArtifactError
from app.application.use_cases.corpus import subsample_train
from app.application.use_cases.importance import rank_heads
from app.application.use_cases.multi_source import (
    MultiSourceUseCase,
    merge_rankings_md,
    merge_rankings_sd,
    select_rankings_ec,
)
from app.application.use_cases.protocol import (
    PruneSweepUseCase,
    RankPipelineUseCase,
    TrainUseCase,
    plan_prefixes,
    prepare_data,
    random_order,
)


def _matrix(code, scores):
    return HeadImportanceMatrix(scores=tuple(tuple(row) for row in scores), language_code=code, task_kind="pos",
                                model_config_hash="abc", dev_sentence_count=5)


def _sweep(best_score, code="aa"):
    evaluation = EvalResult.from_counts(1, 2, 2, "pos")
    scores = (KScore(k=0, score=0.1, evaluation=evaluation), KScore(k=1, score=best_score, evaluation=evaluation))
    best = max(scores, key=lambda entry: entry.score)
    return SweepResult(spec_hash="h", kind="multi-source", setting="cross_lingual", task_kind="pos",
                       source_languages=(code,), target_language="zz", per_k_scores=scores, best_k=best.k,
                       best_score=best.score, pruned_heads=(), ranking_provenance=f"gradient:{code}", trainings=2)


# pruning plans

def test_plans_skip_heads_that_would_empty_a_layer():
    plans = plan_prefixes([(0, 0), (0, 1), (1, 0), (1, 1)], 2, 2, limit=2)
    assert [plan.k for plan in plans] == [0, 1, 2]
    assert plans[2].heads == ((0, 0), (1, 0))
    assert plans[2].skipped == ((0, 1),)
    assert plans[1].skipped == ()


def test_plans_fail_when_the_limit_cannot_be_met():
    with pytest.raises(InputValidationError):
        plan_prefixes([(0, 0), (0, 1), (1, 0), (1, 1)], 2, 2, limit=3)


def test_zero_limit_plans_only_the_unpruned_model():
    plans = plan_prefixes([(0, 0), (0, 1)], 1, 2, limit=0)
    assert len(plans) == 1 and plans[0].heads == ()


def test_random_order_is_seeded():
    assert random_order(3, 4, seed=9) == random_order(3, 4, seed=9)
    assert sorted(random_order(3, 4, seed=9)) == [(l, h) for l in range(3) for h in range(4)]
    assert random_order(3, 4, seed=9) != random_order(3, 4, seed=10)


def test_first_random_pick_is_uniform_over_heads():
    counts = Counter()
    for seed in range(3000):
        plans = plan_prefixes(random_order(2, 3, seed), 2, 3, limit=1)
        counts[plans[1].heads[0]] += 1
    observed = [counts[(l, h)] for l in range(2) for h in range(3)]
    assert chisquare(observed).pvalue >= 1e-3


# multi-source heuristics

def test_md_and_sd_can_disagree():
    a = _matrix("aa", [[0.0, 0.01], [0.02, 1.0]])
    b = _matrix("bb", [[1.0, 0.0], [0.5, 0.6]])
    md = merge_rankings_md([a, b])
    sd = merge_rankings_sd([a, b])
    assert md.order == ((0, 1), (0, 0), (1, 0), (1, 1))
    assert sd.order == ((0, 1), (1, 0), (0, 0), (1, 1))
    assert md.provenance == "MD:aa+bb"
    assert sd.provenance == "SD:aa+bb"


def test_md_breaks_merged_ties_row_major():
    a = _matrix("aa", [[0.0, 0.5], [0.6, 1.0]])
    b = _matrix("bb", [[1.0, 0.5], [0.6, 0.0]])
    assert merge_rankings_md([a, b]).order == ((0, 1), (0, 0), (1, 1), (1, 0))


def test_merging_one_matrix_reproduces_its_ranking():
    rng = np.random.default_rng(0)
    for _ in range(50):
        matrix = _matrix("aa", rng.random((3, 2)).round(1))
        assert merge_rankings_md([matrix]).order == rank_heads(matrix).order
        assert merge_rankings_sd([matrix]).order == rank_heads(matrix).order


def test_merged_order_ignores_source_order():
    rng = np.random.default_rng(3)
    for _ in range(20):
        matrices = [_matrix(code, rng.integers(0, 5, size=(2, 3)) / 4) for code in ("aa", "bb", "cc")]
        md_orders = {merge_rankings_md(list(perm)).order for perm in permutations(matrices)}
        sd_orders = {merge_rankings_sd(list(perm)).order for perm in permutations(matrices)}
        assert len(md_orders) == 1
        assert len(sd_orders) == 1


def test_a_degenerate_source_does_not_reorder_the_merge():
    a = _matrix("aa", [[0.7, 0.1], [0.9, 0.3]])
    flat = _matrix("bb", [[0.5, 0.5], [0.5, 0.5]])
    assert merge_rankings_sd([a, flat]).order == rank_heads(a).order
    assert merge_rankings_md([a, flat]).order == rank_heads(a).order


def test_merge_rejects_bad_inputs():
    with pytest.raises(InputValidationError):
        merge_rankings_md([])
    with pytest.raises(InputValidationError, match="different shapes"):
        merge_rankings_sd([_matrix("aa", [[0.0, 1.0]]), _matrix("bb", [[0.0], [1.0]])])


def test_ec_picks_the_best_sweep_and_breaks_ties_by_code():
    code, result = select_rankings_ec({"cc": _sweep(0.8, "cc"), "aa": _sweep(0.6, "aa"), "bb": _sweep(0.8, "bb")})
    assert code == "bb"
    assert result.best_score == 0.8
    with pytest.raises(InputValidationError):
        select_rankings_ec({})


def test_sweep_result_requires_the_maximum_as_best():
    evaluation = EvalResult.from_counts(1, 1, 1, "pos")
    with pytest.raises(ValidationError):
        SweepResult(spec_hash="h", kind="sweep", setting="cross_lingual", task_kind="pos", source_languages=("aa",),
                    target_language="bb", per_k_scores=(KScore(k=0, score=0.9, evaluation=evaluation),), best_k=0,
                    best_score=0.5, pruned_heads=(), ranking_provenance="", trainings=1)


# spec validation

def test_cross_lingual_spec_cannot_list_the_target_as_source(make_spec):
    with pytest.raises(HygieneViolationError):
        make_spec(source_languages=("aa", "bb"))
    with pytest.raises(HygieneViolationError):
        make_spec(target_train_tenths=3)
    make_spec(source_languages=("aa", "bb"), setting="multi_lingual")


def test_prune_limit_is_bounded_by_layer_coverage(make_spec):
    with pytest.raises(ValidationError, match="prune_limit"):
        make_spec(prune_limit=3)


def test_spec_hash_is_stable_and_sensitive(make_spec):
    assert make_spec().spec_hash() == make_spec().spec_hash()
    assert make_spec().spec_hash() != make_spec(seed=1).spec_hash()


# end-to-end on tiny corpora

def test_prepare_data_orders_training_languages(pos_suite, corpus_repo, make_spec):
    data = prepare_data(make_spec(source_languages=("cc", "aa")), corpus_repo)
    languages = [example.key[0] for example in data.train_examples]
    assert languages == ["cc"] * 20 + ["aa"] * 20
    assert {example.key[:2] for example in data.eval_examples} == {("bb", "test")}
    with pytest.raises(MissingArtifactError):
        prepare_data(make_spec(target_language="zz"), corpus_repo)


def test_multi_lingual_target_listed_as_source_is_read_once(pos_suite, corpus_repo, make_spec):
    spec = make_spec(source_languages=("aa",), target_language="aa", setting="multi_lingual", target_train_tenths=1)
    data = prepare_data(spec, corpus_repo)
    assert [example.key[0] for example in data.train_examples] == ["aa", "aa"]
    assert spec.training_languages == ("aa",)

    mixed = make_spec(source_languages=("bb", "aa"), target_language="aa", setting="multi_lingual")
    keys = [example.key for example in prepare_data(mixed, corpus_repo).train_examples]
    assert len(keys) == len(set(keys)) == 40
    assert [key[0] for key in keys] == ["bb"] * 20 + ["aa"] * 20


def test_rank_pipeline_reuses_cached_importance(pos_suite, corpus_repo, artifact_repo, make_spec):
    pipeline = RankPipelineUseCase(corpus_repo, artifact_repo)
    first = pipeline.execute(make_spec(), "aa")
    second = pipeline.execute(make_spec(), "aa")
    assert not first.reused and second.reused
    assert second.matrix.scores == first.matrix.scores
    assert first.matrix.dev_sentence_count == 10
    assert pipeline.execute(make_spec(), "aa", force=True).matrix.scores == first.matrix.scores


def test_rank_cache_misses_after_the_corpus_changes(pos_suite, corpus_repo, artifact_repo, make_spec):
    pipeline = RankPipelineUseCase(corpus_repo, artifact_repo)
    first = pipeline.execute(make_spec(), "aa")
    corpus = corpus_repo.get("pos", "aa")
    dev = corpus.split("dev")
    assert dev[0] != dev[1]
    corpus_repo.save(corpus.with_split("dev", (dev[1], dev[0], *dev[2:])))
    edited = pipeline.execute(make_spec(), "aa")
    assert edited.reused is False
    assert edited.importance_path != first.importance_path
    assert pipeline.execute(make_spec(), "aa").reused


def test_sweep_scores_each_prefix_and_keeps_the_target_train_unseen(pos_suite, corpus_repo, artifact_repo, make_spec):
    spec = make_spec()
    ranking, _ = RankPipelineUseCase(corpus_repo, artifact_repo).rank_sources(spec)
    outcome = PruneSweepUseCase(corpus_repo).execute(spec, ranking)
    result = outcome.result
    assert [entry.k for entry in result.per_k_scores] == [0, 1, 2]
    assert result.trainings == 3
    assert result.best_score == max(entry.score for entry in result.per_k_scores)
    assert result.best_k == min(e.k for e in result.per_k_scores if e.score == result.best_score)
    assert result.per_k_scores[2].pruned_heads[:1] == result.per_k_scores[1].pruned_heads
    for entry in result.per_k_scores:
        layers = Counter(layer for layer, _ in entry.pruned_heads)
        assert all(count < 2 for count in layers.values())
    assert outcome.target_train_indices("bb") == ()
    assert all(key[0] == "aa" and key[1] == "train" for key in outcome.served)
    assert len(outcome.per_k_seconds) == 3


def test_unpruned_score_is_shared_by_all_sweep_kinds(pos_suite, corpus_repo, artifact_repo, make_spec):
    spec = make_spec(prune_limit=1)
    ranking, _ = RankPipelineUseCase(corpus_repo, artifact_repo).rank_sources(spec)
    sweeps = PruneSweepUseCase(corpus_repo)
    ranked = sweeps.execute(spec, ranking).result
    strongest = sweeps.baseline_max_prune(spec, ranking).result
    random = sweeps.baseline_random_prune(spec).result
    assert ranked.unpruned_score == strongest.unpruned_score == random.unpruned_score
    assert strongest.per_k_scores[1].pruned_heads == (ranking.order[-1],)
    assert strongest.ranking_provenance == "max:gradient:aa"
    assert random.ranking_provenance == "random:seed=42"


def test_random_baseline_is_reproducible(pos_suite, corpus_repo, make_spec):
    spec = make_spec(prune_limit=1)
    sweeps = PruneSweepUseCase(corpus_repo)
    first = sweeps.baseline_random_prune(spec, seed=5).result
    second = sweeps.baseline_random_prune(spec, seed=5).result
    assert first.per_k_scores == second.per_k_scores


def test_zero_prune_limit_runs_only_the_unpruned_model(pos_suite, corpus_repo, make_spec):
    spec = make_spec(prune_limit=0)
    result = PruneSweepUseCase(corpus_repo).baseline_random_prune(spec).result
    assert len(result.per_k_scores) == 1
    assert result.best_k == 0
    assert result.pruned_heads == ()


def test_parallel_sweep_matches_sequential(pos_suite, corpus_repo, make_spec):
    spec = make_spec(prune_limit=1)
    sequential = PruneSweepUseCase(corpus_repo, max_workers=1).baseline_random_prune(spec).result
    parallel = PruneSweepUseCase(corpus_repo, max_workers=2).baseline_random_prune(spec).result
    assert [e.score for e in parallel.per_k_scores] == [e.score for e in sequential.per_k_scores]


def test_early_stop_ends_at_the_first_drop(pos_suite, corpus_repo, make_spec):
    spec = make_spec(early_stop_on_drop=True)
    result = PruneSweepUseCase(corpus_repo).baseline_random_prune(spec).result
    scores = [entry.score for entry in result.per_k_scores]
    assert result.trainings == len(scores)
    if result.stopped_early:
        assert scores[-1] < scores[-2]
        assert all(b >= a for a, b in zip(scores[:-2], scores[1:-1]))
    else:
        assert len(scores) == 3


def test_multi_lingual_sweep_serves_exactly_the_subsample(pos_suite, corpus_repo, make_spec):
    spec = make_spec(setting="multi_lingual", target_train_tenths=3, prune_limit=0)
    outcome = PruneSweepUseCase(corpus_repo).baseline_random_prune(spec)
    _, kept = subsample_train(corpus_repo.get("pos", "bb"), 3, spec.seed)
    assert outcome.target_train_indices("bb") == kept
    assert len(kept) == 6


def test_multi_source_counts_trainings_per_heuristic(pos_suite, corpus_repo, artifact_repo, make_spec):
    spec = make_spec(kind="multi-source", source_languages=("aa", "cc"), prune_limit=1)
    use_case = MultiSourceUseCase(RankPipelineUseCase(corpus_repo, artifact_repo), PruneSweepUseCase(corpus_repo))
    outcome = use_case.execute(spec)
    result = outcome.result
    assert set(result.sweeps) == {"MD", "SD", "EC"}
    assert result.trainings_required == {"MD": 2, "SD": 2, "EC": 4}
    assert result.ec_language in ("aa", "cc")
    assert result.sweeps["MD"].ranking_provenance == "MD:aa+cc"
    assert {sweep.unpruned_score for sweep in result.sweeps.values()} == {result.unpruned_score}
    assert set(outcome.per_k_seconds) == {"MD", "SD", "EC:aa", "EC:cc"}
    assert len(outcome.importance_paths) == 2
    pipeline = RankPipelineUseCase(corpus_repo, artifact_repo)
    singles = [PruneSweepUseCase(corpus_repo).execute(spec, rank_heads(pipeline.execute(spec, code).matrix),
                                                       kind="multi-source").result.best_score
               for code in spec.source_languages]
    assert result.sweeps["EC"].best_score == max(singles)


def test_train_use_case_reuses_its_checkpoint(pos_suite, corpus_repo, artifact_repo, make_spec):
    use_case = TrainUseCase(corpus_repo, artifact_repo)
    first = use_case.execute(make_spec(kind="train"))
    second = use_case.execute(make_spec(kind="train"))
    assert first.checkpoint_path == second.checkpoint_path
    assert first.checkpoint_path.startswith("checkpoints/pos/aa/")
    assert second.evaluation == first.evaluation
    assert first.evaluation.support == sum(len(s) for s in pos_suite[1].split("test"))
