import itertools
import math

import numpy as np
import pytest

from queryforge.errors import ConfigError, EmptyRunError, MalformedRecordError
from queryforge.evaluation import (
    Qrels,
    RunResult,
    SimulationConfig,
    compare_runs,
    evaluate_run,
    experiment_to_json,
    format_run,
    load_qrels,
    load_run,
    ndcg_at_k,
    render_comparison,
    render_experiment,
    save_qrels,
    save_run,
    simulated_user_experiment,
)

from oracles import brute_force_ndcg


# -- nDCG ---------------------------------------------------------------------


def test_ndcg_perfect_single_doc():
    assert ndcg_at_k(["d1"], {"d1": 1}, k=1) == pytest.approx(1.0)


def test_ndcg_hand_value_rank_two():
    # single grade-1 doc at rank 2 of 2: (1/log2(3)) / 1
    got = ndcg_at_k(["d0", "d1"], {"d1": 1}, k=2)
    assert got == pytest.approx(1.0 / math.log2(3.0), abs=1e-12)
    assert got == pytest.approx(0.63093, abs=1e-5)


def test_ndcg_no_relevant_is_zero():
    assert ndcg_at_k(["d1", "d2"], {}, k=5) == 0.0
    assert ndcg_at_k(["d1", "d2"], {"d9": 0}, k=5) == 0.0


def test_ndcg_requires_positive_k():
    with pytest.raises(ConfigError):
        ndcg_at_k(["d1"], {"d1": 1}, k=0)


def test_ndcg_truncation_consistency():
    ranking = ["a", "b", "c"]
    grades = {"a": 2, "c": 1}
    full = ndcg_at_k(ranking, grades, k=3)
    assert ndcg_at_k(ranking, grades, k=50) == pytest.approx(full)


def test_ndcg_in_unit_interval_and_ideal_is_one():
    rng = np.random.default_rng(31)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        docs = [f"d{i}" for i in range(n)]
        grades = {d: int(g) for d, g in zip(docs, rng.integers(0, 4, size=n))}
        perm = list(rng.permutation(docs))
        k = int(rng.integers(1, 8))
        value = ndcg_at_k(perm, grades, k)
        assert 0.0 <= value <= 1.0 + 1e-12
        if any(grades.values()):
            ideal = sorted(docs, key=lambda d: -grades[d])
            assert ndcg_at_k(ideal, grades, k) == pytest.approx(1.0, abs=1e-12)


def test_ndcg_matches_oracle_on_permutations():
    docs = ["a", "b", "c", "d"]
    grades = {"a": 3, "b": 1, "c": 0, "d": 2}
    for k in (1, 2, 4, 6):
        for perm in itertools.permutations(docs):
            got = ndcg_at_k(list(perm), grades, k)
            want = brute_force_ndcg(list(perm), grades, k)
            assert got == pytest.approx(want, abs=1e-12)


def test_ndcg_swap_monotonicity():
    rng = np.random.default_rng(77)
    for _ in range(300):
        n = int(rng.integers(2, 7))
        docs = [f"d{i}" for i in range(n)]
        grades = {d: int(g) for d, g in zip(docs, rng.integers(0, 4, size=n))}
        order = list(rng.permutation(docs))
        i, j = sorted(rng.choice(n, size=2, replace=False))
        k = int(rng.integers(1, n + 1))
        before = ndcg_at_k(order, grades, k)
        # move the higher-graded doc of the pair upward
        if grades[order[j]] > grades[order[i]]:
            swapped = list(order)
            swapped[i], swapped[j] = swapped[j], swapped[i]
            after = ndcg_at_k(swapped, grades, k)
            assert after >= before - 1e-12


# -- evaluate_run -----------------------------------------------------------------


def simple_qrels():
    return Qrels({"q1": {"d1": 2, "d2": 1}, "q2": {"d3": 1}})


def test_evaluate_ideal_run_is_one():
    run = RunResult(label="ideal")
    run.set_ranking("q1", [("d1", 2.0), ("d2", 1.0)])
    run.set_ranking("q2", [("d3", 1.0)])
    result = evaluate_run(run, simple_qrels(), k=5)
    assert result["mean"] == pytest.approx(1.0)
    assert result["per_query"]["q1"] == pytest.approx(1.0)


def test_evaluate_reversal_lowers_ndcg():
    good = RunResult(label="good")
    good.set_ranking("q1", [("d1", 2.0), ("d2", 1.0)])
    bad = RunResult(label="bad")
    bad.set_ranking("q1", [("d2", 2.0), ("d1", 1.0)])
    qrels = Qrels({"q1": {"d1": 1}})
    up = evaluate_run(good, qrels, k=2)["mean"]
    down = evaluate_run(bad, qrels, k=2)["mean"]
    assert down < up


def test_evaluate_missing_query_warned_excluded_from_mean():
    run = RunResult(label="r")
    run.set_ranking("q1", [("d1", 2.0), ("d2", 1.0)])
    run.set_ranking("q-unknown", [("d9", 1.0)])
    result = evaluate_run(run, simple_qrels(), k=5)
    assert result["per_query"]["q-unknown"] == 0.0
    assert any("q-unknown" in w for w in result["warnings"])
    assert result["evaluated_queries"] == 1
    assert result["mean"] == pytest.approx(1.0)


def test_evaluate_empty_run_errors():
    with pytest.raises(EmptyRunError):
        evaluate_run(RunResult(label="empty"), simple_qrels(), k=5)


def test_evaluate_skip_empty_flag():
    run = RunResult(label="r")
    run.set_ranking("q1", [("d1", 1.0)])
    run.set_ranking("q-none", [("d2", 1.0)])
    qrels = Qrels({"q1": {"d1": 1}, "q-none": {}})
    qrels.grades["q-none"] = {}
    dragging = evaluate_run(run, qrels, k=5)
    skipped = evaluate_run(run, qrels, k=5, skip_empty=True)
    assert dragging["mean"] == pytest.approx(0.5)
    assert skipped["mean"] == pytest.approx(1.0)


def test_run_rejects_duplicate_docs():
    run = RunResult(label="r")
    with pytest.raises(MalformedRecordError, match="duplicate"):
        run.set_ranking("q1", [("d1", 1.0), ("d1", 0.5)])


# -- compare_runs -------------------------------------------------------------------


def test_compare_identical_runs_zero_deltas():
    run_a = RunResult(label="a")
    run_a.set_ranking("q1", [("d1", 1.0), ("d2", 0.5)])
    run_b = RunResult(label="b")
    run_b.set_ranking("q1", [("d1", 1.0), ("d2", 0.5)])
    result = compare_runs([run_a, run_b], simple_qrels(), k=5)
    assert result["rows"][1]["deltas"]["default"] == pytest.approx(0.0)


def test_compare_hand_built_fixture():
    # 3-doc fixture: d1 grade 1; baseline puts it at rank 2, improved at rank 1
    qrels = Qrels({"q1": {"d1": 1}})
    baseline = RunResult(label="baseline")
    baseline.set_ranking("q1", [("d2", 3.0), ("d1", 2.0), ("d3", 1.0)])
    improved = RunResult(label="improved")
    improved.set_ranking("q1", [("d1", 3.0), ("d2", 2.0), ("d3", 1.0)])
    result = compare_runs([baseline, improved], qrels, k=3)
    expected_delta = 1.0 - (1.0 / math.log2(3.0))
    assert result["rows"][1]["deltas"]["default"] == pytest.approx(
        expected_delta, abs=1e-12)


def test_compare_requires_two_runs():
    run = RunResult(label="only")
    run.set_ranking("q1", [("d1", 1.0)])
    with pytest.raises(EmptyRunError):
        compare_runs([run], simple_qrels(), k=5)


def test_compare_multi_column_render():
    qrels_a = Qrels({"q1": {"d1": 1}})
    qrels_b = Qrels({"q1": {"d2": 1}})
    run_a = RunResult(label="sample-docs")
    run_a.set_ranking("q1", [("d1", 1.0), ("d2", 0.5)])
    run_b = RunResult(label="plus-feedback")
    run_b.set_ranking("q1", [("d2", 1.0), ("d1", 0.5)])
    result = compare_runs([run_a, run_b], {"ar": qrels_a, "fa": qrels_b}, k=2)
    assert result["columns"] == ["ar", "fa"]
    text = render_comparison(result)
    assert "sample-docs" in text and "plus-feedback" in text
    assert "(+" in text or "(-" in text


# -- trec formats ----------------------------------------------------------------------


def test_qrels_roundtrip(tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("q1 0 d1 2\nq1 0 d2 0\nq2 0 d3 1\n", encoding="utf-8")
    qrels = load_qrels(path)
    assert qrels.row("q1") == {"d1": 2, "d2": 0}
    out = tmp_path / "qrels_out.txt"
    save_qrels(qrels, out)
    assert load_qrels(out).grades == qrels.grades


def test_qrels_malformed_line(tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("q1 0 d1\n", encoding="utf-8")
    with pytest.raises(MalformedRecordError, match="line 1"):
        load_qrels(path)


def test_run_roundtrip(tmp_path):
    run = RunResult(label="mylabel")
    run.set_ranking("q1", [("d2", 2.5), ("d1", 1.25)])
    path = tmp_path / "run.trec"
    save_run(run, path)
    text = path.read_text(encoding="utf-8")
    assert "q1 Q0 d2 1 2.500000 mylabel" in text
    loaded = load_run(path)
    assert loaded.label == "mylabel"
    assert loaded.doc_ids("q1") == ["d2", "d1"]


def test_run_out_of_order_ranks_sorted(tmp_path):
    path = tmp_path / "run.trec"
    path.write_text(
        "q1 Q0 d2 2 1.0 lab\nq1 Q0 d1 1 2.0 lab\n", encoding="utf-8")
    loaded = load_run(path)
    assert loaded.doc_ids("q1") == ["d1", "d2"]


def test_format_run_empty():
    assert format_run(RunResult(label="x")) == ""


# -- simulated user ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_cfg():
    return SimulationConfig(num_docs=80, num_topics=3, relevant_per_topic=6,
                            decoys_per_topic=5, seed=7)


@pytest.fixture(scope="module")
def small_report(small_cfg):
    return simulated_user_experiment(small_cfg)


def test_simulation_feedback_improves_ndcg(small_report):
    assert small_report["mean_after"] >= small_report["mean_before"]
    assert small_report["delta"] >= 0.03


def test_simulation_zero_rounds_no_change(small_cfg):
    cfg = SimulationConfig(**{**small_cfg.__dict__, "feedback_rounds": 0})
    report = simulated_user_experiment(cfg)
    assert report["mean_after"] == pytest.approx(report["mean_before"], abs=1e-12)
    assert report["delta"] == pytest.approx(0.0, abs=1e-12)


def test_simulation_deterministic(small_cfg, small_report):
    again = simulated_user_experiment(small_cfg)
    assert experiment_to_json(again) == experiment_to_json(small_report)


def test_simulation_render(small_report):
    text = render_experiment(small_report)
    assert "before" in text and "after" in text and "mean" in text
