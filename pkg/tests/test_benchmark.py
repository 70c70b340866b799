from __future__ import annotations

import random

import pytest

from listingkit.evaluation.benchmark import (
    BenchmarkError,
    BenchmarkSample,
    BenchmarkTask,
    run_benchmark,
)


def mc_sample(i, task=BenchmarkTask.TS, gold="a"):
    return BenchmarkSample(
        task=task,
        prompt=f"question {i}",
        gold=gold,
        options=("a", "b", "c", "d"),
        sample_id=f"s{i}",
    )


def test_gold_must_be_an_option():
    with pytest.raises(BenchmarkError):
        BenchmarkSample(task=BenchmarkTask.CT, prompt="p", gold="zzz", options=("a", "b"))


def test_echo_model_scores_one():
    samples = [mc_sample(i) for i in range(5)] + [
        BenchmarkSample(task=BenchmarkTask.TAE, prompt="extract", gold="value-1", sample_id="t1")
    ]
    report = run_benchmark(samples, lambda s: s.gold)
    assert report.get("TS_accuracy").value == 1.0
    assert report.get("TAE_accuracy").value == 1.0
    assert report.model_errors == 0


def test_fixed_wrong_answer_scores_zero():
    samples = [mc_sample(i, gold="a") for i in range(6)]
    report = run_benchmark(samples, lambda s: "b")
    assert report.get("TS_accuracy").value == 0.0


def test_three_of_five_scores_point_six():
    samples = [mc_sample(i) for i in range(5)]
    report = run_benchmark(samples, lambda s: s.gold if int(s.sample_id[1:]) < 3 else "b")
    assert report.get("TS_accuracy").value == pytest.approx(0.6)
    assert report.get("TS_accuracy").sample_count == 5


def test_normalization_trims_and_case_folds():
    samples = [mc_sample(0, gold="a")]
    report = run_benchmark(samples, lambda s: "  A \n")
    assert report.get("TS_accuracy").value == 1.0


def test_order_permutation_invariance():
    rng = random.Random(9)
    samples = [mc_sample(i, gold=rng.choice(("a", "b"))) for i in range(40)]

    def model(sample):
        return "a"

    base = run_benchmark(samples, model)
    shuffled = list(samples)
    rng.shuffle(shuffled)
    again = run_benchmark(shuffled, model)
    assert base.get("TS_accuracy").value == pytest.approx(again.get("TS_accuracy").value)


def test_model_exception_counts_as_wrong():
    samples = [mc_sample(i) for i in range(4)]

    def flaky(sample):
        if sample.sample_id == "s2":
            raise RuntimeError("boom")
        return sample.gold

    report = run_benchmark(samples, flaky)
    assert report.model_errors == 1
    assert report.get("TS_accuracy").value == pytest.approx(3 / 4)


def test_pdg_scored_by_sim(embedder):
    samples = [
        BenchmarkSample(
            task=BenchmarkTask.PDG,
            prompt="describe",
            gold="selling my used bike in great shape",
            sample_id="p1",
        )
    ]
    perfect = run_benchmark(samples, lambda s: s.gold, embedder)
    assert perfect.get("PDG_sim").value == pytest.approx(1.0)
    off = run_benchmark(samples, lambda s: "totally unrelated words entirely", embedder)
    assert off.get("PDG_sim").value < perfect.get("PDG_sim").value


def test_report_groups_per_task():
    samples = [mc_sample(0), mc_sample(1, task=BenchmarkTask.SA, gold="b")]
    report = run_benchmark(samples, lambda s: s.gold)
    names = {s.name for s in report.scores}
    assert names == {"TS_accuracy", "SA_accuracy"}
    assert report.total == 2
