from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from halluscore import (
    AnnotatedDocument,
    Entity,
    MetricError,
    auprc,
    auroc,
    evaluate,
    f1_sweep,
    group_by_rate,
    pearson,
    rate_group,
    summarize,
)
from oracles import auprc_oracle, auroc_oracle, f1_oracle, pearson_oracle
from synth import random_labels_scores


# ------------------------------------------------------------------ auroc


def test_auroc_examples():
    assert auroc([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1]) == 1.0
    assert auroc([1, 0, 1, 0], [0.5, 0.5, 0.5, 0.5]) == 0.5
    assert auroc([1, 0, 1, 0], [0.9, 0.8, 0.4, 0.2]) == pytest.approx(0.75, abs=1e-12)


def test_auroc_single_class_faults():
    with pytest.raises(MetricError, match="undefined AUROC"):
        auroc([1, 1], [0.3, 0.4])
    with pytest.raises(MetricError, match="undefined AUROC"):
        auroc([0, 0], [0.3, 0.4])


def test_auroc_antisymmetry_without_ties():
    rng = np.random.default_rng(30)
    for _ in range(50):
        n = int(rng.integers(4, 60))
        labels = [int(v) for v in rng.integers(0, 2, size=n)]
        labels[0], labels[1] = 0, 1
        scores = list(np.linspace(0, 1, n)[rng.permutation(n)])
        forward = auroc(labels, scores)
        backward = auroc(labels, [-s for s in scores])
        assert forward == pytest.approx(1.0 - backward, abs=1e-12)


# ------------------------------------------------------------------ auprc


def test_auprc_examples():
    assert auprc([1, 0], [0.9, 0.1]) == 1.0
    assert auprc([0, 1], [0.9, 0.1]) == pytest.approx(0.5, abs=1e-12)


def test_auprc_no_positives_faults():
    with pytest.raises(MetricError):
        auprc([0, 0], [0.1, 0.2])


# --------------------------------------------------------------- f1_sweep


def test_f1_sweep_example():
    f1, precision, recall, threshold = f1_sweep([1, 0, 1], [0.9, 0.5, 0.4])
    assert f1 == pytest.approx(0.8, abs=1e-12)
    assert precision == pytest.approx(2 / 3, abs=1e-12)
    assert recall == 1.0
    assert threshold == 0.4


def test_f1_sweep_perfect_separation():
    f1, precision, recall, threshold = f1_sweep([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])
    assert (f1, precision, recall) == (1.0, 1.0, 1.0)
    assert threshold == 0.8


def test_f1_sweep_ties_prefer_precision_then_threshold():
    # thresholds 0.9 and 0.5 both reach F1 2/3; 0.9 has precision 1.0
    f1, precision, _, threshold = f1_sweep([1, 0, 0, 1], [0.9, 0.5, 0.5, 0.1])
    assert f1 == pytest.approx(2 / 3, abs=1e-12)
    assert precision == 1.0
    assert threshold == 0.9


def test_f1_sweep_no_positives_faults():
    with pytest.raises(MetricError):
        f1_sweep([0, 0], [0.1, 0.2])


def test_f1_always_positive_lower_bound():
    rng = np.random.default_rng(31)
    for _ in range(100):
        labels, scores = random_labels_scores(rng)
        rate = sum(labels) / len(labels)
        f1, *_ = f1_sweep(labels, scores)
        assert f1 >= 2 * rate / (1 + rate) - 1e-12


# --------------------------------------------------- oracle equivalence


def test_metrics_match_oracles_on_random_instances():
    rng = np.random.default_rng(32)
    for _ in range(300):
        labels, scores = random_labels_scores(rng)
        assert auroc(labels, scores) == pytest.approx(
            auroc_oracle(labels, scores), abs=1e-9
        )
        assert auprc(labels, scores) == pytest.approx(
            auprc_oracle(labels, scores), abs=1e-9
        )
        got = f1_sweep(labels, scores)
        expected = f1_oracle(labels, scores)
        assert got[:3] == pytest.approx(expected[:3], abs=1e-9)
        assert got[3] == expected[3]


@settings(max_examples=60, deadline=None)
@given(
    data=st.lists(
        st.tuples(st.integers(0, 1), st.floats(0.0, 1.0, allow_nan=False)),
        min_size=4,
        max_size=60,
    ),
    slope=st.floats(0.1, 10.0, allow_nan=False),
    intercept=st.floats(-5.0, 5.0, allow_nan=False),
)
def test_monotone_transform_invariance(data, slope, intercept):
    labels = [y for y, _ in data]
    assume(0 < sum(labels) < len(labels))
    scores = [s for _, s in data]
    mapped = [slope * s + intercept for s in scores]
    # the transform must stay injective on the realized score values — float
    # rounding can collapse near-equal scores, which breaks the property
    assume(len({*mapped}) == len({*scores}))
    assert auroc(labels, mapped) == pytest.approx(auroc(labels, scores), abs=1e-9)
    assert auprc(labels, mapped) == pytest.approx(auprc(labels, scores), abs=1e-9)
    f1, p, r, t = f1_sweep(labels, scores)
    f1m, pm, rm, tm = f1_sweep(labels, mapped)
    assert (f1m, pm, rm) == pytest.approx((f1, p, r), abs=1e-9)
    assert tm == pytest.approx(slope * t + intercept, rel=1e-9, abs=1e-9)


# ------------------------------------------------------------ rate groups


def test_rate_group_boundaries_exact():
    assert rate_group(0, 7) == "low"
    assert rate_group(1, 11) == "low"  # 0.0909... < 0.10
    assert rate_group(1, 10) == "medium"  # exactly 0.10
    assert rate_group(2, 10) == "medium"  # exactly 0.20
    assert rate_group(1, 5) == "medium"  # exactly 0.20 again
    assert rate_group(21, 100) == "high"
    assert rate_group(3, 10) == "high"


def test_group_by_rate_on_fixture():
    from importlib.resources import files

    from halluscore import load_dataset

    docs = load_dataset(str(files("halluscore") / "data" / "mini_dataset.jsonl"))
    groups = group_by_rate(docs)
    assert sorted(groups["low"]) == ["mini-003", "mini-005"]
    assert sorted(groups["medium"]) == ["mini-001", "mini-002"]
    assert groups["high"] == ["mini-004"]


# ---------------------------------------------------------------- pearson


def test_pearson_examples():
    v = [0.3, 0.1, 0.4, 0.1, 0.5]
    assert pearson(v, v) == 1.0
    assert pearson(v, [-x for x in v]) == -1.0


def test_pearson_constant_input_faults():
    with pytest.raises(MetricError):
        pearson([1.0, 1.0, 1.0], [0.1, 0.2, 0.3])


def test_pearson_matches_stdlib():
    rng = np.random.default_rng(33)
    for _ in range(50):
        n = int(rng.integers(3, 100))
        a = [float(v) for v in rng.normal(size=n)]
        b = [float(v) for v in 0.3 * np.asarray(a) + rng.normal(size=n)]
        assert pearson(a, b) == pytest.approx(pearson_oracle(a, b), abs=1e-9)


# --------------------------------------------------------------- evaluate


def _doc(doc_id: str, labels: list[str]) -> AnnotatedDocument:
    text = " ".join("x" * 3 for _ in labels)
    entities = tuple(
        Entity(k, "xxx", 4 * k, 4 * k + 3, label) for k, label in enumerate(labels)
    )
    return AnnotatedDocument(doc_id, doc_id, text, entities)


def test_evaluate_report_invariants():
    labels = [1, 0, 1, 0, 0, 1, 0]
    scores = [0.9, 0.8, 0.7, 0.3, 0.2, 0.6, 0.1]
    report = evaluate("likelihood", labels, scores)
    assert report.n_positive + report.n_negative == len(labels)
    expected_f1 = (
        2
        * report.precision_opt
        * report.recall_opt
        / (report.precision_opt + report.recall_opt)
    )
    assert report.f1_opt == pytest.approx(expected_f1, abs=1e-9)
    assert report.per_group == {}
    assert report.warnings == ()


def test_evaluate_degenerate_group_warns_and_yields_none():
    labels = [1, 0, 0, 0]
    scores = [0.9, 0.1, 0.2, 0.3]
    report = evaluate(
        "likelihood",
        labels,
        scores,
        group_indices={"low": [1, 2, 3], "high": [0]},
    )
    assert report.per_group["low"].auroc is None
    assert report.per_group["low"].auprc is None
    assert report.per_group["high"].auroc is None
    assert any("low" in w for w in report.warnings)
    assert report.per_group["high"].n_positive == 1


def test_summarize_handles_single_class():
    summary = summarize([0, 0, 0], [0.1, 0.2, 0.3])
    assert summary.auroc is None
    assert summary.auprc is None
    assert summary.f1_opt is None
    assert summary.n_negative == 3
