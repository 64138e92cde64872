"""Release gate: one test per acceptance criterion, each printing one
``ACCEPTANCE <name>: PASS`` line (run with ``pytest -s`` to see them live).

The dataset-reproduction criterion runs against the published corpus when
``HALLUSCORE_PUBLISHED_DATASET`` points at it, and against the bundled
5-document fixture otherwise.  The two GPU criteria need model traces that
cannot be produced offline; they skip with an explicit line rather than
faking a pass.
"""

from __future__ import annotations

import contextlib
import io
import math
import os
import time
from dataclasses import replace
from importlib.resources import files

import numpy as np
import pytest

from halluscore import (
    Alternative,
    GenerationTrace,
    TokenRecord,
    aggregate,
    align,
    auprc,
    auroc,
    cli,
    f1_sweep,
    load_dataset,
    load_entity_scores,
    load_token_scores,
    load_traces,
    make_attention,
    score,
    store_dataset,
    store_entity_scores,
    store_token_scores,
    store_traces,
)
from halluscore.scorers import FocusConfig
from oracles import align_oracle, auprc_oracle, auroc_oracle, f1_oracle, mean_oracle
from synth import random_document, random_labels_scores, random_trace, trace_for_document

FIXTURE = str(files("halluscore") / "data" / "mini_dataset.jsonl")


@contextlib.contextmanager
def criterion(name: str, budget: float | None = None):
    t0 = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - t0
        if budget is not None and elapsed >= budget:
            raise AssertionError(
                f"{name}: {elapsed:.2f}s exceeds the {budget:.0f}s budget"
            )
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS ({elapsed:.2f}s)")


def _tok(
    text="tok",
    start=0,
    logprob=-1.0,
    entropy=0.5,
    alts=None,
    weight=1.0,
    adj_logprob=-1.0,
    adj_bits=1.0,
    keyword=True,
):
    if alts is None:
        alts = (Alternative(text, logprob, "entail", realized=True),)
    return TokenRecord(
        text=text,
        char_start=start,
        char_end=start + len(text),
        logprob=logprob,
        entropy_nats=entropy,
        alternatives=alts,
        relevance_weight=weight,
        adjusted_logprob=adj_logprob,
        adjusted_entropy_bits=adj_bits,
        is_keyword=keyword,
        pos_tag="NOUN",
        ner_tag=None,
        sentence_index=0,
        word_index_in_sentence=0,
    )


def _trace(tokens, attention=None):
    if attention is None:
        attention = [np.zeros(i, dtype=np.float32) for i in range(len(tokens))]
    text = " ".join(t.text for t in tokens)
    placed = []
    cursor = 0
    for t in tokens:
        placed.append(
            replace(t, char_start=cursor, char_end=cursor + len(t.text))
        )
        cursor += len(t.text) + 1
    return GenerationTrace(
        doc_id="acc",
        generated_text=text,
        tokens=tuple(placed),
        attention=make_attention(attention),
    )


def _run_cli(*argv: str):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main(list(argv))
    return code, out.getvalue(), err.getvalue()


# -------------------------------------------------------------------------


def test_metric_oracle_equivalence():
    with criterion("metric-oracle-equivalence", budget=10.0):
        rng = np.random.default_rng(20240817)
        for _ in range(1000):
            n = int(rng.integers(2, 201))
            labels, scores = random_labels_scores(rng, n)
            assert abs(auroc(labels, scores) - auroc_oracle(labels, scores)) < 1e-9
            assert abs(auprc(labels, scores) - auprc_oracle(labels, scores)) < 1e-9
            got = f1_sweep(labels, scores)
            want = f1_oracle(labels, scores)
            for g, w in zip(got, want):
                if math.isinf(w):
                    assert math.isinf(g)
                else:
                    assert abs(g - w) < 1e-9


def test_scorer_formula_suite():
    with criterion("scorer-formula-suite", budget=10.0):
        _scorer_reference_examples()
        rng = np.random.default_rng(99)
        for _ in range(500):
            trace = random_trace(rng, n_words=int(rng.integers(2, 16)))
            _ccp_alternative_properties(rng, trace)
            _sar_dominance(trace)
            _focus_gamma_zero_locality(rng, trace)
            _focus_attention_scaling(rng, trace)


def _scorer_reference_examples():
    tol = 1e-9

    lik = score(
        _trace([_tok(logprob=-0.1), _tok(logprob=-1.0), _tok(logprob=-3.0)]),
        "likelihood",
    ).values
    assert max(abs(a - b) for a, b in zip(lik, (0.1, 1.0, 3.0))) < tol
    (certain,) = score(_trace([_tok(logprob=0.0)]), "likelihood").values
    assert certain == 0.0

    uniform4 = score(_trace([_tok(entropy=math.log(4.0))]), "entropy").values[0]
    assert abs(uniform4 - math.log(4.0)) < tol
    skewed = -(0.5 * math.log(0.5) + 2 * 0.25 * math.log(0.25))
    assert abs(score(_trace([_tok(entropy=skewed)]), "entropy").values[0] - skewed) < tol
    assert round(skewed, 6) == 1.039721

    alts = (
        Alternative("a", math.log(0.6), "entail", realized=True),
        Alternative("b", math.log(0.2), "contradict"),
        Alternative("c", math.log(0.1), "neutral"),
    )
    ccp_val = score(_trace([_tok(logprob=math.log(0.6), alts=alts)]), "ccp").values[0]
    assert abs(ccp_val - (-math.log(0.6 / 0.8))) < tol
    assert round(ccp_val, 6) == 0.287682
    all_entail = (
        Alternative("a", math.log(0.7), "entail", realized=True),
        Alternative("b", math.log(0.3), "entail"),
    )
    assert score(_trace([_tok(logprob=math.log(0.7), alts=all_entail)]), "ccp").values[0] == 0.0

    sar = score(_trace([_tok(logprob=-2.0, weight=0.1)]), "sar").values[0]
    assert abs(sar - 0.2) < tol
    assert score(_trace([_tok(logprob=-5.0, weight=0.0)]), "sar").values[0] == 0.0

    first = score(
        _trace([_tok(adj_logprob=-1.0, adj_bits=1.0)]),
        "focus",
        cfg=FocusConfig(gamma=0.9),
    ).values[0]
    assert abs(first - 3.0) < tol
    chain = score(
        _trace(
            [
                _tok(adj_logprob=-0.5, adj_bits=-1.0),  # h = 0.5 + 0.5 = 1.0
                _tok(adj_logprob=-0.25, adj_bits=-2.0),  # h = 0.25 + 0.25 = 0.5
            ],
            attention=[np.zeros(0, np.float32), np.array([0.6], np.float32)],
        ),
        "focus",
        cfg=FocusConfig(gamma=0.9),
    ).values
    assert abs(chain[1] - 1.4) < tol
    nonkw = score(_trace([_tok(keyword=False)]), "focus", cfg=FocusConfig()).values[0]
    assert nonkw == 0.0


def _entail_mass(tok) -> float:
    return sum(
        math.exp(a.logprob) for a in tok.alternatives if a.nli_relation == "entail"
    )


def _with_extra_alt(trace, t, relation):
    extra = Alternative("alt", math.log(0.05), relation)
    tokens = list(trace.tokens)
    tokens[t] = replace(tokens[t], alternatives=tokens[t].alternatives + (extra,))
    return replace(trace, tokens=tuple(tokens))


def _ccp_alternative_properties(rng, trace):
    base = score(trace, "ccp").values
    t = int(rng.integers(0, len(trace.tokens)))
    with_contra = score(_with_extra_alt(trace, t, "contradict"), "ccp").values
    if _entail_mass(trace.tokens[t]) > 0.0:
        assert with_contra[t] > base[t]
    else:
        assert with_contra[t] == base[t]  # still in likelihood fallback
    assert with_contra[:t] == base[:t] and with_contra[t + 1 :] == base[t + 1 :]
    with_neutral = score(_with_extra_alt(trace, t, "neutral"), "ccp").values
    assert with_neutral == base


def _sar_dominance(trace):
    sar = score(trace, "sar").values
    lik = score(trace, "likelihood").values
    assert all(s <= l for s, l in zip(sar, lik))


def _focus_gamma_zero_locality(rng, trace):
    zero_gamma = score(trace, "focus", cfg=FocusConfig(gamma=0.0)).values
    for value, tok in zip(zero_gamma, trace.tokens):
        if tok.is_keyword:
            expected = -tok.adjusted_logprob + 2.0**tok.adjusted_entropy_bits
            assert abs(value - expected) < 1e-12
        else:
            assert value == 0.0
    # with no propagation, attention cannot matter at all
    reshuffled = replace(
        trace,
        attention=make_attention(
            [rng.uniform(0.0, 1.0, size=i).astype(np.float32) for i in range(len(trace.tokens))]
        ),
    )
    assert score(reshuffled, "focus", cfg=FocusConfig(gamma=0.0)).values == zero_gamma


def _focus_attention_scaling(rng, trace):
    cfg = FocusConfig(gamma=0.9)
    base = np.array(score(trace, "focus", cfg=cfg).values)

    def scaled(factor):
        rows = [
            (np.asarray(row, dtype=np.float64) * factor).astype(np.float32)
            for row in trace.attention
        ]
        return replace(trace, attention=make_attention(rows))

    exact = np.array(score(scaled(4.0), "focus", cfg=cfg).values)
    assert (exact == base).all()  # power-of-two scaling is lossless in float32

    factor = float(rng.uniform(0.3, 3.5))
    noisy = np.array(score(scaled(factor), "focus", cfg=cfg).values)
    assert int(np.argmax(noisy)) == int(np.argmax(base))
    np.testing.assert_allclose(noisy, base, rtol=1e-5, atol=1e-12)


def test_aggregation_alignment():
    with criterion("aggregation-alignment", budget=5.0):
        rng = np.random.default_rng(555)
        for _ in range(500):
            trace = random_trace(rng)
            doc = random_document(rng, trace)
            result = align(doc, trace)
            expected = align_oracle(doc, trace)
            assert all(e is not None for e in expected)
            assert list(result.token_ranges) == [(e[0], e[1]) for e in expected]
            assert len(result.warnings) == sum(e[2] for e in expected)

            token_scores = score(trace, "likelihood")
            entity_scores = aggregate(token_scores, result)
            means = mean_oracle(token_scores.values, result.token_ranges)
            for value, want, (a, b) in zip(
                entity_scores.values, means, result.token_ranges
            ):
                window = token_scores.values[a : b + 1]
                assert min(window) <= value <= max(window)
                assert abs(value - want) < 1e-12


def test_dataset_reproduction():
    published = os.environ.get("HALLUSCORE_PUBLISHED_DATASET")
    path = published or FIXTURE
    with criterion("dataset-reproduction"):
        code, out, err = _run_cli("validate", "--dataset", path)
        assert code == 0, err
        report = {
            line.split(":", 1)[0]: line.split(":", 1)[1].strip()
            for line in out.splitlines()
            if ":" in line
        }
        groups = dict(
            part.split("=") for part in report["rate groups"].split()
        )
        if published:
            assert report["documents"] == "157"
            assert report["entities"] == "18785"
            assert abs(float(report["hallucination rate"]) - 0.15) <= 0.005
            assert abs(float(report["mean words/entity"]) - 1.63) <= 0.02
            assert (groups["low"], groups["medium"], groups["high"]) == ("54", "59", "44")
        else:
            assert report["documents"] == "5"
            assert report["entities"] == "30"
            assert float(report["hallucination rate"]) == pytest.approx(4 / 30, abs=5e-5)
            assert float(report["mean words/entity"]) == pytest.approx(1.5)
            assert (groups["low"], groups["medium"], groups["high"]) == ("2", "2", "1")
    print(
        "  dataset-reproduction ran against "
        + ("the published corpus" if published else "the bundled fixture")
    )


def test_round_trip_determinism(tmp_path):
    with criterion("round-trip-determinism"):
        docs = load_dataset(FIXTURE)
        traces = [trace_for_document(d) for d in docs]

        d1, d2 = tmp_path / "d1.jsonl", tmp_path / "d2.jsonl"
        store_dataset(docs, str(d1))
        store_dataset(load_dataset(str(d1)), str(d2))
        assert d1.read_bytes() == d2.read_bytes()

        t1, t2 = tmp_path / "t1.jsonl", tmp_path / "t2.jsonl"
        store_traces(traces, str(t1))
        assert load_traces(str(t1)) == traces
        store_traces(load_traces(str(t1)), str(t2))
        assert t1.read_bytes() == t2.read_bytes()

        one, eight = tmp_path / "w1", tmp_path / "w8"
        for out_dir, workers in ((one, "1"), (eight, "8")):
            code, _, err = _run_cli(
                "score",
                "--dataset", FIXTURE,
                "--traces", str(t1),
                "--out", str(out_dir),
                "--workers", workers,
            )
            assert code == 0, err
        names = sorted(p.name for p in one.iterdir())
        assert names == sorted(p.name for p in eight.iterdir())
        assert len(names) == 10
        for name in names:
            assert (one / name).read_bytes() == (eight / name).read_bytes(), name

        # score files round-trip byte-stable too
        for name in names:
            load = load_token_scores if "token" in name else load_entity_scores
            store = store_token_scores if "token" in name else store_entity_scores
            copied = tmp_path / f"rt_{name}"
            store(load(str(one / name)), str(copied))
            assert copied.read_bytes() == (one / name).read_bytes(), name


@pytest.mark.skip(
    reason="needs Llama3-8B traces from the extractor (GPU inference); "
    "offline environment cannot produce them"
)
def test_table1_reproduction_gpu():
    print("ACCEPTANCE table1-reproduction: SKIP (no GPU model traces)")


@pytest.mark.skip(
    reason="needs traces from two GPU-extracted models for cross-model "
    "correlation; offline environment cannot produce them"
)
def test_proxy_correlation_gpu():
    print("ACCEPTANCE proxy-correlation: SKIP (no GPU model traces)")
