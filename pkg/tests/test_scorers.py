from __future__ import annotations

import math

import numpy as np
import pytest

from halluscore import (
    Alternative,
    FocusConfig,
    GenerationTrace,
    ScorerDiagnostics,
    ScorerError,
    TokenRecord,
    make_attention,
    score,
    score_ccp,
    score_entropy,
    score_focus,
    score_likelihood,
    score_sar,
)
from oracles import ccp_oracle, focus_oracle
from synth import random_trace


def _token(**overrides) -> TokenRecord:
    base = dict(
        text="tok",
        char_start=0,
        char_end=3,
        logprob=-1.0,
        entropy_nats=0.5,
        alternatives=(),
        relevance_weight=1.0,
        adjusted_logprob=-1.0,
        adjusted_entropy_bits=1.0,
        is_keyword=True,
        pos_tag="NOUN",
        ner_tag=None,
        sentence_index=0,
        word_index_in_sentence=0,
    )
    base.update(overrides)
    return TokenRecord(**base)


def _trace(tokens, attention=None) -> GenerationTrace:
    spaced = []
    cursor = 0
    for t in tokens:
        width = t.char_end - t.char_start
        spaced.append(
            TokenRecord(
                **{
                    **t.__dict__,
                    "char_start": cursor,
                    "char_end": cursor + width,
                }
            )
        )
        cursor += width + 1
    if attention is None:
        attention = [[1.0] * i for i in range(len(tokens))]
    return GenerationTrace(
        doc_id="t",
        generated_text=" " * cursor,
        tokens=tuple(spaced),
        attention=make_attention(attention),
    )


def _alts(*spec, realized_index=0):
    """spec items: (probability, relation)."""
    return tuple(
        Alternative(
            surface=f"a{j}",
            logprob=math.log(p),
            nli_relation=rel,
            realized=j == realized_index,
        )
        for j, (p, rel) in enumerate(spec)
    )


# ------------------------------------------------------------- likelihood


def test_likelihood_negates_logprobs():
    trace = _trace([_token(logprob=lp) for lp in (-0.1, -1.0, -3.0)])
    assert score_likelihood(trace).values == (0.1, 1.0, 3.0)


def test_likelihood_certainty_is_positive_zero():
    value = score_likelihood(_trace([_token(logprob=0.0)])).values[0]
    assert value == 0.0
    assert math.copysign(1.0, value) == 1.0


# ---------------------------------------------------------------- entropy


def test_entropy_passthrough_and_examples():
    assert score_entropy(_trace([_token(entropy_nats=0.0)])).values == (0.0,)

    uniform4 = math.log(4)
    assert score_entropy(_trace([_token(entropy_nats=uniform4)])).values[0] == uniform4

    skewed = -(0.5 * math.log(0.5) + 2 * 0.25 * math.log(0.25))
    got = score_entropy(_trace([_token(entropy_nats=skewed)])).values[0]
    assert round(got, 6) == 1.039721


# -------------------------------------------------------------------- ccp


def test_ccp_all_entailed_is_zero():
    alts = _alts((0.5, "entail"), (0.3, "entail"), (0.2, "entail"))
    assert score_ccp(_trace([_token(alternatives=alts)])).values == (0.0,)


def test_ccp_reference_value():
    alts = _alts((0.6, "entail"), (0.2, "contradict"), (0.1, "neutral"))
    got = score_ccp(_trace([_token(alternatives=alts)])).values[0]
    assert got == pytest.approx(-math.log(0.6 / 0.8), abs=1e-9)
    assert round(got, 6) == 0.287682


def test_ccp_empty_alternatives_fault_names_token():
    trace = _trace([_token(alternatives=_alts((0.5, "entail"))), _token()])
    with pytest.raises(ScorerError, match="token 1"):
        score_ccp(trace)


def test_ccp_fallback_counts_and_equals_likelihood():
    neutral_only = _token(alternatives=_alts((0.9, "neutral")), logprob=-2.0)
    zero_entail = _token(alternatives=_alts((0.4, "contradict")), logprob=-0.7)
    diag = ScorerDiagnostics()
    got = score_ccp(_trace([neutral_only, zero_entail]), diagnostics=diag)
    assert got.values == (2.0, 0.7)
    assert diag.ccp_fallbacks == 2


def test_ccp_monotonicity_in_contradict_mass():
    base = _alts((0.6, "entail"), (0.1, "contradict"))
    more = base + (Alternative("c", math.log(0.2), "contradict", False),)
    neutral = base + (Alternative("n", math.log(0.2), "neutral", False),)
    v_base = score_ccp(_trace([_token(alternatives=base)])).values[0]
    v_more = score_ccp(_trace([_token(alternatives=more)])).values[0]
    v_neutral = score_ccp(_trace([_token(alternatives=neutral)])).values[0]
    assert v_more > v_base
    assert v_neutral == v_base


def test_ccp_matches_oracle_on_random_traces():
    rng = np.random.default_rng(10)
    for _ in range(100):
        trace = random_trace(rng)
        expected, expected_fallbacks = ccp_oracle(trace)
        diag = ScorerDiagnostics()
        got = score_ccp(trace, diagnostics=diag)
        assert got.values == pytest.approx(expected, abs=1e-9)
        assert diag.ccp_fallbacks == expected_fallbacks
        assert all(v >= 0 for v in got.values)


# -------------------------------------------------------------------- sar


def test_sar_product_and_annihilator():
    trace = _trace(
        [
            _token(logprob=-2.0, relevance_weight=0.1),
            _token(logprob=-5.0, relevance_weight=0.0),
        ]
    )
    assert score_sar(trace).values == pytest.approx((0.2, 0.0), abs=1e-12)


def test_sar_dominated_by_likelihood():
    rng = np.random.default_rng(11)
    for _ in range(50):
        trace = random_trace(rng)
        sar = score_sar(trace).values
        lik = score_likelihood(trace).values
        assert all(s <= l for s, l in zip(sar, lik))


# ------------------------------------------------------------------ focus


def test_focus_non_keyword_scores_zero():
    trace = _trace([_token(is_keyword=False)])
    assert score_focus(trace).values == (0.0,)


def test_focus_first_token_h_only():
    trace = _trace([_token(adjusted_logprob=-1.0, adjusted_entropy_bits=1.0)])
    assert score_focus(trace).values[0] == pytest.approx(3.0, abs=1e-12)


def test_focus_propagation_chain():
    # token 0 scores 1.0; token 1 has h=0.5 with all attention on token 0
    first = _token(adjusted_logprob=-0.5, adjusted_entropy_bits=-1.0)
    second = _token(
        adjusted_logprob=0.0, adjusted_entropy_bits=-1.0, char_start=0, char_end=3
    )
    trace = _trace([first, second], attention=[[], [0.7]])
    got = score_focus(trace, FocusConfig(gamma=0.9))
    assert got.values[0] == pytest.approx(1.0, abs=1e-12)
    assert got.values[1] == pytest.approx(0.5 + 0.9 * 1.0, abs=1e-12)


def test_focus_gamma_zero_is_local():
    rng = np.random.default_rng(12)
    trace = random_trace(rng, n_words=12)
    zeroed = GenerationTrace(
        doc_id=trace.doc_id,
        generated_text=trace.generated_text,
        tokens=tuple(
            TokenRecord(**{**t.__dict__, "adjusted_logprob": -9.0})
            if i < len(trace.tokens) - 1
            else t
            for i, t in enumerate(trace.tokens)
        ),
        attention=trace.attention,
    )
    cfg = FocusConfig(gamma=0.0)
    last = score_focus(trace, cfg).values[-1]
    last_after = score_focus(zeroed, cfg).values[-1]
    assert last == last_after


def test_focus_attention_scaling_invariance():
    rng = np.random.default_rng(13)
    trace = random_trace(rng, n_words=10)

    def scaled_by(factor: float) -> GenerationTrace:
        return GenerationTrace(
            doc_id=trace.doc_id,
            generated_text=trace.generated_text,
            tokens=trace.tokens,
            attention=make_attention([row * factor for row in trace.attention]),
        )

    expected = score_focus(trace).values
    # power-of-two scaling is exact in float32, so scores match bitwise
    assert score_focus(scaled_by(4.0)).values == expected
    # arbitrary factors round in the float32 rows; invariance holds to
    # float32 precision only
    assert score_focus(scaled_by(3.7)).values == pytest.approx(expected, rel=1e-5)


def test_focus_zero_attention_row_drops_propagation():
    first = _token(adjusted_logprob=-1.0, adjusted_entropy_bits=1.0)
    second = _token(adjusted_logprob=-1.0, adjusted_entropy_bits=1.0)
    trace = _trace([first, second], attention=[[], [0.0]])
    assert score_focus(trace).values == pytest.approx((3.0, 3.0), abs=1e-12)


def test_focus_negative_attention_faults():
    trace = _trace([_token(), _token()], attention=[[], [-0.1]])
    with pytest.raises(ScorerError, match="negative"):
        score_focus(trace)


def test_focus_missing_attention_faults_at_scoring_time():
    trace = GenerationTrace(
        doc_id="t",
        generated_text="abc",
        tokens=(_token(),),
        attention=(),
    )
    with pytest.raises(ScorerError, match="attention"):
        score_focus(trace)


def test_focus_matches_oracle_on_random_traces():
    rng = np.random.default_rng(14)
    for _ in range(100):
        trace = random_trace(rng)
        gamma = float(rng.uniform(0.0, 1.5))
        expected = focus_oracle(trace, gamma)
        got = score_focus(trace, FocusConfig(gamma=gamma)).values
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-9)
        assert all(v >= 0 for v in got)


# --------------------------------------------------------------- dispatch


def test_dispatch_covers_every_method_and_rejects_unknown():
    rng = np.random.default_rng(15)
    trace = random_trace(rng, n_words=6)
    for method in ("likelihood", "entropy", "ccp", "sar", "focus"):
        assert score(trace, method).method == method
    with pytest.raises(ScorerError, match="unknown scoring method"):
        score(trace, "bogus")
