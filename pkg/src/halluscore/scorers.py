"""The five token-level uncertainty scorers.

Every scorer is a pure function from a :class:`GenerationTrace` to a
:class:`TokenScores` vector.  All logarithms are natural logs except the
base-2 entropy feeding Focus's ``2**H`` term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ScorerError
from .types import (
    NLI_CONTRADICT,
    NLI_ENTAIL,
    GenerationTrace,
    ScorerDiagnostics,
    TokenScores,
)


@dataclass(frozen=True)
class FocusConfig:
    """Knobs for the Focus scorer.

    ``gamma`` weights the propagated term.  Attention rows are always
    sum-normalized over the previous positions; that is not configurable.
    """

    gamma: float = 0.9


def score_likelihood(trace: GenerationTrace) -> TokenScores:
    """Negative log-likelihood of each generated token."""
    values = tuple(0.0 - t.logprob for t in trace.tokens)
    return TokenScores(doc_id=trace.doc_id, method="likelihood", values=values)


def score_entropy(trace: GenerationTrace) -> TokenScores:
    """Entropy (nats) of the next-token distribution at each position."""
    values = tuple(t.entropy_nats for t in trace.tokens)
    return TokenScores(doc_id=trace.doc_id, method="entropy", values=values)


def score_ccp(
    trace: GenerationTrace, diagnostics: ScorerDiagnostics | None = None
) -> TokenScores:
    """Claim-conditioned probability score.

    Renormalizes the realized token's likelihood over the semantically
    entailing vs. contradicting top-k alternatives; neutral alternatives are
    ignored.  When a token has no entail/contradict alternatives, or zero
    entail mass, the score falls back to the plain negative log-likelihood
    and the event is counted in ``diagnostics.ccp_fallbacks``.
    """
    values = []
    for i, tok in enumerate(trace.tokens):
        if not tok.alternatives:
            raise ScorerError(
                f"doc {trace.doc_id}: token {i}: no alternatives for CCP"
            )
        entail = 0.0
        denom = 0.0
        for alt in tok.alternatives:
            p = math.exp(alt.logprob)
            if alt.nli_relation == NLI_ENTAIL:
                entail += p
                denom += p
            elif alt.nli_relation == NLI_CONTRADICT:
                denom += p
        if denom == 0.0 or entail == 0.0:
            if diagnostics is not None:
                diagnostics.ccp_fallbacks += 1
            values.append(0.0 - tok.logprob)
        else:
            values.append(0.0 - math.log(entail / denom))
    return TokenScores(doc_id=trace.doc_id, method="ccp", values=tuple(values))


def score_sar(trace: GenerationTrace) -> TokenScores:
    """Negative log-likelihood weighted by the token's relevance weight."""
    values = tuple((0.0 - t.logprob) * t.relevance_weight for t in trace.tokens)
    return TokenScores(doc_id=trace.doc_id, method="sar", values=values)


def score_focus(
    trace: GenerationTrace, cfg: FocusConfig | None = None
) -> TokenScores:
    """Keyword-filtered base score plus attention-propagated uncertainty.

    Computed left to right: ``h_i`` is the IDF-adjusted negative
    log-likelihood plus ``2**adjusted_entropy_bits``; the propagated part is
    the attention-weighted mean of the *final* scores of all previous tokens
    (non-keyword tokens contribute their 0).  Non-keyword tokens score 0.
    """
    if cfg is None:
        cfg = FocusConfig()
    n = len(trace.tokens)
    if len(trace.attention) != n:
        raise ScorerError(
            f"doc {trace.doc_id}: attention has {len(trace.attention)} rows "
            f"for {n} tokens"
        )
    for i, row in enumerate(trace.attention):
        if len(row) != i:
            raise ScorerError(
                f"doc {trace.doc_id}: attention row {i} has {len(row)} entries, "
                f"expected {i}"
            )
        if len(row) and row.min() < 0:
            raise ScorerError(
                f"doc {trace.doc_id}: attention row {i} has a negative entry"
            )
    h = np.array(
        [
            (0.0 - t.adjusted_logprob) + 2.0**t.adjusted_entropy_bits
            for t in trace.tokens
        ],
        dtype=np.float64,
    )
    keyword = np.array([t.is_keyword for t in trace.tokens], dtype=np.bool_)
    att_flat = _kernels.flatten_attention(trace.attention)
    y = _kernels.focus_propagate(h, keyword, att_flat, float(cfg.gamma))
    return TokenScores(
        doc_id=trace.doc_id, method="focus", values=tuple(float(v) for v in y)
    )


def score(
    trace: GenerationTrace,
    method: str,
    cfg: FocusConfig | None = None,
    diagnostics: ScorerDiagnostics | None = None,
) -> TokenScores:
    """Dispatch to one scorer by method name."""
    if method == "likelihood":
        return score_likelihood(trace)
    if method == "entropy":
        return score_entropy(trace)
    if method == "ccp":
        return score_ccp(trace, diagnostics=diagnostics)
    if method == "sar":
        return score_sar(trace)
    if method == "focus":
        return score_focus(trace, cfg=cfg)
    raise ScorerError(f"unknown scoring method {method!r}")
