"""Domain types shared by every stage of the scoring pipeline.

All values are immutable after construction.  Construction deliberately does
NOT validate: invariant checking lives in :func:`validate_trace` (and, for
datasets, in the loader), so that arbitrary parsed input can be inspected
without faulting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

METHODS = ("likelihood", "entropy", "ccp", "sar", "focus")

LABEL_HALLUCINATED = "hallucinated"
LABEL_SUPPORTED = "supported"
LABELS = (LABEL_HALLUCINATED, LABEL_SUPPORTED)

NLI_ENTAIL = "entail"
NLI_CONTRADICT = "contradict"
NLI_NEUTRAL = "neutral"
NLI_RELATIONS = (NLI_ENTAIL, NLI_CONTRADICT, NLI_NEUTRAL)

RATE_GROUPS = ("low", "medium", "high")


@dataclass(frozen=True)
class Alternative:
    """One top-k candidate for a generation position."""

    surface: str
    logprob: float
    nli_relation: str  # entail | contradict | neutral
    realized: bool = False


@dataclass(frozen=True)
class TokenRecord:
    """Per-token generation evidence.

    Offsets are half-open [char_start, char_end) in Unicode code points of the
    document's generated text.  ``entropy_nats`` is the entropy of the
    next-token distribution in nats; ``adjusted_entropy_bits`` is the entropy
    of the IDF-adjusted distribution in bits.  ``relevance_weight`` is the
    token's semantic-importance weight in [0, 1].
    """

    text: str
    char_start: int
    char_end: int
    logprob: float
    entropy_nats: float
    alternatives: tuple[Alternative, ...]
    relevance_weight: float
    adjusted_logprob: float
    adjusted_entropy_bits: float
    is_keyword: bool
    pos_tag: str
    ner_tag: Optional[str]
    sentence_index: int
    word_index_in_sentence: int


@dataclass(frozen=True, eq=False)
class GenerationTrace:
    """A document's tokens plus the lower-triangular attention matrix.

    ``attention[i]`` holds the weights from token i to tokens 0..i-1 (so row 0
    is empty), max-pooled over layers and heads and stored as float32.
    """

    doc_id: str
    generated_text: str
    tokens: tuple[TokenRecord, ...]
    attention: tuple[np.ndarray, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GenerationTrace):
            return NotImplemented
        return (
            self.doc_id == other.doc_id
            and self.generated_text == other.generated_text
            and self.tokens == other.tokens
            and len(self.attention) == len(other.attention)
            and all(
                np.array_equal(a, b) for a, b in zip(self.attention, other.attention)
            )
        )


@dataclass(frozen=True)
class Entity:
    """A labeled span of generated text."""

    entity_id: int
    surface: str
    char_start: int
    char_end: int
    label: str  # hallucinated | supported

    @property
    def is_hallucinated(self) -> bool:
        return self.label == LABEL_HALLUCINATED


@dataclass(frozen=True)
class AnnotatedDocument:
    """Generated text segmented into labeled entity spans."""

    doc_id: str
    name: str
    generated_text: str
    entities: tuple[Entity, ...]

    def hallucination_rate(self) -> float:
        hallucinated = sum(1 for e in self.entities if e.is_hallucinated)
        return hallucinated / len(self.entities)


@dataclass(frozen=True)
class TokenScores:
    """One uncertainty score per token of the matching trace."""

    doc_id: str
    method: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class EntityScores:
    """One aggregated score per entity, plus the token range it covers."""

    doc_id: str
    method: str
    values: tuple[float, ...]
    token_ranges: tuple[tuple[int, int], ...]  # inclusive (start, end)


@dataclass
class ScorerDiagnostics:
    """Mutable counters for degenerate cases hit while scoring."""

    ccp_fallbacks: int = 0
    docs_scored: int = 0

    def merge(self, other: "ScorerDiagnostics") -> None:
        self.ccp_fallbacks += other.ccp_fallbacks
        self.docs_scored += other.docs_scored


def _check_token_fields(i: int, tok: TokenRecord, text_len: int, out: list[str]) -> None:
    if not tok.char_start < tok.char_end:
        out.append(f"token {i}: char_start must be < char_end")
    if tok.char_start < 0 or tok.char_end > text_len:
        out.append(
            f"token {i}: span [{tok.char_start}, {tok.char_end}) outside "
            f"generated_text of length {text_len}"
        )
    # `not (x <= 0)` style so NaN trips the check too
    if not tok.logprob <= 0:
        out.append(f"token {i}: logprob must be ≤ 0")
    if not tok.adjusted_logprob <= 0:
        out.append(f"token {i}: adjusted_logprob must be ≤ 0")
    if not tok.entropy_nats >= 0:
        out.append(f"token {i}: entropy_nats must be ≥ 0")
    if not tok.adjusted_entropy_bits >= 0:
        out.append(f"token {i}: adjusted_entropy_bits must be ≥ 0")
    if not 0 <= tok.relevance_weight <= 1:
        out.append(f"token {i}: relevance_weight must be in [0, 1]")
    if tok.sentence_index < 0:
        out.append(f"token {i}: sentence_index must be ≥ 0")
    if tok.word_index_in_sentence < 0:
        out.append(f"token {i}: word_index_in_sentence must be ≥ 0")
    for k, alt in enumerate(tok.alternatives):
        if not alt.logprob <= 0:
            out.append(f"token {i}: alternative {k}: logprob must be ≤ 0")
        if alt.nli_relation not in NLI_RELATIONS:
            out.append(
                f"token {i}: alternative {k}: unknown nli_relation "
                f"{alt.nli_relation!r}"
            )
    if tok.alternatives:
        realized = sum(1 for alt in tok.alternatives if alt.realized)
        if realized != 1:
            out.append(
                f"token {i}: expected exactly one realized alternative, "
                f"got {realized}"
            )


def validate_trace(trace: GenerationTrace) -> list[str]:
    """Check every trace invariant; return a description per violation.

    Violations are data, not faults: this never raises on any constructed
    trace, and an empty list means the trace is well-formed.
    """
    out: list[str] = []
    text_len = len(trace.generated_text)
    for i, tok in enumerate(trace.tokens):
        _check_token_fields(i, tok, text_len, out)
        if i > 0 and tok.char_start < trace.tokens[i - 1].char_end:
            out.append(f"token {i}: span overlaps token {i - 1}")
    if len(trace.attention) != len(trace.tokens):
        out.append(
            f"attention: expected {len(trace.tokens)} rows, "
            f"got {len(trace.attention)}"
        )
    for i, row in enumerate(trace.attention):
        if i >= len(trace.tokens):
            break
        if len(row) != i:
            out.append(f"attention row {i}: expected {i} entries")
            continue
        for j, v in enumerate(row):
            if not v >= 0:
                out.append(f"attention row {i}: negative entry at column {j}")
    return out


def make_attention(rows: Iterable[Iterable[float]]) -> tuple[np.ndarray, ...]:
    """Normalize attention rows to the canonical float32 representation."""
    return tuple(np.asarray(list(r), dtype=np.float32) for r in rows)
