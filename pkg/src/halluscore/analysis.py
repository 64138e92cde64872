"""Linguistic statistics and classification-error breakdowns.

Token-level tags are inherited from the entity label covering the token;
"words" for sentence-position classes are whitespace-separated units, not
tokens.  Entities spanning several tags contribute one count per covered
token (per-token attribution), never a single majority tag.
"""

from __future__ import annotations

import html
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .alignment import AlignmentResult, align
from .errors import UsageError
from .metrics import f1_sweep
from .types import AnnotatedDocument, Entity, GenerationTrace, TokenRecord

NER_NONE = "NONE"  # bucket for tokens outside any named-entity span

POSITION_CLASSES = ("first", "middle", "last")

# width of one hallucination-rate histogram bin, in percentage points
RATE_BIN_PERCENT = 5
N_RATE_BINS = 100 // RATE_BIN_PERCENT


@dataclass(frozen=True)
class TagStat:
    """Occurrence count/share and hallucination rate for one tag."""

    count: int
    share: float
    hallucination_rate: float


@dataclass(frozen=True)
class CellCounts:
    """Confusion counts for one tag cell (entity-tag incidences)."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def fpr(self) -> float | None:
        denom = self.fp + self.tn
        return self.fp / denom if denom else None

    @property
    def fnr(self) -> float | None:
        denom = self.fn + self.tp
        return self.fn / denom if denom else None


@dataclass(frozen=True)
class EntityTagIncidence:
    """A single entity's covered tags plus its sentence-position class."""

    pos_tags: tuple[str, ...]
    ner_tags: tuple[str, ...]
    position: str


@dataclass(frozen=True)
class AnalysisReport:
    """FPR/FNR tables by tag and position, plus corpus-level distributions."""

    threshold: float
    pos_cells: dict[str, CellCounts] = field(default_factory=dict)
    ner_cells: dict[str, CellCounts] = field(default_factory=dict)
    position_cells: dict[str, CellCounts] = field(default_factory=dict)
    rate_histogram: tuple[int, ...] | None = None
    pos_stats: dict[str, TagStat] | None = None
    ner_stats: dict[str, TagStat] | None = None
    tag_weighting: str = "per_token"


def position_class(token: TokenRecord, sentence_word_count: int) -> str:
    """first / middle / last six-word window for a token's word position.

    A word falling inside both windows of a short sentence counts as first.
    """
    if token.word_index_in_sentence < 6:
        return "first"
    if token.word_index_in_sentence >= sentence_word_count - 6:
        return "last"
    return "middle"


def sentence_word_counts(trace: GenerationTrace) -> dict[int, int]:
    """Words per sentence, inferred from the highest word index seen."""
    counts: dict[int, int] = {}
    for tok in trace.tokens:
        seen = counts.get(tok.sentence_index, 0)
        counts[tok.sentence_index] = max(seen, tok.word_index_in_sentence + 1)
    return counts


def entity_tag_incidences(
    doc: AnnotatedDocument, trace: GenerationTrace, alignment: AlignmentResult
) -> tuple[EntityTagIncidence, ...]:
    """Collect each entity's per-token tags and its position class."""
    word_counts = sentence_word_counts(trace)
    out = []
    for start, end in alignment.token_ranges:
        covered = trace.tokens[start : end + 1]
        first = covered[0]
        out.append(
            EntityTagIncidence(
                pos_tags=tuple(t.pos_tag for t in covered),
                ner_tags=tuple(t.ner_tag or NER_NONE for t in covered),
                position=position_class(first, word_counts[first.sentence_index]),
            )
        )
    return tuple(out)


def _traces_by_id(
    dataset: Sequence[AnnotatedDocument], traces: Iterable[GenerationTrace]
) -> dict[str, GenerationTrace]:
    by_id = {t.doc_id: t for t in traces}
    missing = [d.doc_id for d in dataset if d.doc_id not in by_id]
    if missing:
        raise UsageError(f"no trace for doc(s): {', '.join(missing)}")
    return by_id


def tag_stats(
    dataset: Sequence[AnnotatedDocument], traces: Iterable[GenerationTrace]
) -> tuple[dict[str, TagStat], dict[str, TagStat]]:
    """Per-POS and per-NER occurrence share and hallucination rate.

    Counted over entity-covered tokens; each token inherits its entity's
    label.  Tokens outside every entity are not counted.
    """
    by_id = _traces_by_id(dataset, traces)
    pos_counts: dict[str, list[int]] = {}
    ner_counts: dict[str, list[int]] = {}

    def bump(table: dict[str, list[int]], tag: str, hallucinated: bool) -> None:
        cell = table.setdefault(tag, [0, 0])
        cell[0] += 1
        cell[1] += int(hallucinated)

    total = 0
    for doc in dataset:
        trace = by_id[doc.doc_id]
        result = align(doc, trace)
        for ent, (start, end) in zip(doc.entities, result.token_ranges):
            for tok in trace.tokens[start : end + 1]:
                total += 1
                bump(pos_counts, tok.pos_tag, ent.is_hallucinated)
                bump(ner_counts, tok.ner_tag or NER_NONE, ent.is_hallucinated)

    def finish(table: dict[str, list[int]]) -> dict[str, TagStat]:
        return {
            tag: TagStat(
                count=n, share=n / total if total else 0.0, hallucination_rate=h / n
            )
            for tag, (n, h) in sorted(table.items())
        }

    return finish(pos_counts), finish(ner_counts)


def rate_histogram(dataset: Sequence[AnnotatedDocument]) -> tuple[int, ...]:
    """Document counts per 5-percentage-point hallucination-rate bin."""
    bins = [0] * N_RATE_BINS
    for doc in dataset:
        hallucinated = sum(1 for e in doc.entities if e.is_hallucinated)
        # exact integer binning; a rate of exactly 1.0 lands in the last bin
        idx = min(N_RATE_BINS * hallucinated // len(doc.entities), N_RATE_BINS - 1)
        bins[idx] += 1
    return tuple(bins)


def error_breakdown(
    entity_scores: Sequence[float],
    labels: Sequence[int],
    tags: Sequence[EntityTagIncidence],
    threshold: float,
    breakdowns: Sequence[str] = ("pos", "ner", "position"),
) -> AnalysisReport:
    """Classify entities at ``threshold`` and fill per-tag confusion tables.

    An entity contributes to the tag cell of each of its tokens and to a
    single position-class cell (by its first token's word).
    """
    unknown = set(breakdowns) - {"pos", "ner", "position"}
    if unknown:
        raise UsageError(f"unknown breakdown key(s): {', '.join(sorted(unknown))}")
    tables: dict[str, dict[str, list[int]]] = {key: {} for key in breakdowns}

    def bump(table: dict[str, list[int]], tag: str, truth: int, pred: int) -> None:
        cell = table.setdefault(tag, [0, 0, 0, 0])  # tp, fp, tn, fn
        if truth and pred:
            cell[0] += 1
        elif pred:
            cell[1] += 1
        elif not truth:
            cell[2] += 1
        else:
            cell[3] += 1

    for score, truth, inc in zip(entity_scores, labels, tags):
        pred = int(score >= threshold)
        if "pos" in tables:
            for tag in inc.pos_tags:
                bump(tables["pos"], tag, truth, pred)
        if "ner" in tables:
            for tag in inc.ner_tags:
                bump(tables["ner"], tag, truth, pred)
        if "position" in tables:
            bump(tables["position"], inc.position, truth, pred)

    def finish(key: str) -> dict[str, CellCounts]:
        if key not in tables:
            return {}
        return {
            tag: CellCounts(tp=c[0], fp=c[1], tn=c[2], fn=c[3])
            for tag, c in sorted(tables[key].items())
        }

    return AnalysisReport(
        threshold=threshold,
        pos_cells=finish("pos"),
        ner_cells=finish("ner"),
        position_cells=finish("position"),
    )


def analyze_corpus(
    dataset: Sequence[AnnotatedDocument],
    traces: Iterable[GenerationTrace],
    entity_scores_by_doc: Mapping[str, Sequence[float]],
    threshold: float | None = None,
    breakdowns: Sequence[str] = ("pos", "ner", "position"),
) -> AnalysisReport:
    """Full analysis: error tables at the (default F1-optimal) threshold,
    rate histogram, and per-tag base rates."""
    by_id = _traces_by_id(dataset, traces)
    scores: list[float] = []
    labels: list[int] = []
    tags: list[EntityTagIncidence] = []
    for doc in dataset:
        trace = by_id[doc.doc_id]
        result = align(doc, trace)
        doc_scores = entity_scores_by_doc[doc.doc_id]
        if len(doc_scores) != len(doc.entities):
            raise UsageError(
                f"doc {doc.doc_id}: {len(doc_scores)} entity scores for "
                f"{len(doc.entities)} entities"
            )
        scores.extend(doc_scores)
        labels.extend(int(e.is_hallucinated) for e in doc.entities)
        tags.extend(entity_tag_incidences(doc, trace, result))
    if threshold is None:
        _, _, _, threshold = f1_sweep(labels, scores)
    report = error_breakdown(scores, labels, tags, threshold, breakdowns=breakdowns)
    pos_stats, ner_stats = tag_stats(dataset, by_id.values())
    return AnalysisReport(
        threshold=threshold,
        pos_cells=report.pos_cells,
        ner_cells=report.ner_cells,
        position_cells=report.position_cells,
        rate_histogram=rate_histogram(dataset),
        pos_stats=pos_stats,
        ner_stats=ner_stats,
    )


def _intensity(value: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0  # degenerate range: every entity renders at zero tint
    return (value - lo) / (hi - lo)


def render_samples(
    doc: AnnotatedDocument,
    entity_scores: Sequence[float],
    labels: Sequence[int],
) -> str:
    """HTML fragment with entities tinted by min-max-normalized score.

    Ground-truth hallucinated entities get an outline.  Output is
    deterministic for fixed input.
    """
    if len(entity_scores) != len(doc.entities):
        raise UsageError(
            f"doc {doc.doc_id}: {len(entity_scores)} scores for "
            f"{len(doc.entities)} entities"
        )
    lo = min(entity_scores) if entity_scores else 0.0
    hi = max(entity_scores) if entity_scores else 0.0
    parts = [
        f'<div class="sample" data-doc-id="{html.escape(doc.doc_id, quote=True)}">',
        f"<h3>{html.escape(doc.name)}</h3>",
        "<p>",
    ]
    cursor = 0
    text = doc.generated_text
    for ent, score, truth in zip(doc.entities, entity_scores, labels):
        parts.append(html.escape(text[cursor : ent.char_start]))
        tint = _intensity(score, lo, hi)
        style = f"background-color:rgba(220,38,38,{tint:.3f})"
        if truth:
            style += ";outline:2px solid #991b1b"
        parts.append(
            f'<span class="entity" style="{style}" title="score={score:.6f}">'
            f"{html.escape(text[ent.char_start:ent.char_end])}</span>"
        )
        cursor = ent.char_end
    parts.append(html.escape(text[cursor:]))
    parts.append("</p>")
    parts.append("</div>")
    return "".join(parts)
