"""Maps entity character spans onto contiguous token index ranges."""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass

from .errors import AlignmentError
from .types import AnnotatedDocument, GenerationTrace


@dataclass(frozen=True)
class AlignmentResult:
    """Per-entity inclusive (start_token, end_token) ranges plus audit notes.

    A warning is recorded whenever a boundary token only partially overlaps
    its entity (the entity span cuts through the token's span).
    """

    token_ranges: tuple[tuple[int, int], ...]
    warnings: tuple[str, ...]


def _first_mismatch(a: str, b: str) -> int:
    for i, (ca, cb) in enumerate(zip(a, b)):
        if ca != cb:
            return i
    return min(len(a), len(b))


def align(doc: AnnotatedDocument, trace: GenerationTrace) -> AlignmentResult:
    """Map each entity to the minimal token range overlapping its span.

    A token belongs to an entity when their half-open spans share at least
    one character.  Requires ``doc.generated_text == trace.generated_text``.

    Raises :class:`AlignmentError` on text mismatch, an out-of-bounds entity
    span, or an entity overlapping no token at all.
    """
    if doc.generated_text != trace.generated_text:
        off = _first_mismatch(doc.generated_text, trace.generated_text)
        raise AlignmentError(
            f"doc {doc.doc_id}: generated_text differs from trace at offset {off}"
        )
    text_len = len(doc.generated_text)
    starts = [t.char_start for t in trace.tokens]
    ends = [t.char_end for t in trace.tokens]

    ranges: list[tuple[int, int]] = []
    warnings: list[str] = []
    for ent in doc.entities:
        if not (0 <= ent.char_start < ent.char_end <= text_len):
            raise AlignmentError(
                f"doc {doc.doc_id}: entity {ent.entity_id} span "
                f"[{ent.char_start}, {ent.char_end}) outside text of length {text_len}"
            )
        # tokens sorted and non-overlapping, so the overlap set is contiguous:
        # first token ending after the entity starts, last token starting
        # before the entity ends.
        first = bisect_right(ends, ent.char_start)
        last = bisect_left(starts, ent.char_end) - 1
        if first > last or first >= len(starts):
            raise AlignmentError(
                f"doc {doc.doc_id}: entity {ent.entity_id} "
                f"({ent.surface!r}) overlaps no tokens"
            )
        ranges.append((first, last))
        if starts[first] < ent.char_start:
            warnings.append(
                f"doc {doc.doc_id}: entity {ent.entity_id}: token {first} "
                f"[{starts[first]}, {ends[first]}) partially overlaps span "
                f"[{ent.char_start}, {ent.char_end})"
            )
        if ends[last] > ent.char_end:
            warnings.append(
                f"doc {doc.doc_id}: entity {ent.entity_id}: token {last} "
                f"[{starts[last]}, {ends[last]}) partially overlaps span "
                f"[{ent.char_start}, {ent.char_end})"
            )
    return AlignmentResult(token_ranges=tuple(ranges), warnings=tuple(warnings))
