"""Line-oriented persistence for datasets, trace bundles, scores, reports.

All formats are UTF-8 JSONL; a ``.gz`` suffix selects gzip transparently.
Numbers are written with full round-trip precision (Python repr), attention
rows as base64-packed little-endian float32, so store → load is exact.
Loading is streaming: peak memory stays at one document regardless of corpus
size.
"""

from __future__ import annotations

import base64
import gzip
import io
import json
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .analysis import rate_histogram
from .errors import ParseError
from .types import (
    LABEL_HALLUCINATED,
    LABEL_SUPPORTED,
    METHODS,
    Alternative,
    AnnotatedDocument,
    Entity,
    EntityScores,
    GenerationTrace,
    TokenRecord,
    TokenScores,
)

# Appendix-style source labels merged into the binary scheme.
_LABEL_ALIASES = {
    "supported": LABEL_SUPPORTED,
    "hallucinated": LABEL_HALLUCINATED,
    "not-supported": LABEL_HALLUCINATED,
    "irrelevant": LABEL_HALLUCINATED,
}

_COMPACT = {"ensure_ascii": False, "separators": (",", ":"), "allow_nan": False}


def canonical_label(raw: str) -> str | None:
    """Map a source label onto supported/hallucinated; None when unknown."""
    return _LABEL_ALIASES.get(raw.strip().lower().replace("_", "-").replace(" ", "-"))


def open_text(path: str, mode: str = "rt") -> io.TextIOBase:
    """Open UTF-8 text, gzip-compressed when the name ends in .gz."""
    if str(path).endswith(".gz"):
        return gzip.open(path, mode, encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def _reject_constant(name: str) -> float:
    raise ValueError(f"non-finite constant {name} not allowed")


def _iter_jsonl(path: str) -> Iterator[tuple[int, Any]]:
    try:
        with open_text(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                stripped = raw.strip()
                if not stripped:
                    continue
                try:
                    yield lineno, json.loads(stripped, parse_constant=_reject_constant)
                except ValueError as exc:
                    msg = getattr(exc, "msg", str(exc))
                    raise ParseError(
                        f"invalid JSON: {msg}", path=str(path), line=lineno
                    ) from exc
    except (EOFError, OSError) as exc:  # truncated gzip stream, unreadable file
        raise ParseError(f"unreadable input: {exc}", path=str(path)) from exc


def _expect(
    obj: Mapping, key: str, kind: type | tuple[type, ...], path: str, line: int
) -> Any:
    if not isinstance(obj, Mapping):
        raise ParseError("expected a JSON object", path=path, line=line)
    if key not in obj:
        raise ParseError(f"missing key {key!r}", path=path, line=line)
    value = obj[key]
    # bool is an int subclass; never accept it for numeric fields
    if isinstance(value, bool) and kind is not bool:
        raise ParseError(f"key {key!r}: expected {_kindname(kind)}", path=path, line=line)
    if not isinstance(value, kind):
        raise ParseError(f"key {key!r}: expected {_kindname(kind)}", path=path, line=line)
    return value


def _kindname(kind: type | tuple[type, ...]) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


_NUMBER = (int, float)


def _parse_entity(
    item: Any, ordinal: int, text: str, path: str, line: int
) -> Entity:
    surface = _expect(item, "surface", str, path, line)
    start = _expect(item, "start", int, path, line)
    end = _expect(item, "end", int, path, line)
    raw_label = _expect(item, "label", str, path, line)
    if not 0 <= start < end <= len(text):
        raise ParseError(
            f"entity {ordinal}: span [{start}, {end}) outside text of length "
            f"{len(text)}",
            path=path,
            line=line,
        )
    if text[start:end] != surface:
        raise ParseError(
            f"entity {ordinal}: surface {surface!r} does not match text span "
            f"{text[start:end]!r}",
            path=path,
            line=line,
        )
    label = canonical_label(raw_label)
    if label is None:
        raise ParseError(
            f"entity {ordinal}: unknown label {raw_label!r}", path=path, line=line
        )
    return Entity(
        entity_id=ordinal, surface=surface, char_start=start, char_end=end, label=label
    )


def _parse_document(obj: Any, path: str, line: int) -> AnnotatedDocument:
    doc_id = _expect(obj, "doc_id", str, path, line)
    if not doc_id:
        raise ParseError("doc_id must be non-empty", path=path, line=line)
    name = _expect(obj, "name", str, path, line)
    text = _expect(obj, "text", str, path, line)
    raw_entities = _expect(obj, "entities", list, path, line)
    if not raw_entities:
        raise ParseError(
            f"doc {doc_id}: document has no entities", path=path, line=line
        )
    entities = [
        _parse_entity(item, k, text, path, line) for k, item in enumerate(raw_entities)
    ]
    for prev, ent in zip(entities, entities[1:]):
        if ent.char_start < prev.char_end:
            raise ParseError(
                f"doc {doc_id}: entity {ent.entity_id} overlaps or precedes "
                f"entity {prev.entity_id}",
                path=path,
                line=line,
            )
    return AnnotatedDocument(
        doc_id=doc_id, name=name, generated_text=text, entities=tuple(entities)
    )


def iter_documents(path: str) -> Iterator[AnnotatedDocument]:
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        doc = _parse_document(obj, str(path), lineno)
        if doc.doc_id in seen:
            raise ParseError(
                f"duplicate doc_id {doc.doc_id!r}", path=str(path), line=lineno
            )
        seen.add(doc.doc_id)
        yield doc


def load_dataset(path: str) -> list[AnnotatedDocument]:
    return list(iter_documents(path))


def document_to_json(doc: AnnotatedDocument) -> dict:
    return {
        "doc_id": doc.doc_id,
        "name": doc.name,
        "text": doc.generated_text,
        "entities": [
            {
                "surface": e.surface,
                "start": e.char_start,
                "end": e.char_end,
                "label": e.label,
            }
            for e in doc.entities
        ],
    }


def store_dataset(docs: Iterable[AnnotatedDocument], path: str) -> None:
    with open_text(path, "wt") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_json(doc), **_COMPACT))
            fh.write("\n")


@dataclass(frozen=True)
class DatasetStats:
    """Corpus-level summary of an annotated dataset."""

    n_documents: int
    n_entities: int
    n_unique_entities: int
    mean_words_per_entity: float
    mean_entities_per_document: float
    hallucination_rate: float
    rate_histogram: tuple[int, ...]


def dataset_stats(dataset: Sequence[AnnotatedDocument]) -> DatasetStats:
    """Counts and means over a loaded dataset (never divides by zero: the
    loader rejects entity-less documents, callers pass ≥ 1 document)."""
    n_entities = sum(len(d.entities) for d in dataset)
    surfaces = {e.surface for d in dataset for e in d.entities}
    words = sum(len(e.surface.split()) for d in dataset for e in d.entities)
    hallucinated = sum(
        1 for d in dataset for e in d.entities if e.is_hallucinated
    )
    return DatasetStats(
        n_documents=len(dataset),
        n_entities=n_entities,
        n_unique_entities=len(surfaces),
        mean_words_per_entity=words / n_entities,
        mean_entities_per_document=n_entities / len(dataset),
        hallucination_rate=hallucinated / n_entities,
        rate_histogram=rate_histogram(dataset),
    )


def _encode_attention_row(row: np.ndarray) -> str:
    packed = np.ascontiguousarray(row, dtype="<f4").tobytes()
    return base64.b64encode(packed).decode("ascii")


def _decode_attention_row(text: str, path: str, line: int, index: int) -> np.ndarray:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except Exception as exc:
        raise ParseError(
            f"attention row {index}: invalid base64", path=path, line=line
        ) from exc
    if len(raw) % 4:
        raise ParseError(
            f"attention row {index}: byte length {len(raw)} not a multiple of 4",
            path=path,
            line=line,
        )
    return np.frombuffer(raw, dtype="<f4").astype(np.float32, copy=False)


def trace_to_json(trace: GenerationTrace) -> dict:
    return {
        "doc_id": trace.doc_id,
        "generated_text": trace.generated_text,
        "tokens": [
            {
                "text": t.text,
                "char_start": t.char_start,
                "char_end": t.char_end,
                "logprob": t.logprob,
                "entropy_nats": t.entropy_nats,
                "alternatives": [
                    {
                        "surface": a.surface,
                        "logprob": a.logprob,
                        "nli_relation": a.nli_relation,
                        "realized": a.realized,
                    }
                    for a in t.alternatives
                ],
                "relevance_weight": t.relevance_weight,
                "adjusted_logprob": t.adjusted_logprob,
                "adjusted_entropy_bits": t.adjusted_entropy_bits,
                "is_keyword": t.is_keyword,
                "pos_tag": t.pos_tag,
                "ner_tag": t.ner_tag,
                "sentence_index": t.sentence_index,
                "word_index_in_sentence": t.word_index_in_sentence,
            }
            for t in trace.tokens
        ],
        "attention": [_encode_attention_row(row) for row in trace.attention],
    }


def _parse_alternative(item: Any, path: str, line: int) -> Alternative:
    return Alternative(
        surface=_expect(item, "surface", str, path, line),
        logprob=float(_expect(item, "logprob", _NUMBER, path, line)),
        nli_relation=_expect(item, "nli_relation", str, path, line),
        realized=bool(_expect(item, "realized", bool, path, line)),
    )


def _parse_token(item: Any, path: str, line: int) -> TokenRecord:
    alternatives = tuple(
        _parse_alternative(alt, path, line)
        for alt in _expect(item, "alternatives", list, path, line)
    )
    ner_tag = item.get("ner_tag")
    if ner_tag is not None and not isinstance(ner_tag, str):
        raise ParseError("key 'ner_tag': expected str or null", path=path, line=line)
    return TokenRecord(
        text=_expect(item, "text", str, path, line),
        char_start=_expect(item, "char_start", int, path, line),
        char_end=_expect(item, "char_end", int, path, line),
        logprob=float(_expect(item, "logprob", _NUMBER, path, line)),
        entropy_nats=float(_expect(item, "entropy_nats", _NUMBER, path, line)),
        alternatives=alternatives,
        relevance_weight=float(_expect(item, "relevance_weight", _NUMBER, path, line)),
        adjusted_logprob=float(_expect(item, "adjusted_logprob", _NUMBER, path, line)),
        adjusted_entropy_bits=float(
            _expect(item, "adjusted_entropy_bits", _NUMBER, path, line)
        ),
        is_keyword=_expect(item, "is_keyword", bool, path, line),
        pos_tag=_expect(item, "pos_tag", str, path, line),
        ner_tag=ner_tag,
        sentence_index=_expect(item, "sentence_index", int, path, line),
        word_index_in_sentence=_expect(item, "word_index_in_sentence", int, path, line),
    )


def trace_from_json(obj: Any, path: str = "<memory>", line: int = 0) -> GenerationTrace:
    """Parse one trace object.  Structural only: semantic invariants are the
    business of validate_trace, so scorers fault lazily rather than here."""
    tokens = tuple(
        _parse_token(t, path, line) for t in _expect(obj, "tokens", list, path, line)
    )
    attention = tuple(
        _decode_attention_row(row, path, line, i)
        if isinstance(row, str)
        else _bad_attention_cell(path, line, i)
        for i, row in enumerate(_expect(obj, "attention", list, path, line))
    )
    return GenerationTrace(
        doc_id=_expect(obj, "doc_id", str, path, line),
        generated_text=_expect(obj, "generated_text", str, path, line),
        tokens=tokens,
        attention=attention,
    )


def _bad_attention_cell(path: str, line: int, index: int) -> np.ndarray:
    raise ParseError(
        f"attention row {index}: expected base64 string", path=path, line=line
    )


def store_traces(traces: Iterable[GenerationTrace], path: str) -> None:
    with open_text(path, "wt") as fh:
        for trace in traces:
            fh.write(json.dumps(trace_to_json(trace), **_COMPACT))
            fh.write("\n")


def iter_traces(path: str) -> Iterator[GenerationTrace]:
    for lineno, obj in _iter_jsonl(path):
        yield trace_from_json(obj, path=str(path), line=lineno)


def load_traces(path: str) -> list[GenerationTrace]:
    return list(iter_traces(path))


def _parse_values(obj: Any, path: str, line: int) -> tuple[float, ...]:
    values = _expect(obj, "values", list, path, line)
    out = []
    for k, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, _NUMBER):
            raise ParseError(f"values[{k}]: expected number", path=path, line=line)
        out.append(float(v))
    return tuple(out)


def _parse_method(obj: Any, path: str, line: int) -> str:
    method = _expect(obj, "method", str, path, line)
    if method not in METHODS:
        raise ParseError(f"unknown method {method!r}", path=path, line=line)
    return method


def store_token_scores(scores: Iterable[TokenScores], path: str) -> None:
    with open_text(path, "wt") as fh:
        for s in scores:
            obj = {"doc_id": s.doc_id, "method": s.method, "values": list(s.values)}
            fh.write(json.dumps(obj, **_COMPACT))
            fh.write("\n")


def iter_token_scores(path: str) -> Iterator[TokenScores]:
    for lineno, obj in _iter_jsonl(path):
        yield TokenScores(
            doc_id=_expect(obj, "doc_id", str, str(path), lineno),
            method=_parse_method(obj, str(path), lineno),
            values=_parse_values(obj, str(path), lineno),
        )


def load_token_scores(path: str) -> list[TokenScores]:
    return list(iter_token_scores(path))


def store_entity_scores(scores: Iterable[EntityScores], path: str) -> None:
    with open_text(path, "wt") as fh:
        for s in scores:
            obj = {
                "doc_id": s.doc_id,
                "method": s.method,
                "values": list(s.values),
                "token_ranges": [[a, b] for a, b in s.token_ranges],
            }
            fh.write(json.dumps(obj, **_COMPACT))
            fh.write("\n")


def _parse_ranges(obj: Any, path: str, line: int) -> tuple[tuple[int, int], ...]:
    ranges = _expect(obj, "token_ranges", list, path, line)
    out = []
    for k, pair in enumerate(ranges):
        ok = (
            isinstance(pair, list)
            and len(pair) == 2
            and all(isinstance(v, int) and not isinstance(v, bool) for v in pair)
        )
        if not ok:
            raise ParseError(
                f"token_ranges[{k}]: expected [start, end] integer pair",
                path=path,
                line=line,
            )
        out.append((pair[0], pair[1]))
    return tuple(out)


def iter_entity_scores(path: str) -> Iterator[EntityScores]:
    for lineno, obj in _iter_jsonl(path):
        values = _parse_values(obj, str(path), lineno)
        ranges = _parse_ranges(obj, str(path), lineno)
        if len(values) != len(ranges):
            raise ParseError(
                f"{len(values)} values but {len(ranges)} token ranges",
                path=str(path),
                line=lineno,
            )
        yield EntityScores(
            doc_id=_expect(obj, "doc_id", str, str(path), lineno),
            method=_parse_method(obj, str(path), lineno),
            values=values,
            token_ranges=ranges,
        )


def load_entity_scores(path: str) -> list[EntityScores]:
    return list(iter_entity_scores(path))


def store_report(report: Mapping[str, Any], path: str) -> None:
    """Human-readable JSON report (indent=2, key order as constructed)."""
    with open_text(path, "wt") as fh:
        json.dump(report, fh, ensure_ascii=False, allow_nan=False, indent=2)
        fh.write("\n")


def import_published_records(
    records: Iterable[Mapping[str, Any]],
) -> tuple[list[AnnotatedDocument], list[str]]:
    """Adapt externally published annotations to the canonical dataset form.

    Accepted record shapes:
      * ``{"doc_id"?, "name"?, "text", "entities": [{"surface", "label",
        "start"?, "end"?}, ...]}``
      * parallel lists ``{"text", "entity": [...], "label": [...]}``

    When offsets are absent, surfaces are located by left-to-right
    non-overlapping search.  Matches needing a restart, unlocatable surfaces,
    and overlapping spans are flagged for manual resolution (and the entity
    dropped) rather than guessed at.

    Returns (documents, flags).
    """
    docs: list[AnnotatedDocument] = []
    flags: list[str] = []
    for i, record in enumerate(records):
        doc_id = str(record.get("doc_id", f"doc-{i:04d}"))
        text = record.get("text") or record.get("generated_text")
        if not isinstance(text, str):
            flags.append(f"{doc_id}: no text field; record skipped")
            continue
        name = str(record.get("name", doc_id))
        pairs = _published_pairs(record)
        if pairs is None:
            flags.append(f"{doc_id}: no entity annotations; record skipped")
            continue

        found: list[Entity] = []
        cursor = 0
        for k, (surface, raw_label, start, end) in enumerate(pairs):
            label = canonical_label(raw_label) if isinstance(raw_label, str) else None
            if label is None:
                flags.append(f"{doc_id}: entity {k}: unknown label {raw_label!r}")
                continue
            if start is None:
                start = text.find(surface, cursor)
                if start < 0:
                    start = text.find(surface)
                    if start >= 0:
                        flags.append(
                            f"{doc_id}: entity {k} ({surface!r}) found only "
                            f"before position {cursor}; match is ambiguous"
                        )
                if start < 0:
                    flags.append(f"{doc_id}: entity {k} ({surface!r}) not found")
                    continue
                end = start + len(surface)
            elif not (0 <= start < (end or 0) <= len(text)) or text[start:end] != surface:
                flags.append(
                    f"{doc_id}: entity {k} ({surface!r}) offsets do not match text"
                )
                continue
            found.append(
                Entity(
                    entity_id=len(found),
                    surface=surface,
                    char_start=start,
                    char_end=end,
                    label=label,
                )
            )
            cursor = max(cursor, end)

        found.sort(key=lambda e: (e.char_start, e.char_end))
        kept: list[Entity] = []
        for ent in found:
            if kept and ent.char_start < kept[-1].char_end:
                flags.append(
                    f"{doc_id}: entity {ent.surface!r} at {ent.char_start} "
                    f"overlaps a previous span; dropped"
                )
                continue
            kept.append(ent)
        if not kept:
            flags.append(f"{doc_id}: no usable entities; record skipped")
            continue
        renumbered = tuple(
            Entity(
                entity_id=j,
                surface=e.surface,
                char_start=e.char_start,
                char_end=e.char_end,
                label=e.label,
            )
            for j, e in enumerate(kept)
        )
        docs.append(
            AnnotatedDocument(
                doc_id=doc_id, name=name, generated_text=text, entities=renumbered
            )
        )
    return docs, flags


def _published_pairs(
    record: Mapping[str, Any],
) -> list[tuple[str, Any, int | None, int | None]] | None:
    """Normalize either annotation shape to (surface, label, start?, end?)."""
    entities = record.get("entities") or record.get("annotations")
    if isinstance(entities, list):
        out = []
        for item in entities:
            if not isinstance(item, Mapping):
                continue
            surface = item.get("surface") or item.get("entity")
            label = item.get("label") or item.get("annotation")
            if not isinstance(surface, str):
                continue
            start = item.get("start")
            end = item.get("end")
            if not isinstance(start, int) or not isinstance(end, int):
                start = end = None
            out.append((surface, label, start, end))
        return out
    surfaces = record.get("entity")
    labels = record.get("label")
    if isinstance(surfaces, list) and isinstance(labels, list):
        return [
            (s, l, None, None)
            for s, l in zip(surfaces, labels)
            if isinstance(s, str)
        ]
    return None
