"""Assembles trace bundles from model evidence and writes the wire format.

The wire format is the halluscore engine's trace-bundle JSONL: one object
per line with keys doc_id / generated_text / tokens / attention, attention
rows as base64 little-endian float32, compact separators, NaN rejected.
This module reproduces that format from its documentation alone — the
engine is a separate package and is never imported here.

Each bundle gets a ``<out>.meta.json`` sidecar recording the model id and
every knob that shaped the numbers (top-k, NLI context window, table
source), so a bundle's provenance survives the file leaving the machine.
"""

from __future__ import annotations

import base64
import gzip
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DatasetError
from .idf import IdfTable, adjust_distribution, entropy_bits
from .models import TokenEvidence
from .semantics import relevance_weights
from .textproc import KEYWORD_POS, Word, segment_words

FORMAT_VERSION = 1

_COMPACT = {"ensure_ascii": False, "separators": (",", ":"), "allow_nan": False}


@dataclass(frozen=True)
class ExtractionConfig:
    model_id: str
    topk: int = 10
    nli_model: str = "heuristic"
    embed_model: str = "hash"
    tagger: str = "rule"
    nli_context_window: int = 200
    idf_source: str = "bundled"


def _open_out(path: str, mode: str):
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def read_documents(path: str) -> list[tuple[str, str]]:
    """(doc_id, text) pairs from a dataset file; entities are not needed
    for extraction and are left untouched."""
    docs: list[tuple[str, str]] = []
    seen: set[str] = set()
    try:
        with _open_out(path, "r") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetError(f"invalid JSON: {exc.msg}", path, lineno) from exc
                if not isinstance(obj, dict):
                    raise DatasetError("expected an object", path, lineno)
                doc_id, text = obj.get("doc_id"), obj.get("text")
                if not isinstance(doc_id, str) or not isinstance(text, str):
                    raise DatasetError(
                        "doc_id and text must be strings", path, lineno
                    )
                if doc_id in seen:
                    raise DatasetError(f"duplicate doc_id {doc_id!r}", path, lineno)
                seen.add(doc_id)
                docs.append((doc_id, text))
    except (OSError, EOFError) as exc:
        raise DatasetError(f"unreadable dataset: {exc}", path) from exc
    return docs


def _word_for_span(words: Sequence[Word], start: int, end: int) -> Word | None:
    for word in words:
        if word.chunk_start <= start and end <= word.chunk_end:
            return word
    return None


def _select_alternatives(
    evidence: TokenEvidence, topk: int
) -> tuple[list[tuple[str, float]], int]:
    """Top-k pool entries; the realized token is appended as entry k+1 when
    it did not make the cut."""
    pool = evidence.pool
    head = pool[:topk]
    if evidence.realized_index < topk:
        return head, evidence.realized_index
    head = head + [pool[evidence.realized_index]]
    return head, len(head) - 1


def build_trace(
    doc_id: str,
    text: str,
    evidences: Sequence[TokenEvidence],
    config: ExtractionConfig,
    idf_table: IdfTable,
    nli,
    embed,
    pos_fn,
    ner_fn,
) -> dict:
    words = segment_words(text)
    by_sentence: dict[int, list[Word]] = {}
    for word in words:
        by_sentence.setdefault(word.sentence_index, []).append(word)
    weights = {
        (s, wi): w
        for s, sentence in by_sentence.items()
        for wi, w in relevance_weights(sentence, embed).items()
    }
    tags = {
        (w.sentence_index, w.word_index): (pos_fn(w.core), ner_fn(w.core))
        for w in words
    }

    tokens = []
    attention = []
    for evidence in evidences:
        word = _word_for_span(words, evidence.char_start, evidence.char_end)
        if word is None:
            raise DatasetError(
                f"doc {doc_id}: token span [{evidence.char_start}, "
                f"{evidence.char_end}) maps to no word of the text"
            )
        key = (word.sentence_index, word.word_index)
        is_core = (
            word.char_start <= evidence.char_start
            and evidence.char_end <= word.char_end
            and bool(word.core)
        )
        pos, ner = tags[key] if is_core else ("PUNCT", None)

        alts, realized_index = _select_alternatives(evidence, config.topk)
        premise = text[: evidence.char_start][-config.nli_context_window :]
        alternatives = []
        for k, (surface, prob) in enumerate(alts):
            alternatives.append(
                {
                    "surface": surface,
                    "logprob": min(0.0, math.log(prob)) if prob > 0 else -745.0,
                    "nli_relation": nli(premise, surface, evidence.text),
                    "realized": k == realized_index,
                }
            )

        probs = [p for _, p in alts]
        idfs = [idf_table.idf(s) for s, _ in alts]
        adjusted = adjust_distribution(probs, idfs)
        adjusted_logprob = min(0.0, math.log(adjusted[realized_index]))

        tokens.append(
            {
                "text": evidence.text,
                "char_start": evidence.char_start,
                "char_end": evidence.char_end,
                "logprob": evidence.logprob,
                "entropy_nats": evidence.entropy_nats,
                "alternatives": alternatives,
                "relevance_weight": weights.get(key, 0.0),
                "adjusted_logprob": adjusted_logprob,
                "adjusted_entropy_bits": entropy_bits(adjusted),
                "is_keyword": is_core and pos in KEYWORD_POS,
                "pos_tag": pos,
                "ner_tag": ner,
                "sentence_index": word.sentence_index,
                "word_index_in_sentence": word.word_index,
            }
        )
        attention.append(_encode_attention_row(evidence.attention_row))

    return {
        "doc_id": doc_id,
        "generated_text": text,
        "tokens": tokens,
        "attention": attention,
    }


def _encode_attention_row(row: np.ndarray) -> str:
    data = np.ascontiguousarray(row, dtype="<f4").tobytes()
    return base64.b64encode(data).decode("ascii")


def write_bundle(traces: Iterable[dict], path: str) -> int:
    n = 0
    with _open_out(path, "w") as fh:
        for trace in sorted(traces, key=lambda t: t["doc_id"]):
            fh.write(json.dumps(trace, **_COMPACT))
            fh.write("\n")
            n += 1
    return n


def write_metadata(path: str, config: ExtractionConfig, n_documents: int) -> str:
    meta_path = path + ".meta.json"
    payload = {
        "format_version": FORMAT_VERSION,
        "model_id": config.model_id,
        "topk": config.topk,
        "nli_model": config.nli_model,
        "nli_context_window": config.nli_context_window,
        "embed_model": config.embed_model,
        "tagger": config.tagger,
        "idf_table": config.idf_source,
        "documents": n_documents,
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    return meta_path
