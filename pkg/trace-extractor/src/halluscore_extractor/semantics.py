"""Relevance weights and NLI relation assignment.

Both come in two flavours: deterministic offline backends (`hash`
embeddings, `heuristic` NLI) that need no model downloads, and real-model
backends loaded lazily from local files.  The offline backends are seeded
by SHA-256 of their inputs, so identical inputs give identical outputs on
every platform and run.
"""

from __future__ import annotations

import hashlib
import math
import string

import numpy as np

from .errors import ModelError
from .textproc import Word

EMBED_DIM = 64
NLI_RELATIONS = ("entail", "contradict", "neutral")

_STRIP = str.maketrans("", "", string.punctuation)


def digest_floats(*parts: str, n: int) -> np.ndarray:
    """n floats in [0, 1) derived from the SHA-256 stream of the parts."""
    seed = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    out = np.empty(n)
    counter = 0
    filled = 0
    while filled < n:
        block = hashlib.sha256(seed + counter.to_bytes(4, "little")).digest()
        for off in range(0, 32, 4):
            if filled == n:
                break
            out[filled] = int.from_bytes(block[off : off + 4], "little") / 2**32
            filled += 1
        counter += 1
    return out


def _normalize(word: str) -> str:
    return word.translate(_STRIP).lower()


# -------------------------------------------------------------- embeddings


def hash_embedding(words: list[str]) -> np.ndarray:
    """Bag-of-words embedding: sum of per-word nonnegative unit vectors.

    Nonnegative components keep all cosines in [0, 1], so the derived
    relevance weights stay inside the trace schema's [0, 1] bound.
    """
    total = np.zeros(EMBED_DIM)
    for word in words:
        norm = _normalize(word)
        if not norm:
            continue
        vec = digest_floats("embed", norm, n=EMBED_DIM)
        total += vec / np.linalg.norm(vec)
    return total


def get_embedder(name: str):
    if name == "hash":
        return hash_embedding
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ModelError(
            f"embed model {name!r} needs sentence-transformers; "
            "the built-in 'hash' backend works without it"
        ) from exc
    try:
        model = SentenceTransformer(name, local_files_only=True)
    except Exception as exc:  # model hub errors are not a stable hierarchy
        raise ModelError(f"cannot load embed model {name!r} locally: {exc}") from exc

    def embed(words: list[str]) -> np.ndarray:
        return model.encode(" ".join(words), convert_to_numpy=True)

    return embed


def relevance_weights(sentence_words: list[Word], embed) -> dict[int, float]:
    """Per-word SAR weight: 1 − cos(sentence, sentence without the word).

    Keyed by word_index within the sentence; a single-word sentence keeps
    weight 1 (removing its only word leaves nothing to compare against).
    Weights are clamped into [0, 1].
    """
    cores = [w.core for w in sentence_words if w.core]
    weights: dict[int, float] = {}
    full = embed(cores) if cores else None
    full_norm = float(np.linalg.norm(full)) if full is not None else 0.0
    for word in sentence_words:
        if not word.core:
            weights[word.word_index] = 0.0
            continue
        rest = [w.core for w in sentence_words if w.core and w is not word]
        if not rest or full_norm == 0.0:
            weights[word.word_index] = 1.0
            continue
        reduced = embed(rest)
        reduced_norm = float(np.linalg.norm(reduced))
        if reduced_norm == 0.0:
            weights[word.word_index] = 1.0
            continue
        cos = float(np.dot(full, reduced)) / (full_norm * reduced_norm)
        weights[word.word_index] = min(1.0, max(0.0, 1.0 - cos))
    return weights


# --------------------------------------------------------------------- NLI


def _is_numeric(word: str) -> bool:
    norm = _normalize(word)
    return bool(norm) and norm[0].isdigit()


def heuristic_nli(premise: str, alternative: str, realized: str) -> str:
    """Deterministic stand-in for an NLI model.

    Same surface (modulo case/punctuation) entails; two different numbers
    contradict; everything else is assigned pseudo-randomly — but stably —
    from the hash of (premise, alternative, realized), so changing the
    premise window genuinely changes the verdicts.
    """
    if _normalize(alternative) == _normalize(realized):
        return "entail"
    if _is_numeric(alternative) and _is_numeric(realized):
        return "contradict"
    u = float(digest_floats("nli", premise, alternative, realized, n=1)[0])
    if u < 0.25:
        return "entail"
    if u < 0.60:
        return "contradict"
    return "neutral"


def get_nli(name: str):
    if name == "heuristic":
        return heuristic_nli
    try:
        from transformers import pipeline
    except ImportError as exc:
        raise ModelError(
            f"nli model {name!r} needs transformers; "
            "the built-in 'heuristic' backend works without it"
        ) from exc
    try:
        classifier = pipeline(
            "text-classification", model=name, model_kwargs={"local_files_only": True}
        )
    except Exception as exc:
        raise ModelError(f"cannot load nli model {name!r} locally: {exc}") from exc

    label_map = {
        "entailment": "entail",
        "contradiction": "contradict",
        "neutral": "neutral",
    }

    def nli(premise: str, alternative: str, realized: str) -> str:
        verdict = classifier({"text": premise + alternative, "text_pair": premise + realized})
        return label_map.get(verdict["label"].lower(), "neutral")

    return nli
