"""Sentence/word segmentation, toy tokenizers, and the rule tagger.

The canonical word view (spans, sentence/word indices, POS/NER tags,
keyword flags) is computed once per text and shared by every tokenizer, so
word-level evidence (relevance weights, tags) lands on the same values no
matter how the model splits words into tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ModelError

_SENT_END = ".!?"
_PUNCT = ".,;:!?\"'()[]-"  # strip() only touches the ends: state-of-the-art survives

_DET = {"a", "an", "the"}
_ADP = {"in", "at", "of", "for", "by", "on", "with", "from", "to", "against", "during"}
_CCONJ = {"and", "or", "but", "nor"}
_PRON = {"he", "she", "it", "they", "his", "her", "its", "their", "who", "which", "that"}
_AUX = {"is", "was", "are", "were", "be", "been", "being", "has", "had", "have", "does", "did"}

KEYWORD_POS = ("PROPN", "NOUN", "NUM")


@dataclass(frozen=True)
class Word:
    """One whitespace-delimited chunk, punctuation stripped to `core`."""

    core: str
    char_start: int  # span of the core only
    char_end: int
    chunk_start: int  # span of the full chunk, punctuation included
    chunk_end: int
    sentence_index: int
    word_index: int


@dataclass(frozen=True)
class RawToken:
    text: str
    char_start: int
    char_end: int
    word: Word
    is_core: bool  # False for split-off punctuation


def rule_pos(core: str) -> str:
    if not core:
        return "PUNCT"
    low = core.lower()
    if core[0].isdigit():
        return "NUM"
    if low in _DET:
        return "DET"
    if low in _ADP:
        return "ADP"
    if low in _CCONJ:
        return "CCONJ"
    if low in _PRON:
        return "PRON"
    if low in _AUX:
        return "AUX"
    if core[0].isupper():
        return "PROPN"
    return "NOUN"


def rule_ner(core: str) -> str | None:
    if not core:
        return None
    if core[0].isdigit():
        return "DATE"
    if core[0].isupper():
        return "PERSON"
    return None


def get_tagger(name: str):
    """Returns (pos_fn, ner_fn) for a tagger name; only 'rule' ships."""
    if name == "rule":
        return rule_pos, rule_ner
    try:
        import spacy
    except ImportError as exc:
        raise ModelError(
            f"tagger {name!r} needs spacy (pip install spacy); "
            "only the built-in 'rule' tagger works without it"
        ) from exc
    try:
        nlp = spacy.load(name)
    except OSError as exc:
        raise ModelError(f"spacy model {name!r} is not installed locally") from exc

    def pos(core: str) -> str:
        doc = nlp(core)
        return doc[0].pos_ if len(doc) else "PUNCT"

    def ner(core: str) -> str | None:
        doc = nlp(core)
        return doc.ents[0].label_ if doc.ents else None

    return pos, ner


def segment_words(text: str) -> list[Word]:
    """Whitespace chunks with core spans and sentence/word indices.

    A sentence ends after a chunk whose last character is . ! or ?; word
    indices restart at 0 in each sentence.  All-punctuation chunks count as
    words too (empty core, PUNCT tag downstream).
    """
    words: list[Word] = []
    sentence = 0
    word_index = 0
    for match in re.finditer(r"\S+", text):
        chunk = match.group()
        cursor = match.start()
        head = len(chunk) - len(chunk.lstrip(_PUNCT))
        core = chunk.strip(_PUNCT)
        if core:
            start = cursor + head
            end = start + len(core)
        else:
            start = end = cursor  # punctuation-only chunk
        words.append(
            Word(
                core=core,
                char_start=start,
                char_end=end,
                chunk_start=cursor,
                chunk_end=match.end(),
                sentence_index=sentence,
                word_index=word_index,
            )
        )
        word_index += 1
        if chunk[-1] in _SENT_END:
            sentence += 1
            word_index = 0
    return words


def _punct_tokens(text: str, start: int, end: int, word: Word) -> list[RawToken]:
    return [
        RawToken(text[i], i, i + 1, word, is_core=False)
        for i in range(start, end)
    ]


def tokenize_words(text: str) -> list[RawToken]:
    """One token per word core; punctuation split into 1-char tokens."""
    tokens: list[RawToken] = []
    for word in segment_words(text):
        tokens.extend(_punct_tokens(text, word.chunk_start, word.char_start, word))
        if word.core:
            tokens.append(
                RawToken(word.core, word.char_start, word.char_end, word, is_core=True)
            )
        tokens.extend(_punct_tokens(text, word.char_end, word.chunk_end, word))
    return tokens


def tokenize_subwords(text: str) -> list[RawToken]:
    """Splits every core word of length ≥ 4 in half — a deliberately
    incompatible tokenization for exercising the proxy-model fallback."""
    tokens: list[RawToken] = []
    for tok in tokenize_words(text):
        if tok.is_core and len(tok.text) >= 4:
            mid = len(tok.text) // 2
            tokens.append(
                RawToken(tok.text[:mid], tok.char_start, tok.char_start + mid, tok.word, True)
            )
            tokens.append(
                RawToken(tok.text[mid:], tok.char_start + mid, tok.char_end, tok.word, True)
            )
        else:
            tokens.append(tok)
    return tokens
