"""IDF table loading and the IDF-adjusted token distribution.

Tables are plain two-column text: ``token idf`` per line, ``#`` comments
allowed.  Lookups are case-insensitive; tokens absent from the table get
the table's maximum idf (an unseen token is maximally document-specific).
A small bundled table covers common English function words so tests and
demos run without the expensive corpus pass that builds a real table.
"""

from __future__ import annotations

import math
from importlib.resources import files
from typing import Sequence

from .errors import TableError

BUNDLED = "bundled"


class IdfTable:
    def __init__(self, values: dict[str, float], source: str):
        if not values:
            raise TableError(f"{source}: idf table is empty")
        self.values = values
        self.source = source
        self.max_idf = max(values.values())

    def idf(self, token_text: str) -> float:
        return self.values.get(token_text.lower(), self.max_idf)


def load_idf_table(path: str | None = None) -> IdfTable:
    if path is None:
        source = BUNDLED
        text = (files("halluscore_extractor") / "data" / "default_idf.txt").read_text(
            encoding="utf-8"
        )
    else:
        source = path
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise TableError(f"cannot read idf table: {exc}") from exc
    values: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise TableError(
                f"{source}:{lineno}: expected 'token idf', got {stripped!r}"
            )
        token, raw = parts
        try:
            idf = float(raw)
        except ValueError as exc:
            raise TableError(f"{source}:{lineno}: bad idf value {raw!r}") from exc
        if not idf > 0 or not math.isfinite(idf):
            raise TableError(f"{source}:{lineno}: idf must be finite and > 0")
        values[token.lower()] = idf
    return IdfTable(values, source)


def adjust_distribution(
    probs: Sequence[float], idfs: Sequence[float]
) -> list[float]:
    """p̂ ∝ p · idf, renormalized over the same support."""
    weighted = [p * w for p, w in zip(probs, idfs)]
    total = sum(weighted)
    return [w / total for w in weighted]


def entropy_bits(probs: Sequence[float]) -> float:
    return -sum(p * math.log2(p) for p in probs if p > 0.0)
