"""Token-to-entity score aggregation (arithmetic mean over the token range)."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .alignment import AlignmentResult
from .errors import AggregationError
from .types import EntityScores, TokenScores


def aggregate(token_scores: TokenScores, alignment: AlignmentResult) -> EntityScores:
    """Mean of token scores over each entity's inclusive token range.

    An entity whose tokens all score 0 (e.g. all non-keyword under Focus)
    gets 0, not a missing value.
    """
    n = len(token_scores.values)
    for k, (start, end) in enumerate(alignment.token_ranges):
        if not (0 <= start <= end < n):
            raise AggregationError(
                f"doc {token_scores.doc_id}: entity {k}: token range "
                f"({start}, {end}) out of bounds for {n} token scores"
            )
    if alignment.token_ranges:
        starts = np.array([r[0] for r in alignment.token_ranges], dtype=np.int64)
        ends = np.array([r[1] for r in alignment.token_ranges], dtype=np.int64)
        values = np.asarray(token_scores.values, dtype=np.float64)
        means = _kernels.segment_means(values, starts, ends)
        out = tuple(float(v) for v in means)
    else:
        out = ()
    return EntityScores(
        doc_id=token_scores.doc_id,
        method=token_scores.method,
        values=out,
        token_ranges=tuple(alignment.token_ranges),
    )
