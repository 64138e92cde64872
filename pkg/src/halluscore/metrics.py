"""Threshold-agnostic and threshold-optimal binary classification metrics.

Labels are 1 for hallucinated, 0 for supported; the prediction convention is
``score >= threshold  =>  hallucinated`` (all scorers are
uncertainty-increasing).  Metrics are computed over the pooled corpus of
entities (micro), not averaged per document.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MetricError
from .types import RATE_GROUPS, AnnotatedDocument

# F1 values closer than this are treated as tied and broken toward higher
# precision, then higher threshold.
_F1_TIE_TOL = 1e-12


def _as_label_score_arrays(
    labels: Sequence[int], scores: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(labels, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise MetricError(
            f"labels and scores must be 1-d and equal length, "
            f"got {y.shape} vs {s.shape}"
        )
    if y.size and not np.isin(y, (0, 1)).all():
        raise MetricError("labels must be binary (0/1)")
    return y, s


def _tie_average_ranks(s: np.ndarray) -> np.ndarray:
    """1-based ranks of ``s`` ascending, ties sharing their average rank."""
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    boundary = np.r_[True, sorted_s[1:] != sorted_s[:-1]]
    group = np.cumsum(boundary) - 1
    counts = np.bincount(group)
    first_rank = np.cumsum(counts) - counts + 1
    avg = first_rank + (counts - 1) / 2.0
    ranks = np.empty(s.shape[0], dtype=np.float64)
    ranks[order] = avg[group]
    return ranks


def auroc(labels: Sequence[int], scores: Sequence[float]) -> float:
    """P(score+ > score-) + 0.5 * P(tie) over positive-negative pairs."""
    y, s = _as_label_score_arrays(labels, scores)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("undefined AUROC: only one class present")
    ranks = _tie_average_ranks(s)
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _threshold_steps(
    y: np.ndarray, s: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct thresholds descending with cumulative TP/FP at each step."""
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    last_of_group = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tp = np.cumsum(y_sorted)[last_of_group]
    fp = np.cumsum(1 - y_sorted)[last_of_group]
    return s_sorted[last_of_group], tp, fp


def auprc(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Average precision with step interpolation; ties are one threshold step."""
    y, s = _as_label_score_arrays(labels, scores)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise MetricError("undefined AUPRC: no positive labels")
    _, tp, fp = _threshold_steps(y, s)
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return float(np.sum(np.diff(recall, prepend=0.0) * precision))


def f1_sweep(
    labels: Sequence[int], scores: Sequence[float]
) -> tuple[float, float, float, float]:
    """Best (f1, precision, recall, threshold) over all score thresholds.

    Every distinct score is tried as a ``>=`` threshold, plus the all-negative
    threshold (+inf).  F1 ties are broken toward higher precision, then
    higher threshold.
    """
    y, s = _as_label_score_arrays(labels, scores)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise MetricError("undefined F1 sweep: no positive labels")
    thresholds, tps, fps = _threshold_steps(y, s)
    best_f1, best_p, best_r, best_t = 0.0, 0.0, 0.0, math.inf
    for t, tp, fp in zip(thresholds, tps, fps):
        p = tp / (tp + fp)
        r = tp / n_pos
        f1 = 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)
        # descending scan: keeping the incumbent on ties prefers the higher
        # threshold automatically
        if f1 > best_f1 + _F1_TIE_TOL or (
            abs(f1 - best_f1) <= _F1_TIE_TOL and p > best_p + _F1_TIE_TOL
        ):
            best_f1, best_p, best_r, best_t = float(f1), float(p), float(r), float(t)
    return best_f1, best_p, best_r, best_t


def rate_group(hallucinated: int, total: int) -> str:
    """low / medium / high bucket for a document's hallucination rate.

    Boundaries in exact integer arithmetic: low is r < 0.10, medium is
    0.10 <= r <= 0.20 (closed on both ends), high is r > 0.20.
    """
    if 10 * hallucinated < total:
        return "low"
    if 5 * hallucinated <= total:
        return "medium"
    return "high"


def group_by_rate(dataset: Sequence[AnnotatedDocument]) -> dict[str, list[str]]:
    """Bucket doc_ids by per-document hallucination rate."""
    groups: dict[str, list[str]] = {g: [] for g in RATE_GROUPS}
    for doc in dataset:
        hallucinated = sum(1 for e in doc.entities if e.is_hallucinated)
        groups[rate_group(hallucinated, len(doc.entities))].append(doc.doc_id)
    return groups


def pearson(a: Sequence[float], b: Sequence[float]) -> float:
    """Product-moment correlation; undefined for constant input."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError(f"inputs must be 1-d and equal length, got {x.shape} vs {y.shape}")
    if x.size < 2:
        raise MetricError("undefined Pearson correlation: need at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise MetricError("undefined Pearson correlation: constant input")
    return float(np.clip(float(dx @ dy) / denom, -1.0, 1.0))


@dataclass(frozen=True)
class MetricSummary:
    """The five metrics plus operating point for one entity population.

    Fields are None when undefined for the population (single class).
    """

    auroc: float | None
    auprc: float | None
    f1_opt: float | None
    precision_opt: float | None
    recall_opt: float | None
    opt_threshold: float | None
    n_positive: int
    n_negative: int


@dataclass(frozen=True)
class EvaluationReport:
    """Corpus-level metrics for one method, optionally split by rate group."""

    method: str
    auroc: float
    auprc: float
    f1_opt: float
    precision_opt: float
    recall_opt: float
    opt_threshold: float
    n_positive: int
    n_negative: int
    per_group: dict[str, MetricSummary] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


def summarize(labels: Sequence[int], scores: Sequence[float]) -> MetricSummary:
    """Lenient summary: metrics a single-class population cannot define are None."""
    y, s = _as_label_score_arrays(labels, scores)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    out: dict[str, float | None] = dict.fromkeys(
        ("auroc", "auprc", "f1_opt", "precision_opt", "recall_opt", "opt_threshold")
    )
    if n_pos and n_neg:
        out["auroc"] = auroc(y, s)
    if n_pos:
        out["auprc"] = auprc(y, s)
        out["f1_opt"], out["precision_opt"], out["recall_opt"], out["opt_threshold"] = (
            f1_sweep(y, s)
        )
    return MetricSummary(n_positive=n_pos, n_negative=n_neg, **out)


def evaluate(
    method: str,
    labels: Sequence[int],
    scores: Sequence[float],
    group_indices: dict[str, Sequence[int]] | None = None,
) -> EvaluationReport:
    """Full report over the pooled corpus; per-group splits are optional.

    ``group_indices`` maps group name to entity indices into labels/scores.
    Groups too degenerate for a metric get None there plus a report warning.
    """
    y, s = _as_label_score_arrays(labels, scores)
    overall_auroc = auroc(y, s)
    overall_auprc = auprc(y, s)
    f1, p, r, t = f1_sweep(y, s)
    per_group: dict[str, MetricSummary] = {}
    warnings: list[str] = []
    if group_indices is not None:
        for name, idx in group_indices.items():
            idx = np.asarray(idx, dtype=np.int64)
            summary = summarize(y[idx], s[idx])
            per_group[name] = summary
            if summary.auroc is None or summary.auprc is None:
                warnings.append(
                    f"group {name!r}: some metrics undefined "
                    f"({summary.n_positive} positive / {summary.n_negative} negative)"
                )
    return EvaluationReport(
        method=method,
        auroc=overall_auroc,
        auprc=overall_auprc,
        f1_opt=f1,
        precision_opt=p,
        recall_opt=r,
        opt_threshold=t,
        n_positive=int(y.sum()),
        n_negative=int(y.size - y.sum()),
        per_group=per_group,
        warnings=tuple(warnings),
    )
