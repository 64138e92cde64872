"""Entity-level hallucination scoring over LLM generation traces."""

from .aggregation import aggregate
from .alignment import AlignmentResult, align
from .analysis import (
    AnalysisReport,
    CellCounts,
    EntityTagIncidence,
    TagStat,
    analyze_corpus,
    error_breakdown,
    position_class,
    rate_histogram,
    render_samples,
    tag_stats,
)
from .dataset_io import (
    DatasetStats,
    dataset_stats,
    import_published_records,
    iter_documents,
    iter_entity_scores,
    iter_token_scores,
    iter_traces,
    load_dataset,
    load_entity_scores,
    load_token_scores,
    load_traces,
    store_dataset,
    store_entity_scores,
    store_report,
    store_token_scores,
    store_traces,
)
from .errors import (
    AggregationError,
    AlignmentError,
    HalluscoreError,
    MetricError,
    ParseError,
    ScorerError,
    UsageError,
)
from .metrics import (
    EvaluationReport,
    MetricSummary,
    auprc,
    auroc,
    evaluate,
    f1_sweep,
    group_by_rate,
    pearson,
    rate_group,
    summarize,
)
from .scorers import (
    FocusConfig,
    score,
    score_ccp,
    score_entropy,
    score_focus,
    score_likelihood,
    score_sar,
)
from .types import (
    LABEL_HALLUCINATED,
    LABEL_SUPPORTED,
    METHODS,
    NLI_CONTRADICT,
    NLI_ENTAIL,
    NLI_NEUTRAL,
    RATE_GROUPS,
    Alternative,
    AnnotatedDocument,
    Entity,
    EntityScores,
    GenerationTrace,
    ScorerDiagnostics,
    TokenRecord,
    TokenScores,
    make_attention,
    validate_trace,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationError",
    "AlignmentError",
    "AlignmentResult",
    "AnalysisReport",
    "AnnotatedDocument",
    "Alternative",
    "CellCounts",
    "DatasetStats",
    "Entity",
    "EntityScores",
    "EntityTagIncidence",
    "EvaluationReport",
    "FocusConfig",
    "GenerationTrace",
    "HalluscoreError",
    "LABEL_HALLUCINATED",
    "LABEL_SUPPORTED",
    "METHODS",
    "MetricError",
    "MetricSummary",
    "NLI_CONTRADICT",
    "NLI_ENTAIL",
    "NLI_NEUTRAL",
    "ParseError",
    "RATE_GROUPS",
    "ScorerDiagnostics",
    "ScorerError",
    "TagStat",
    "TokenRecord",
    "TokenScores",
    "UsageError",
    "aggregate",
    "align",
    "analyze_corpus",
    "auprc",
    "auroc",
    "dataset_stats",
    "error_breakdown",
    "evaluate",
    "f1_sweep",
    "group_by_rate",
    "import_published_records",
    "iter_documents",
    "iter_entity_scores",
    "iter_token_scores",
    "iter_traces",
    "load_dataset",
    "load_entity_scores",
    "load_token_scores",
    "load_traces",
    "make_attention",
    "pearson",
    "position_class",
    "rate_group",
    "rate_histogram",
    "render_samples",
    "score",
    "score_ccp",
    "score_entropy",
    "score_focus",
    "score_likelihood",
    "score_sar",
    "store_dataset",
    "store_entity_scores",
    "store_report",
    "store_token_scores",
    "store_traces",
    "summarize",
    "tag_stats",
    "validate_trace",
]
