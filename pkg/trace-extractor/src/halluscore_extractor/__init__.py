"""Trace-bundle extraction for the halluscore scoring engine.

Runs a causal language model in teacher-forcing mode over already-generated
text and records, per token, everything the engine's scorers need:
log-probabilities, entropies, candidate alternatives with NLI relations,
relevance weights, IDF-adjusted statistics, tags, and max-pooled attention.
Bundles are exchanged with the engine purely as files.
"""

from .bundle import ExtractionConfig, build_trace, write_bundle, write_metadata
from .idf import IdfTable, load_idf_table
from .models import TokenEvidence, ToyScorer, get_scorer

__all__ = [
    "ExtractionConfig",
    "IdfTable",
    "TokenEvidence",
    "ToyScorer",
    "build_trace",
    "get_scorer",
    "load_idf_table",
    "write_bundle",
    "write_metadata",
]

__version__ = "0.1.0"
