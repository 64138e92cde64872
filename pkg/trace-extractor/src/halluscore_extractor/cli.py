"""Command line front end: extract / proxy.

Exit codes: 0 on success, 2 for a diagnosed fault (bad input, unknown
model, unreadable table), 3 for anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

from .bundle import (
    ExtractionConfig,
    build_trace,
    read_documents,
    write_bundle,
    write_metadata,
)
from .errors import ExtractorError, UsageError
from .idf import load_idf_table
from .models import get_scorer
from .semantics import get_embedder, get_nli
from .textproc import get_tagger


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halluscore-extract",
        description="Produce halluscore trace bundles from generated text.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_knobs(p: argparse.ArgumentParser) -> None:
        p.add_argument("--topk", type=int, default=10,
                       help="alternatives kept per token (realized is "
                            "appended when it falls outside the top k)")
        p.add_argument("--idf-table", default=None,
                       help="two-column 'token idf' file; bundled default")
        p.add_argument("--nli-model", default="heuristic")
        p.add_argument("--embed-model", default="hash")
        p.add_argument("--tagger", default="rule")
        p.add_argument("--nli-context-window", type=int, default=200,
                       help="characters of preceding text used as the NLI "
                            "premise; recorded in bundle metadata")

    p_extract = sub.add_parser("extract", help="one model, one bundle")
    p_extract.add_argument("model_id")
    p_extract.add_argument("dataset")
    p_extract.add_argument("out")
    add_knobs(p_extract)

    p_proxy = sub.add_parser(
        "proxy", help="several models over the same dataset, one bundle each"
    )
    p_proxy.add_argument("model_ids", nargs="+")
    p_proxy.add_argument("dataset")
    p_proxy.add_argument("out_dir")
    add_knobs(p_proxy)

    return parser


def _backends(args):
    if args.nli_context_window < 1:
        raise UsageError("--nli-context-window must be ≥ 1")
    table = load_idf_table(args.idf_table)
    return (
        table,
        get_nli(args.nli_model),
        get_embedder(args.embed_model),
        get_tagger(args.tagger),
    )


def _run_one(model_id, docs, out_path, args, table, nli, embed, tagger) -> int:
    pos_fn, ner_fn = tagger
    config = ExtractionConfig(
        model_id=model_id,
        topk=args.topk,
        nli_model=args.nli_model,
        embed_model=args.embed_model,
        tagger=args.tagger,
        nli_context_window=args.nli_context_window,
        idf_source=args.idf_table or "bundled",
    )
    scorer = get_scorer(model_id, args.topk)
    traces = [
        build_trace(doc_id, text, scorer.run(text), config, table,
                    nli, embed, pos_fn, ner_fn)
        for doc_id, text in docs
    ]
    n = write_bundle(traces, out_path)
    meta_path = write_metadata(out_path, config, n)
    print(f"extracted {n} documents -> {out_path}")
    print(f"metadata -> {meta_path}")
    return n


def cmd_extract(args) -> int:
    table, nli, embed, tagger = _backends(args)
    docs = read_documents(args.dataset)
    _run_one(args.model_id, docs, args.out, args, table, nli, embed, tagger)
    return 0


def _safe_name(model_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", model_id)


def cmd_proxy(args) -> int:
    table, nli, embed, tagger = _backends(args)
    docs = read_documents(args.dataset)
    os.makedirs(args.out_dir, exist_ok=True)

    token_counts: dict[str, dict[str, int]] = {}
    for model_id in args.model_ids:
        out_path = os.path.join(
            args.out_dir, f"{_safe_name(model_id)}.traces.jsonl"
        )
        _run_one(model_id, docs, out_path, args, table, nli, embed, tagger)
        with open(out_path, encoding="utf-8") as fh:
            counts = {}
            for line in fh:
                obj = json.loads(line)
                counts[obj["doc_id"]] = len(obj["tokens"])
        token_counts[model_id] = counts

    reference = token_counts[args.model_ids[0]]
    compatible = all(counts == reference for counts in token_counts.values())
    if not compatible:
        print(
            "note: tokenizations differ across models; "
            "compare these bundles at entity level"
        )
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"extract": cmd_extract, "proxy": cmd_proxy}
    try:
        return handlers[args.command](args)
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
