"""Batch command-line front end.

Subcommands: validate, score, evaluate, analyze, correlate.  Every command
is deterministic for fixed inputs and flags: work is parallelized over
documents but output is always ordered by doc_id, so worker count never
changes the bytes written.

Exit codes: 0 success; 1 output produced but with warnings; 2 diagnosed
input/usage fault; 3 internal fault.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import re
import sys
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import analysis, dataset_io, metrics
from .aggregation import aggregate
from .alignment import align
from .errors import AlignmentError, HalluscoreError, UsageError
from .scorers import FocusConfig, score
from .types import (
    METHODS,
    AnnotatedDocument,
    EntityScores,
    GenerationTrace,
    ScorerDiagnostics,
    TokenScores,
    validate_trace,
)

_KEY_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*\Z")

# dests a config file may set; anything else in the file is a usage fault
_CONFIG_DESTS = {
    "dataset",
    "traces",
    "scores",
    "out",
    "method",
    "gamma",
    "workers",
    "by_rate",
    "breakdown",
    "render",
    "threshold",
    "level",
}


def _parse_config_value(raw: str, path: str, lineno: int) -> Any:
    raw = raw.strip()
    if raw.startswith('"'):
        end = raw.find('"', 1)
        while end > 0 and raw[end - 1] == "\\":
            end = raw.find('"', end + 1)
        if end < 0:
            raise UsageError(f"{path}:{lineno}: unterminated string")
        tail = raw[end + 1 :].strip()
        if tail and not tail.startswith("#"):
            raise UsageError(f"{path}:{lineno}: trailing characters after string")
        return json.loads(raw[: end + 1])
    raw = raw.split("#", 1)[0].strip()
    if raw in ("true", "false"):
        return raw == "true"
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    raise UsageError(f"{path}:{lineno}: unquoted string value {raw!r}")


def load_config(path: str) -> dict[str, Any]:
    """Flat key = value file, a small TOML subset: strings are quoted,
    booleans are true/false, ``#`` comments; no sections or arrays."""
    out: dict[str, Any] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            raise UsageError(f"{path}:{lineno}: sections are not supported")
        key, sep, value = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not _KEY_RE.match(key):
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        if key not in _CONFIG_DESTS:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
        out[key] = _parse_config_value(value, path, lineno)
    return out


def _worker_count(args: argparse.Namespace) -> int:
    env = os.environ.get("HALLUSCORE_WORKERS")
    if env is not None:
        try:
            workers = int(env)
        except ValueError:
            raise UsageError(f"HALLUSCORE_WORKERS must be an integer, got {env!r}")
    else:
        workers = args.workers
    if workers < 1:
        raise UsageError(f"worker count must be ≥ 1, got {workers}")
    return workers


def _traces_by_id(path: str, docs: Sequence[AnnotatedDocument]) -> dict[str, GenerationTrace]:
    by_id = {t.doc_id: t for t in dataset_io.iter_traces(path)}
    missing = sorted(d.doc_id for d in docs if d.doc_id not in by_id)
    if missing:
        raise UsageError(f"traces missing for doc(s): {', '.join(missing)}")
    return by_id


# ---------------------------------------------------------------- validate


def cmd_validate(args: argparse.Namespace) -> int:
    docs = dataset_io.load_dataset(args.dataset)
    stats = dataset_io.dataset_stats(docs)
    groups = metrics.group_by_rate(docs)
    print(f"documents: {stats.n_documents}")
    print(f"entities: {stats.n_entities}")
    print(f"unique entities: {stats.n_unique_entities}")
    print(f"mean words/entity: {stats.mean_words_per_entity:.4f}")
    print(f"mean entities/document: {stats.mean_entities_per_document:.4f}")
    print(f"hallucination rate: {stats.hallucination_rate:.4f}")
    print(
        "rate groups: "
        + " ".join(f"{g}={len(groups[g])}" for g in ("low", "medium", "high"))
    )
    if args.traces is None:
        return 0

    findings = 0
    by_id = {t.doc_id: t for t in dataset_io.iter_traces(args.traces)}
    for doc in docs:
        trace = by_id.get(doc.doc_id)
        if trace is None:
            print(f"{doc.doc_id}: no trace")
            findings += 1
            continue
        for violation in validate_trace(trace):
            print(f"{doc.doc_id}: {violation}")
            findings += 1
        try:
            result = align(doc, trace)
        except AlignmentError as exc:
            print(f"{doc.doc_id}: {exc}")
            findings += 1
            continue
        for warning in result.warnings:
            print(f"{doc.doc_id}: {warning}")
            findings += 1
    print(f"validation findings: {findings}")
    return 1 if findings else 0


# ------------------------------------------------------------------- score


def _score_document(
    payload: tuple[AnnotatedDocument, GenerationTrace, tuple[str, ...], float]
) -> tuple[str, dict[str, tuple], tuple[int, int], list[str]]:
    doc, trace, methods, gamma = payload
    diag = ScorerDiagnostics()
    result = align(doc, trace)
    cfg = FocusConfig(gamma=gamma)
    rows: dict[str, tuple] = {}
    for method in methods:
        token_scores = score(trace, method, cfg=cfg, diagnostics=diag)
        entity_scores = aggregate(token_scores, result)
        rows[method] = (token_scores.values, entity_scores.values, entity_scores.token_ranges)
    diag.docs_scored += 1
    return doc.doc_id, rows, (diag.ccp_fallbacks, diag.docs_scored), list(result.warnings)


def _run_pool(
    payloads: list[tuple], workers: int
) -> list[tuple[str, dict[str, tuple], tuple[int, int], list[str]]]:
    if workers == 1:
        return [_score_document(p) for p in payloads]
    results = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        pending = set()
        queue = iter(payloads)
        for payload in queue:
            pending.add(pool.submit(_score_document, payload))
            if len(pending) >= workers * 2:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                results.extend(f.result() for f in done)
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            results.extend(f.result() for f in done)
    return results


def cmd_score(args: argparse.Namespace) -> int:
    if args.method == "all":
        methods: tuple[str, ...] = METHODS
    elif args.method in METHODS:
        methods = (args.method,)
    else:
        raise UsageError(f"unknown method {args.method!r}")
    workers = _worker_count(args)
    docs = dataset_io.load_dataset(args.dataset)
    by_id = _traces_by_id(args.traces, docs)

    docs = sorted(docs, key=lambda d: d.doc_id)
    payloads = [(doc, by_id[doc.doc_id], methods, args.gamma) for doc in docs]
    results = {r[0]: r for r in _run_pool(payloads, workers)}

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    diag = ScorerDiagnostics()
    n_warnings = 0
    for doc in docs:
        _, _, (fallbacks, scored), warnings = results[doc.doc_id]
        diag.ccp_fallbacks += fallbacks
        diag.docs_scored += scored
        for warning in warnings:
            print(f"{doc.doc_id}: {warning}", file=sys.stderr)
            n_warnings += 1
    for method in methods:
        token_rows = []
        entity_rows = []
        for doc in docs:
            values, entity_values, ranges = results[doc.doc_id][1][method]
            token_rows.append(
                TokenScores(doc_id=doc.doc_id, method=method, values=values)
            )
            entity_rows.append(
                EntityScores(
                    doc_id=doc.doc_id,
                    method=method,
                    values=entity_values,
                    token_ranges=ranges,
                )
            )
        dataset_io.store_token_scores(
            token_rows, str(out_dir / f"{method}.token_scores.jsonl")
        )
        dataset_io.store_entity_scores(
            entity_rows, str(out_dir / f"{method}.entity_scores.jsonl")
        )
    print(f"scored {diag.docs_scored} documents with {len(methods)} method(s)")
    if "ccp" in methods:
        print(f"ccp fallbacks: {diag.ccp_fallbacks}")
    return 1 if n_warnings else 0


# ---------------------------------------------------------------- evaluate


def _scores_by_method(
    paths: Sequence[str], loader
) -> dict[str, dict[str, Any]]:
    """Group score records as method → doc_id → record; duplicates fault."""
    grouped: dict[str, dict[str, Any]] = {}
    for path in paths:
        for record in loader(path):
            per_doc = grouped.setdefault(record.method, {})
            if record.doc_id in per_doc:
                raise UsageError(
                    f"duplicate scores for doc {record.doc_id!r}, "
                    f"method {record.method!r}"
                )
            per_doc[record.doc_id] = record
    return grouped


def _pooled_entity_scores(
    docs: Sequence[AnnotatedDocument], per_doc: Mapping[str, EntityScores], method: str
) -> tuple[list[int], list[float]]:
    missing = sorted(d.doc_id for d in docs if d.doc_id not in per_doc)
    if missing:
        raise UsageError(
            f"method {method!r}: scores missing for doc(s): {', '.join(missing)}"
        )
    labels: list[int] = []
    values: list[float] = []
    for doc in docs:
        record = per_doc[doc.doc_id]
        if len(record.values) != len(doc.entities):
            raise UsageError(
                f"method {method!r}: doc {doc.doc_id}: {len(record.values)} "
                f"scores for {len(doc.entities)} entities"
            )
        labels.extend(int(e.is_hallucinated) for e in doc.entities)
        values.extend(record.values)
    return labels, values


def _group_entity_indices(
    docs: Sequence[AnnotatedDocument],
) -> dict[str, list[int]]:
    """Entity indices (in pooled dataset order) per rate group."""
    group_of = {
        doc_id: group
        for group, ids in metrics.group_by_rate(docs).items()
        for doc_id in ids
    }
    indices: dict[str, list[int]] = {g: [] for g in ("low", "medium", "high")}
    offset = 0
    for doc in docs:
        indices[group_of[doc.doc_id]].extend(
            range(offset, offset + len(doc.entities))
        )
        offset += len(doc.entities)
    return indices


def _report_csv(report: metrics.EvaluationReport, path: str) -> None:
    fields = (
        "auroc",
        "auprc",
        "f1_opt",
        "precision_opt",
        "recall_opt",
        "opt_threshold",
        "n_positive",
        "n_negative",
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "group", "value"])
        for name in fields:
            writer.writerow([name, "all", getattr(report, name)])
        for group in ("low", "medium", "high"):
            if group not in report.per_group:
                continue
            summary = report.per_group[group]
            for name in fields:
                value = getattr(summary, name)
                writer.writerow([name, group, "" if value is None else value])


def cmd_evaluate(args: argparse.Namespace) -> int:
    docs = dataset_io.load_dataset(args.dataset)
    grouped = _scores_by_method(args.scores, dataset_io.iter_entity_scores)
    if not grouped:
        raise UsageError("score files contain no records")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    group_indices = _group_entity_indices(docs) if args.by_rate else None
    n_warnings = 0
    for method in (m for m in METHODS if m in grouped):
        labels, values = _pooled_entity_scores(docs, grouped[method], method)
        report = metrics.evaluate(method, labels, values, group_indices)
        dataset_io.store_report(
            dataclasses.asdict(report), str(out_dir / f"{method}.report.json")
        )
        _report_csv(report, str(out_dir / f"{method}.report.csv"))
        print(
            f"{method}: AUROC={report.auroc:.4f} AUPRC={report.auprc:.4f} "
            f"F1={report.f1_opt:.4f} P={report.precision_opt:.4f} "
            f"R={report.recall_opt:.4f} threshold={report.opt_threshold:.6g}"
        )
        for warning in report.warnings:
            print(f"{method}: warning: {warning}", file=sys.stderr)
            n_warnings += 1
    return 1 if n_warnings else 0


# ----------------------------------------------------------------- analyze


def _cells_json(cells: Mapping[str, analysis.CellCounts]) -> dict[str, dict]:
    return {
        tag: {
            "tp": c.tp,
            "fp": c.fp,
            "tn": c.tn,
            "fn": c.fn,
            "fpr": c.fpr,
            "fnr": c.fnr,
        }
        for tag, c in cells.items()
    }


def _stats_json(stats: Mapping[str, analysis.TagStat] | None) -> dict[str, dict]:
    if stats is None:
        return {}
    return {
        tag: {
            "count": s.count,
            "share": s.share,
            "hallucination_rate": s.hallucination_rate,
        }
        for tag, s in stats.items()
    }


def _cells_csv(cells: Mapping[str, analysis.CellCounts], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tag", "tp", "fp", "tn", "fn", "fpr", "fnr"])
        for tag, c in cells.items():
            writer.writerow(
                [
                    tag,
                    c.tp,
                    c.fp,
                    c.tn,
                    c.fn,
                    "" if c.fpr is None else c.fpr,
                    "" if c.fnr is None else c.fnr,
                ]
            )


def _bar_chart_svg(
    title: str, rows: Sequence[tuple[str, float | None, float | None]]
) -> str:
    """Fixed-geometry grouped bar chart (FPR blue, FNR red), rates on [0, 1]."""
    left, top, plot_h, group_w, bar_w = 46, 28, 160, 56, 20
    width = left + group_w * max(len(rows), 1) + 16
    height = top + plot_h + 40
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="monospace" font-size="11">',
        f'<text x="{left}" y="16">{title}</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + plot_h - frac * plot_h
        parts.append(
            f'<line x1="{left}" y1="{y:.1f}" x2="{width - 8}" y2="{y:.1f}" '
            f'stroke="#e5e7eb"/>'
        )
        parts.append(f'<text x="4" y="{y + 4:.1f}">{frac:.2f}</text>')
    for i, (tag, fpr, fnr) in enumerate(rows):
        x0 = left + i * group_w + 6
        for j, (value, color) in enumerate(((fpr, "#2563eb"), (fnr, "#dc2626"))):
            if value is None:
                continue
            h = value * plot_h
            parts.append(
                f'<rect x="{x0 + j * bar_w}" y="{top + plot_h - h:.1f}" '
                f'width="{bar_w - 2}" height="{h:.1f}" fill="{color}"/>'
            )
        parts.append(
            f'<text x="{x0}" y="{top + plot_h + 14}">{_svg_escape(tag)}</text>'
        )
    parts.append(
        f'<text x="{left}" y="{height - 8}">FPR=blue FNR=red</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _svg_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def cmd_analyze(args: argparse.Namespace) -> int:
    breakdowns = tuple(k for k in args.breakdown.split(",") if k)
    unknown = set(breakdowns) - {"pos", "ner", "position"}
    if unknown:
        raise UsageError(f"unknown breakdown key(s): {', '.join(sorted(unknown))}")
    docs = dataset_io.load_dataset(args.dataset)
    by_id = _traces_by_id(args.traces, docs)
    grouped = _scores_by_method((args.scores,), dataset_io.iter_entity_scores)
    if len(grouped) != 1:
        raise UsageError(
            f"analysis needs exactly one method per scores file, got "
            f"{sorted(grouped)}"
        )
    (method, per_doc), = grouped.items()
    _pooled_entity_scores(docs, per_doc, method)  # coverage + count checks
    by_doc = {doc_id: rec.values for doc_id, rec in per_doc.items()}

    report = analysis.analyze_corpus(
        docs,
        by_id.values(),
        by_doc,
        threshold=args.threshold,
        breakdowns=breakdowns,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "method": method,
        "threshold": report.threshold,
        "tag_weighting": report.tag_weighting,
        "pos": _cells_json(report.pos_cells),
        "ner": _cells_json(report.ner_cells),
        "position": _cells_json(report.position_cells),
        "rate_histogram": list(report.rate_histogram or ()),
        "pos_stats": _stats_json(report.pos_stats),
        "ner_stats": _stats_json(report.ner_stats),
    }
    dataset_io.store_report(payload, str(out_dir / "analysis.json"))
    for key, cells in (
        ("pos", report.pos_cells),
        ("ner", report.ner_cells),
        ("position", report.position_cells),
    ):
        if key not in breakdowns:
            continue
        _cells_csv(cells, str(out_dir / f"{key}.csv"))
        chart_rows = [(tag, c.fpr, c.fnr) for tag, c in cells.items()]
        svg = _bar_chart_svg(f"{method}: FPR/FNR by {key}", chart_rows)
        (out_dir / f"{key}.svg").write_text(svg, encoding="utf-8")
    if args.render > 0:
        fragments = []
        for doc in docs[: args.render]:
            labels = [int(e.is_hallucinated) for e in doc.entities]
            fragments.append(
                analysis.render_samples(doc, by_doc[doc.doc_id], labels)
            )
        html_doc = (
            "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
            f"<title>{method} samples</title></head>\n<body>\n"
            + "\n".join(fragments)
            + "\n</body></html>\n"
        )
        (out_dir / "samples.html").write_text(html_doc, encoding="utf-8")
    print(f"{method}: threshold={report.threshold:.6g}")
    return 0


# --------------------------------------------------------------- correlate


def _single_method_by_doc(path: str, level: str) -> tuple[str, dict[str, tuple[float, ...]]]:
    loader = (
        dataset_io.iter_token_scores
        if level == "token"
        else dataset_io.iter_entity_scores
    )
    grouped = _scores_by_method((path,), loader)
    if len(grouped) != 1:
        raise UsageError(
            f"{path}: expected one method per file, got {sorted(grouped)}"
        )
    (method, per_doc), = grouped.items()
    return method, {doc_id: rec.values for doc_id, rec in per_doc.items()}


def cmd_correlate(args: argparse.Namespace) -> int:
    if args.level not in ("token", "entity"):
        raise UsageError(f"unknown level {args.level!r}")
    path_a, path_b = args.scores
    method_a, by_doc_a = _single_method_by_doc(path_a, args.level)
    method_b, by_doc_b = _single_method_by_doc(path_b, args.level)
    if set(by_doc_a) != set(by_doc_b):
        only_a = sorted(set(by_doc_a) - set(by_doc_b))
        only_b = sorted(set(by_doc_b) - set(by_doc_a))
        raise UsageError(
            "score files cover different doc_ids"
            + (f"; only in first: {', '.join(only_a)}" if only_a else "")
            + (f"; only in second: {', '.join(only_b)}" if only_b else "")
        )
    a: list[float] = []
    b: list[float] = []
    for doc_id in sorted(by_doc_a):
        va, vb = by_doc_a[doc_id], by_doc_b[doc_id]
        if len(va) != len(vb):
            hint = (
                " (tokenizations differ; rerun with --level entity)"
                if args.level == "token"
                else ""
            )
            raise UsageError(
                f"doc {doc_id}: {len(va)} vs {len(vb)} values{hint}"
            )
        a.extend(va)
        b.extend(vb)
    r = metrics.pearson(a, b)
    print(f"pearson r = {r:.6f} (n = {len(a)}, {method_a} vs {method_b})")
    return 0


# -------------------------------------------------------------------- main


def _build_parser(config: dict[str, Any]) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halluscore",
        description="Entity-level hallucination scoring over generation traces.",
    )
    parser.add_argument(
        "--config", help="key = value file; command-line flags override it"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check dataset (and optional traces)")
    p.add_argument("--dataset", required="dataset" not in config)
    p.add_argument("--traces")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="write token and entity scores")
    p.add_argument("--dataset", required="dataset" not in config)
    p.add_argument("--traces", required="traces" not in config)
    p.add_argument("--out", required="out" not in config)
    p.add_argument("--method", default="all", help="one of %s or all" % (METHODS,))
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="metrics report per method")
    p.add_argument("--scores", nargs="+", required="scores" not in config)
    p.add_argument("--dataset", required="dataset" not in config)
    p.add_argument("--out", required="out" not in config)
    p.add_argument("--by-rate", dest="by_rate", action="store_true", default=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="error breakdown tables and charts")
    p.add_argument("--scores", required="scores" not in config)
    p.add_argument("--dataset", required="dataset" not in config)
    p.add_argument("--traces", required="traces" not in config)
    p.add_argument("--out", required="out" not in config)
    p.add_argument("--breakdown", default="pos,ner,position")
    p.add_argument("--render", type=int, default=0, metavar="N")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("correlate", help="Pearson r between two score files")
    p.add_argument("--scores", nargs=2, required="scores" not in config)
    p.add_argument("--level", default="entity", choices=("token", "entity"))
    p.set_defaults(func=cmd_correlate)

    for action in sub.choices.values():
        action.set_defaults(
            **{k: v for k, v in config.items() if k in _dests(action)}
        )
    return parser


def _dests(parser: argparse.ArgumentParser) -> set[str]:
    return {a.dest for a in parser._actions if a.dest != "help"}


def main(argv: Sequence[str] | None = None) -> int:
    boot = argparse.ArgumentParser(add_help=False)
    boot.add_argument("--config")
    pre, _ = boot.parse_known_args(argv)
    try:
        config = load_config(pre.config) if pre.config else {}
        args = _build_parser(config).parse_args(argv)
        return args.func(args)
    except HalluscoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 — last-resort fault barrier
        print(f"internal fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
