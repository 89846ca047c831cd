"""Command-line entry point: ``paperdiag <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .assemble import compute_stats, format_stats, load_samples
from .errors import PaperDiagError
from .ingest import (
    DEFAULT_INDEX_URL, IndexFilters, fetch_paper_index, ingest, read_ids_file,
)
from .metrics import evaluate_corpus, parse_metrics
from .pipeline import STAGES, Pipeline, PipelineConfig, default_llm_client

log = logging.getLogger("paperdiag")


def _add_pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON pipeline config")
    p.add_argument("--corpus", dest="corpus_dir", help="corpus directory (manifest or one folder per paper)")
    p.add_argument("--out", dest="out_dir", help="build directory for checkpoints and the dataset")
    p.add_argument("--seed", type=int)
    p.add_argument("--ratios", dest="split_ratios", help="train,val,test split ratios, e.g. 0.96,0.02,0.02")
    p.add_argument("--workers", type=int)
    p.add_argument("--context-cap", dest="context_cap", type=int)
    p.add_argument("--outline-free-variants", dest="flags.outline_free_variants", action="store_const", const=True)
    p.add_argument("--outline-rec-rate", dest="flags.outline_rec_rate", type=float)
    p.add_argument("--dpi", dest="render.dpi", type=int)
    p.add_argument("--latex-cmd", dest="render.latex_cmd")
    p.add_argument("--llm-model", dest="llm.model")
    p.add_argument("--llm-cache", dest="llm.cache_dir")


_OVERRIDE_KEYS = ("corpus_dir", "out_dir", "seed", "split_ratios", "workers", "context_cap",
                  "flags.outline_free_variants", "flags.outline_rec_rate", "render.dpi", "render.latex_cmd",
                  "llm.model", "llm.cache_dir")


def _config(args) -> PipelineConfig:
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    return PipelineConfig.load(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paperdiag", description="Build diagram-centric paper datasets "
                                     "from LaTeX sources and score model outputs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="fetch ids and download LaTeX sources")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ids-file", help="text file with one arXiv id per line")
    src.add_argument("--fetch-index", action="store_true", help="query the paper index service")
    p.add_argument("--from-year", type=int)
    p.add_argument("--to-year", type=int)
    p.add_argument("--category", action="append", default=[])
    p.add_argument("--index-url", default=None)
    p.add_argument("--archive-url-template", default=None)
    p.add_argument("--out", required=True, help="corpus directory")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--min-interval", type=float, default=1.0, help="seconds between requests per host")

    for name, help_text in (
        ("parse", "parse LaTeX sources into document models"),
        ("align", "align diagrams with referencing paragraphs"),
        ("render-tables", "render table images"),
        ("build-outlines", "generate outlines with the LLM"),
        ("assemble", "assemble task samples and splits"),
    ):
        _add_pipeline_args(sub.add_parser(name, help=help_text))

    p = sub.add_parser("stats", help="dataset statistics")
    _add_pipeline_args(p)
    p.add_argument("--dataset", help="dataset directory (skips the pipeline)")
    p.add_argument("--json", action="store_true", help="print the JSON report")

    p = sub.add_parser("run", help="run several stages in order")
    _add_pipeline_args(p)
    p.add_argument("stages", help=f"comma-separated stages or 'all' ({','.join(STAGES)})")

    p = sub.add_parser("evaluate", help="score predictions against a dataset split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--pred", required=True)
    p.add_argument("--metrics", default="b4,rouge,meteor,cider")
    p.add_argument("--tasks", default=None, help="comma-separated tasks (default: inferred from predictions)")
    p.add_argument("--out", required=True)
    p.add_argument("--judge-cache", default=None)
    return parser


def _print_summaries(summaries) -> None:
    for s in summaries:
        print(s.line())


def _cmd_ingest(args) -> int:
    if args.ids_file:
        ids = read_ids_file(args.ids_file)
    else:
        year_range = None
        if args.from_year is not None or args.to_year is not None:
            year_range = (args.from_year if args.from_year is not None else 0,
                          args.to_year if args.to_year is not None else 9999)
        filters = IndexFilters(year_range, frozenset(args.category) or None)
        url = args.index_url or os.environ.get("INDEX_URL") or DEFAULT_INDEX_URL
        ids = fetch_paper_index(url, filters)
    manifest = ingest(ids, args.out, args.archive_url_template, workers=args.workers, min_interval=args.min_interval)
    counts: dict[str, int] = {}
    for e in manifest.entries:
        counts[e.status] = counts.get(e.status, 0) + 1
    print(f"ingest: {len(ids)} ids; " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 0


def _cmd_stats(args) -> int:
    if args.dataset:
        report = compute_stats(load_samples(args.dataset))
        out = Path(args.dataset) / "stats.json"
        out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(json.dumps(report, indent=2, sort_keys=True) if args.json else format_stats(report))
        return 0
    pipeline = Pipeline(_config(args))
    status, summaries = pipeline.run(["stats"])
    _print_summaries(summaries)
    if status == 0:
        print((pipeline.out_dir / "stats.txt").read_text(encoding="utf-8"), end="")
    return status


def _cmd_evaluate(args) -> int:
    metrics = parse_metrics(args.metrics)
    client = None
    if "f1gpt" in metrics:
        config = PipelineConfig(out_dir=str(Path(args.out).parent))
        config.llm.cache_dir = args.judge_cache
        client = default_llm_client(config)
    tasks = args.tasks.split(",") if args.tasks else None
    report = evaluate_corpus(args.pred, args.dataset, metrics, client, args.split, tasks)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    scaled = report["corpus"]["scaled"]
    shown = ", ".join(f"{k}={v:.3f}" for k, v in scaled.items() if v is not None)
    print(f"evaluate: {report['n_samples']} samples; {shown}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "stats":
            return _cmd_stats(args)
        if args.command == "run":
            stages = list(STAGES) if args.stages == "all" else [s.strip() for s in args.stages.split(",") if s.strip()]
        else:
            stages = [args.command]
        pipeline = Pipeline(_config(args))
        status, summaries = pipeline.run(stages)
        _print_summaries(summaries)
        return status
    except (PaperDiagError, ValueError, OSError) as exc:
        code = getattr(exc, "code", "E_ERROR")
        print(f"error [{code}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
