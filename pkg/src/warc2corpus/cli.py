"""Command-line entry points for building and auditing a corpus."""

from __future__ import annotations

import argparse
import dataclasses
import gzip
import io
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .corpus_io import (
    compute_stats,
    filter_by_url,
    format_stats,
    load_url_rules,
    read_records,
)
from .errors import ConfigError, ValidationError, Warc2CorpusError
from .fetch import open_stream
from .manifest import (
    load_manifest,
    parse_paths_listing,
    read_paths_file,
    save_manifest,
    shuffle_manifest,
)
from .pipeline import CLUSTERS_FILE, run_dedup, run_extract

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warc2corpus",
        description="Curate a clean monolingual JSONL corpus from WARC archives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("manifest", help="build a shuffled segment manifest")
    p.add_argument("--crawl", help="crawl id, e.g. CC-MAIN-2019-04")
    p.add_argument("--paths-file", type=Path, help="local warc.paths(.gz) listing")
    p.add_argument("--limit", type=int, default=None, help="keep only the first N segments")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("--out", type=Path, default=Path("manifest.json"))

    p = sub.add_parser("extract", help="run parallel per-segment extraction")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--workers", type=int, default=None, help="override config workers")
    p.add_argument("--max-segments", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("dedup", help="deduplicate extracted shards into final chunks")
    p.add_argument("--in", dest="in_dir", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--threshold", type=float, default=None, help="override jaccard threshold")
    p.add_argument("--seed", type=int, default=None, help="override hashing seed")

    p = sub.add_parser("stats", help="corpus statistics over JSONL chunks")
    p.add_argument("--in", dest="in_path", type=Path, required=True, help="chunk file or directory")
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")

    p = sub.add_parser("filter", help="apply URL allow/deny rules to a JSONL file")
    p.add_argument("--rules", type=Path, required=True)
    p.add_argument("--in", dest="in_path", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    return parser


def _cmd_manifest(args: argparse.Namespace) -> int:
    if args.paths_file is not None:
        refs = read_paths_file(args.paths_file)
        if args.crawl:
            refs = [r for r in refs if r.crawl_id == args.crawl]
    else:
        if not args.crawl:
            raise ConfigError("either --crawl or --paths-file is required")
        listing = f"s3://commoncrawl/crawl-data/{args.crawl}/warc.paths.gz"
        with open_stream(listing) as raw:
            with gzip.open(raw, "rb") as unzipped:
                text = io.TextIOWrapper(unzipped, encoding="utf-8")
                refs = parse_paths_listing(text)
    if args.limit is not None:
        refs = refs[: args.limit]
    manifest = shuffle_manifest(refs, args.seed)
    save_manifest(manifest, args.out)
    print(f"{len(manifest.segments)} segments -> {args.out}")
    return EXIT_OK


def _cmd_extract(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        config = dataclasses.replace(config, workers=args.workers)
    manifest = load_manifest(args.manifest)
    report = run_extract(manifest, config, args.out, max_segments=args.max_segments)
    failed = sum(1 for status in report.segments.values() if status == "failed")
    done = sum(1 for status in report.segments.values() if status == "done")
    print(f"segments done: {done}, failed: {failed}")
    print(f"records extracted: {report.counters.get('extracted', 0)}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _cmd_dedup(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    overrides = {}
    if args.threshold is not None:
        overrides["jaccard_threshold"] = args.threshold
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = dataclasses.replace(config, **overrides)
    report = run_dedup(args.in_dir, args.out, config)
    for name in ("read", "after_exact_documents", "after_exact_paragraphs", "after_lsh", "written"):
        print(f"{name}: {report.counters.get(name, 0)}")
    return EXIT_OK


def _chunk_files(path: Path) -> list[Path]:
    if path.is_dir():
        # corpus chunks only; the clusters sidecar is not corpus data
        return sorted(p for p in path.glob("*.jsonl") if p.name != CLUSTERS_FILE)
    return [path]


def _cmd_stats(args: argparse.Namespace) -> int:
    stats = compute_stats(_chunk_files(args.in_path))
    print(stats.to_json() if args.json else format_stats(stats))
    return EXIT_OK


def _cmd_filter(args: argparse.Namespace) -> int:
    rules = load_url_rules(args.rules)
    kept = 0
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as sink:
        for record in filter_by_url(read_records(args.in_path), rules):
            sink.write(record.to_json_line() + "\n")
            kept += 1
    print(f"kept {kept} records -> {args.out}")
    return EXIT_OK


_COMMANDS = {
    "manifest": _cmd_manifest,
    "extract": _cmd_extract,
    "dedup": _cmd_dedup,
    "stats": _cmd_stats,
    "filter": _cmd_filter,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Warc2CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
