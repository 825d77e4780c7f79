"""End-to-end orchestration: parallel extraction, then deduplication.

Extraction runs one segment at a time per worker: download, walk the
gzip members, parse WARC records, decode each HTML response, gate on
language, extract and clean paragraphs, append records to the segment's
shard.  A finished segment leaves a done-marker beside its shard, which
is the resume unit: rerunning skips segments already marked done.

Dedup is a separate single-process phase that reads every shard in
manifest order, so its survivor choices are independent of how many
workers extraction used.
"""

from __future__ import annotations

import hashlib
import html
import json
import random
import re
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from .config import PipelineConfig
from .corpus_io import (
    CorpusRecord,
    UrlRules,
    explode_paragraphs,
    filter_by_url,
    load_url_rules,
    make_record,
    uuid4_from,
    write_chunks,
)
from .dedup import dedup_chain
from .errors import UndecodableError, ValidationError, Warc2CorpusError
from .extract import (
    CleaningPolicy,
    Document,
    charset_from_content_type,
    clean_document,
    decode_to_utf8,
    extract_paragraphs,
    sniff_meta_charset,
)
from .fetch import open_stream
from .langid import LanguageCascade, SubprocessDetector, default_stage1, default_stage2
from .manifest import JobManifest
from .report import RunReport
from .warc import StreamCounters, http_response_parts, is_html_response, stream_records

EXTRACT_REPORT = "extract_report.json"
DEDUP_REPORT = "dedup_report.json"
CLUSTERS_FILE = "clusters.jsonl"

_SCRIPTISH_RE = re.compile(r"<(script|style)\b.*?</\1\s*>", re.IGNORECASE | re.DOTALL)
_COMMENT_RE = re.compile(r"<!--.*?-->", re.DOTALL)
_TAG_RE = re.compile(r"<[^>]*>")

_GATE_PREVIEW_CHARS = 4000


def gate_text(decoded: str, limit: int = _GATE_PREVIEW_CHARS) -> str:
    """Cheap tag-stripped preview of a page for the language gate.

    Full paragraph extraction only runs on pages that pass the gate, so
    this must not depend on it.
    """
    text = _SCRIPTISH_RE.sub(" ", decoded)
    text = _COMMENT_RE.sub(" ", text)
    text = html.unescape(_TAG_RE.sub(" ", text))
    return " ".join(text.split())[:limit]


def _segment_rng(seed: int, index: int) -> random.Random:
    digest = hashlib.blake2b(f"{seed}:{index}".encode("utf-8"), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


_CASCADE_CACHE: dict[tuple, LanguageCascade] = {}


def _cascade_for(config: PipelineConfig) -> LanguageCascade:
    key = (
        config.lang_target,
        config.lang_min_confidence,
        config.lang_min_chars,
        config.stage2_command,
    )
    cascade = _CASCADE_CACHE.get(key)
    if cascade is None:
        import shlex

        from .langid import LogProbDetector, RankProfileDetector

        stage1 = RankProfileDetector(default_stage1().profiles, min_chars=config.lang_min_chars)
        if config.stage2_command:
            stage2 = SubprocessDetector(
                shlex.split(config.stage2_command), min_chars=config.lang_min_chars
            )
        else:
            stage2 = LogProbDetector(default_stage2().models, min_chars=config.lang_min_chars)
        cascade = LanguageCascade(
            stage1=stage1,
            stage2=stage2,
            target=config.lang_target,
            min_confidence=config.lang_min_confidence,
        )
        _CASCADE_CACHE[key] = cascade
    return cascade


def shard_path(out_dir: Path, index: int) -> Path:
    return out_dir / f"part-{index:05d}.jsonl"


def done_path(out_dir: Path, index: int) -> Path:
    return out_dir / f"part-{index:05d}.done"


@dataclass(frozen=True)
class SegmentResult:
    index: int
    key: str
    status: str  # done | failed | skipped
    counters: dict[str, int]
    error: str | None = None


_SEGMENT_COUNTERS = (
    "fetched",
    "responses",
    "decoded",
    "lang_accepted",
    "extracted",
    "corrupt_regions",
)


def process_segment(
    index: int, key: str, location: str, warc_url: str, config: PipelineConfig, out_dir: str
) -> SegmentResult:
    """Steps for one segment: fetch, parse, decode, gate, extract, store.

    Top-level so a process pool can pickle it.  Skips work when the
    segment's done-marker already exists.
    """
    out = Path(out_dir)
    shard = shard_path(out, index)
    done = done_path(out, index)
    if done.exists():
        try:
            counters = json.loads(done.read_text(encoding="utf-8"))["counters"]
        except (OSError, json.JSONDecodeError, KeyError):
            counters = {}
        return SegmentResult(index, key, "skipped", counters)

    counters = {name: 0 for name in _SEGMENT_COUNTERS}
    rng = _segment_rng(config.seed, index)
    policy = CleaningPolicy(min_words=config.min_words, min_alpha_ratio=config.min_alpha_ratio)
    cascade = _cascade_for(config)
    stream_counters = StreamCounters()
    tmp = shard.with_suffix(".jsonl.tmp")

    try:
        with open_stream(location) as source, open(tmp, "w", encoding="utf-8") as sink:
            for record in stream_records(source, counters=stream_counters):
                counters["fetched"] += 1
                if not is_html_response(record):
                    continue
                counters["responses"] += 1
                try:
                    _, headers, body = http_response_parts(record)
                except Warc2CorpusError:
                    continue
                hints = [
                    charset_from_content_type(headers.get("content-type")),
                    sniff_meta_charset(body),
                ]
                try:
                    decoded, _ = decode_to_utf8(body, hints)
                except UndecodableError:
                    continue
                counters["decoded"] += 1
                if not cascade.accepts(gate_text(decoded)):
                    continue
                counters["lang_accepted"] += 1
                paragraphs = extract_paragraphs(decoded)
                if not paragraphs:
                    continue
                doc = Document(
                    url=record.target_uri or "",
                    warc_url=warc_url,
                    paragraphs=tuple(paragraphs),
                    encoding_used="utf-8",
                )
                cleaned = clean_document(doc, policy)
                if cleaned is None:
                    continue
                counters["extracted"] += 1
                corpus_record = make_record(cleaned, id_source=lambda: uuid4_from(rng))
                sink.write(corpus_record.to_json_line() + "\n")
        counters["corrupt_regions"] = stream_counters.corrupt_regions
        tmp.replace(shard)
        done.write_text(
            json.dumps({"segment": key, "index": index, "counters": counters}, indent=2) + "\n",
            encoding="utf-8",
        )
        return SegmentResult(index, key, "done", counters)
    except Exception as exc:  # segment failure must not sink the run
        tmp.unlink(missing_ok=True)
        return SegmentResult(index, key, "failed", counters, error=f"{type(exc).__name__}: {exc}")


def run_extract(
    manifest: JobManifest,
    config: PipelineConfig,
    out_dir: Path,
    max_segments: int | None = None,
) -> RunReport:
    """Extract every manifest segment into per-segment JSONL shards."""
    from .segments import canonical_warc_url

    out_dir.mkdir(parents=True, exist_ok=True)
    segments = list(enumerate(manifest.segments))
    if max_segments is not None:
        segments = segments[:max_segments]

    started = time.monotonic()
    results: list[SegmentResult] = []
    if config.workers == 1:
        for index, segment in segments:
            results.append(
                process_segment(
                    index,
                    segment.key,
                    manifest.location_of(segment),
                    canonical_warc_url(segment),
                    config,
                    str(out_dir),
                )
            )
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [
                pool.submit(
                    process_segment,
                    index,
                    segment.key,
                    manifest.location_of(segment),
                    canonical_warc_url(segment),
                    config,
                    str(out_dir),
                )
                for index, segment in segments
            ]
            for future in as_completed(futures):
                results.append(future.result())

    report = RunReport()
    for result in sorted(results, key=lambda r: r.index):
        report.mark_segment(result.key, "done" if result.status == "skipped" else result.status)
        for name, value in result.counters.items():
            report.bump(name, value)
        if result.error:
            report.counters.setdefault("failed_segments", 0)
            report.counters["failed_segments"] += 1
    report.phase_seconds["extract"] = time.monotonic() - started
    report.save(out_dir / EXTRACT_REPORT)
    return report


def _iter_shard_lines(path: Path, report: RunReport):
    """Tolerant shard reader: malformed lines are counted and skipped."""
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                yield CorpusRecord.from_json_line(line)
            except ValidationError:
                report.bump("malformed_lines")


def run_dedup(in_dir: Path, out_dir: Path, config: PipelineConfig) -> RunReport:
    """Read shards in manifest order, apply URL rules and the dedup
    chain, write final chunks plus the clusters sidecar."""
    report = RunReport()
    started = time.monotonic()
    out_dir.mkdir(parents=True, exist_ok=True)

    shards = sorted(in_dir.glob("part-*.jsonl"))
    records: list[CorpusRecord] = []
    for shard in shards:
        records.extend(_iter_shard_lines(shard, report))
    report.counters["read"] = len(records)

    rules = load_url_rules(Path(config.url_rules)) if config.url_rules else UrlRules()
    kept = list(filter_by_url(records, rules))
    report.counters["url_filtered_out"] = len(records) - len(kept)

    survivors, clusters, counts = dedup_chain(kept, config.lsh_params(), config.seed)
    report.counters["exact_documents_removed"] = counts.exact_documents_removed
    report.counters["after_exact_documents"] = len(kept) - counts.exact_documents_removed
    report.counters["paragraphs_removed"] = counts.paragraphs_removed
    report.counters["documents_emptied"] = counts.documents_emptied
    report.counters["after_exact_paragraphs"] = (
        report.counters["after_exact_documents"] - counts.documents_emptied
    )
    report.counters["near_duplicates_removed"] = counts.near_duplicates_removed
    report.counters["after_lsh"] = len(survivors)

    if config.record_granularity == "paragraph":
        rng = _segment_rng(config.seed, -1)
        final: list[CorpusRecord] = list(
            explode_paragraphs(survivors, id_source=lambda: uuid4_from(rng))
        )
    else:
        final = survivors
    write_chunks(final, out_dir, config.chunk_bytes)
    report.counters["written"] = len(final)

    with open(out_dir / CLUSTERS_FILE, "w", encoding="utf-8") as sink:
        for cluster in clusters:
            sink.write(
                json.dumps(
                    {
                        "kept_id": cluster.kept_id,
                        "removed_ids": list(cluster.removed_ids),
                        "similarities": list(cluster.similarities),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )

    report.phase_seconds["dedup"] = time.monotonic() - started
    if config.record_granularity == "document":
        report.check_monotone()
    report.save(out_dir / DEDUP_REPORT)
    return report
