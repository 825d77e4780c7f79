"""The corpus data model: JSONL records, chunked files, URL rules, stats.

A record carries its own provenance: the id is a fresh UUIDv4, url_warc
points at the exact archive segment the page came from, and url is the
page itself.  Text holds paragraphs joined by single newlines, so the
original paragraph structure survives serialization.
"""

from __future__ import annotations

import json
import random
import re
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence
from urllib.parse import urlsplit

from .errors import ConfigError, ValidationError
from .extract import Document
from .segments import parse_warc_url

RECORD_FIELDS = ("id", "text", "url_warc", "url")

MIN_CHUNK_BYTES = 1 << 20
DEFAULT_CHUNK_BYTES = 10 << 30


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    text: str
    url_warc: str
    url: str

    def validate(self) -> None:
        try:
            parsed = uuid.UUID(self.id)
        except ValueError as exc:
            raise ValidationError(f"id {self.id!r} is not a UUID") from exc
        if parsed.version != 4 or parsed.variant != uuid.RFC_4122:
            raise ValidationError(f"id {self.id!r} is not a version-4 RFC UUID")
        parse_warc_url(self.url_warc)
        if not self.text:
            raise ValidationError("record text is empty")
        if "\r" in self.text:
            raise ValidationError("record text contains a carriage return")
        if "\n\n" in self.text:
            raise ValidationError("record text contains consecutive newlines")

    def to_json_line(self) -> str:
        payload = {name: getattr(self, name) for name in RECORD_FIELDS}
        return json.dumps(payload, ensure_ascii=False)

    @classmethod
    def from_json_line(cls, line: str) -> "CorpusRecord":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"not valid JSON: {exc}") from exc
        if not isinstance(payload, dict) or set(payload) != set(RECORD_FIELDS):
            raise ValidationError("record line must hold exactly id, text, url_warc, url")
        if not all(isinstance(payload[name], str) for name in RECORD_FIELDS):
            raise ValidationError("record fields must all be strings")
        return cls(**payload)


def uuid4_from(rng: random.Random) -> uuid.UUID:
    """A well-formed v4 UUID drawn from a caller-owned RNG.

    Lets a pipeline derive record ids from a run seed, which keeps the
    output byte-identical across worker counts and reruns.
    """
    return uuid.UUID(int=rng.getrandbits(128), version=4)


def make_record(doc: Document, id_source: Callable[[], uuid.UUID] = uuid.uuid4) -> CorpusRecord:
    if not doc.paragraphs:
        raise ValidationError("cannot build a record from an empty document")
    record = CorpusRecord(
        id=str(id_source()),
        text="\n".join(p.text for p in doc.paragraphs),
        url_warc=doc.warc_url,
        url=doc.url,
    )
    record.validate()
    return record


def explode_paragraphs(
    records: Iterable[CorpusRecord], id_source: Callable[[], uuid.UUID] = uuid.uuid4
) -> Iterator[CorpusRecord]:
    """Re-grain a document stream into one record per paragraph."""
    for record in records:
        for paragraph in record.text.split("\n"):
            yield CorpusRecord(
                id=str(id_source()),
                text=paragraph,
                url_warc=record.url_warc,
                url=record.url,
            )


# --------------------------------------------------------------------------
# Chunked corpus files


def _chunk_name(stem: str, index: int) -> str:
    return f"{stem}-{index:05d}.jsonl"


def _write_manifest(
    dest: Path, stem: str, chunks: list[dict], chunk_bytes: int, complete: bool
) -> None:
    manifest = {
        "chunk_bytes": chunk_bytes,
        "complete": complete,
        "chunks": chunks,
        "records": sum(c["records"] for c in chunks),
        "bytes": sum(c["bytes"] for c in chunks),
    }
    (dest / f"{stem}.manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def write_chunks(
    records: Iterable[CorpusRecord],
    dest: Path,
    chunk_bytes: int = DEFAULT_CHUNK_BYTES,
    stem: str = "corpus",
) -> list[Path]:
    """Write records as JSONL chunk files of roughly chunk_bytes each.

    A new chunk starts when the current one would grow past chunk_bytes,
    so a chunk only exceeds the limit when a single record does.  A
    manifest sidecar lists the finished chunks; if an IO error aborts the
    run mid-chunk, the manifest still lists every completed chunk (with
    complete=false) so a rerun knows where it stopped.
    """
    if chunk_bytes < MIN_CHUNK_BYTES:
        raise ConfigError(f"chunk_bytes must be at least {MIN_CHUNK_BYTES}")
    dest.mkdir(parents=True, exist_ok=True)
    finished: list[dict] = []
    paths: list[Path] = []
    current = None
    current_size = 0
    current_records = 0
    index = 0

    def rotate() -> None:
        nonlocal current, current_size, current_records, index
        if current is None:
            return
        current.close()
        finished.append(
            {"file": _chunk_name(stem, index), "records": current_records, "bytes": current_size}
        )
        current = None
        current_size = 0
        current_records = 0
        index += 1

    try:
        for record in records:
            encoded = (record.to_json_line() + "\n").encode("utf-8")
            if current is not None and current_size + len(encoded) > chunk_bytes:
                rotate()
            if current is None:
                path = dest / _chunk_name(stem, index)
                paths.append(path)
                current = open(path, "wb")
            current.write(encoded)
            current_size += len(encoded)
            current_records += 1
        rotate()
    except OSError:
        if current is not None:
            try:
                current.close()
            except OSError:
                pass
        _write_manifest(dest, stem, finished, chunk_bytes, complete=False)
        raise
    _write_manifest(dest, stem, finished, chunk_bytes, complete=True)
    return [dest / c["file"] for c in finished]


def read_records(path: Path) -> Iterator[CorpusRecord]:
    """Read one JSONL chunk strictly; malformed lines are errors here.

    Tolerant counting of malformed lines lives in compute_stats, which is
    the operation meant for auditing files of unknown provenance.
    """
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                yield CorpusRecord.from_json_line(line)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc


# --------------------------------------------------------------------------
# URL rules

_HOST_PATTERN_RE = re.compile(r"^[a-z0-9]([a-z0-9\-]*[a-z0-9])?(\.[a-z0-9]([a-z0-9\-]*[a-z0-9])?)*$")


@dataclass(frozen=True)
class UrlRules:
    """Allow/deny patterns; a pattern is a host suffix or a URL prefix."""

    allow: tuple[str, ...] = ()
    deny: tuple[str, ...] = ()


def _check_pattern(pattern: str) -> str:
    if "://" in pattern:
        scheme = pattern.split("://", 1)[0]
        if scheme not in ("http", "https"):
            raise ConfigError(f"URL-prefix pattern {pattern!r} must be http(s)")
        return pattern
    host = pattern.lower().lstrip(".")
    if not host or not _HOST_PATTERN_RE.match(host):
        raise ConfigError(f"{pattern!r} is not a host suffix or URL prefix")
    return host


def load_url_rules(path: Path) -> UrlRules:
    """Parse a rules file: one `allow <pattern>` or `deny <pattern>` per line."""
    allow: list[str] = []
    deny: list[str] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        if len(parts) != 2 or parts[0] not in ("allow", "deny"):
            raise ConfigError(f"{path}:{lineno}: expected 'allow <pattern>' or 'deny <pattern>'")
        pattern = _check_pattern(parts[1].strip())
        (allow if parts[0] == "allow" else deny).append(pattern)
    return UrlRules(allow=tuple(allow), deny=tuple(deny))


def _matches(url: str, pattern: str) -> bool:
    if "://" in pattern:
        return url.startswith(pattern)
    host = urlsplit(url).hostname
    if host is None:
        return False
    host = host.lower()
    return host == pattern or host.endswith("." + pattern)


def url_passes(url: str, rules: UrlRules) -> bool:
    if any(_matches(url, p) for p in rules.deny):
        return False
    if rules.allow:
        return any(_matches(url, p) for p in rules.allow)
    return True


def filter_by_url(records: Iterable[CorpusRecord], rules: UrlRules) -> Iterator[CorpusRecord]:
    """Deny removes matches; a non-empty allow list keeps only matches;
    deny wins over allow.  Empty rules pass everything through."""
    for record in records:
        if url_passes(record.url, rules):
            yield record


# --------------------------------------------------------------------------
# Corpus statistics

_SENTENCE_END_RE = re.compile(r"[.?!…](?=\s|$)")


@dataclass(frozen=True)
class CorpusStats:
    bytes: int = 0
    documents: int = 0
    paragraphs: int = 0
    words: int = 0
    sentences: int = 0
    lines: int = 0
    malformed_lines: int = 0

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            bytes=self.bytes + other.bytes,
            documents=self.documents + other.documents,
            paragraphs=self.paragraphs + other.paragraphs,
            words=self.words + other.words,
            sentences=self.sentences + other.sentences,
            lines=self.lines + other.lines,
            malformed_lines=self.malformed_lines + other.malformed_lines,
        )

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def stats_for_text(text: str) -> CorpusStats:
    return CorpusStats(
        documents=1,
        paragraphs=text.count("\n") + 1,
        words=len(text.split()),
        sentences=len(_SENTENCE_END_RE.findall(text)),
    )


def compute_stats(chunks: Sequence[Path]) -> CorpusStats:
    """Aggregate counts over chunk files; malformed lines are counted,
    skipped, and reported through the malformed_lines field.

    Sentence counting is the documented heuristic: segments ending in
    ., ?, ! or … followed by whitespace or end of text.
    """
    total = CorpusStats()
    for path in chunks:
        per_file = CorpusStats(bytes=path.stat().st_size)
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                stripped = line.rstrip("\n")
                if not stripped:
                    continue
                per_file += CorpusStats(lines=1)
                try:
                    record = CorpusRecord.from_json_line(stripped)
                except ValidationError:
                    per_file += CorpusStats(malformed_lines=1)
                    continue
                per_file += stats_for_text(record.text)
        total += per_file
    return total


def format_stats(stats: CorpusStats) -> str:
    rows = [
        ("bytes", stats.bytes),
        ("documents", stats.documents),
        ("paragraphs", stats.paragraphs),
        ("words", stats.words),
        ("sentences", stats.sentences),
        ("lines", stats.lines),
        ("malformed lines", stats.malformed_lines),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value:>15,}" for name, value in rows)
