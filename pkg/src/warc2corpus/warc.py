"""Streaming reader for gzip-compressed WARC files.

Reads multi-member gzip streams member by member, parses WARC/1.x record
framing out of the decompressed bytes, and yields records lazily.  Memory
is bounded by the largest single record, never the file size.  Damage is
never fatal: a corrupt gzip member, a truncated tail or a malformed header
block skips forward to the next recognizable boundary and increments a
counter instead of aborting the segment.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Iterable, Iterator

GZIP_MAGIC = b"\x1f\x8b\x08"

# Header blocks larger than this are treated as garbage, not buffered forever.
MAX_HEADER_BYTES = 64 * 1024

_CHUNK_SIZE = 64 * 1024


class RecordType(str, Enum):
    REQUEST = "request"
    RESPONSE = "response"
    METADATA = "metadata"
    WARCINFO = "warcinfo"
    OTHER = "other"

    @classmethod
    def from_header(cls, value: str | None) -> "RecordType":
        try:
            return cls((value or "").strip().lower())
        except ValueError:
            return cls.OTHER


@dataclass
class StreamCounters:
    """Accounting for every record boundary seen by stream_records."""

    yielded: int = 0
    filtered: int = 0
    corrupt_regions: int = 0


@dataclass(frozen=True)
class RawWarcRecord:
    """One WARC record, header block plus verbatim payload.

    byte_offset is the offset, within the compressed stream, of the gzip
    member in which the record starts (for Common Crawl files, which hold
    one record per member, this addresses the record itself).
    """

    record_type: RecordType
    target_uri: str | None
    warc_headers: dict[str, str]
    http_status: int | None
    content_type: str | None
    payload: bytes
    byte_offset: int

    def header(self, name: str) -> str | None:
        """Case-insensitive WARC header lookup."""
        lower = name.lower()
        for key, value in self.warc_headers.items():
            if key.lower() == lower:
                return value
        return None


@dataclass
class _HttpHead:
    status: int | None = None
    headers: dict[str, str] = field(default_factory=dict)
    body_start: int = 0


def _parse_http_head(payload: bytes) -> _HttpHead | None:
    """Parse the status line and headers of an HTTP message payload."""
    if not payload.startswith(b"HTTP/"):
        return None
    end = payload.find(b"\r\n\r\n")
    if end == -1:
        end = len(payload)
        body_start = end
    else:
        body_start = end + 4
    head = _HttpHead(body_start=body_start)
    lines = payload[:end].split(b"\r\n")
    parts = lines[0].split(None, 2)
    if len(parts) >= 2 and parts[1].isdigit():
        head.status = int(parts[1])
    for raw in lines[1:]:
        name, sep, value = raw.partition(b":")
        if not sep:
            continue
        key = name.decode("latin-1").strip().lower()
        head.headers[key] = value.decode("latin-1").strip()
    return head


def http_response_parts(record: RawWarcRecord) -> tuple[int | None, dict[str, str], bytes]:
    """Split a response record's payload into (status, http headers, body).

    Bodies declaring Content-Encoding gzip/deflate are decompressed; if
    that fails the raw bytes are returned unchanged.
    """
    head = _parse_http_head(record.payload)
    if head is None:
        return None, {}, record.payload
    body = record.payload[head.body_start:]
    if head.headers.get("transfer-encoding", "").lower().find("chunked") != -1:
        body = _dechunk(body)
    encoding = head.headers.get("content-encoding", "").lower()
    if encoding in ("gzip", "x-gzip"):
        try:
            body = zlib.decompress(body, wbits=16 + zlib.MAX_WBITS)
        except zlib.error:
            pass
    elif encoding == "deflate":
        try:
            body = zlib.decompress(body)
        except zlib.error:
            try:
                body = zlib.decompress(body, wbits=-zlib.MAX_WBITS)
            except zlib.error:
                pass
    return head.status, head.headers, body


def _dechunk(body: bytes) -> bytes:
    """Undo HTTP chunked transfer encoding; returns input on any confusion."""
    out = bytearray()
    pos = 0
    try:
        while True:
            eol = body.index(b"\r\n", pos)
            size = int(body[pos:eol].split(b";")[0], 16)
            if size == 0:
                break
            start = eol + 2
            out += body[start:start + size]
            pos = start + size + 2
    except (ValueError, IndexError):
        return body
    return bytes(out)


def is_html_response(record: RawWarcRecord) -> bool:
    """The downstream page filter: response, HTTP 200, HTML content type."""
    return (
        record.record_type is RecordType.RESPONSE
        and record.http_status == 200
        and record.content_type is not None
        and "html" in record.content_type.lower()
    )


def _iter_member_chunks(
    source: BinaryIO, counters: StreamCounters
) -> Iterator[tuple[bytes | None, int]]:
    """Decompress a multi-member gzip stream.

    Yields (data, member_offset) pieces; (None, offset) signals a reset,
    meaning the bytes before it came from a region that turned out to be
    damaged and any partially assembled record must be discarded.
    """
    buf = b""
    pos = 0  # absolute compressed offset of buf[0]
    eof = False
    decomp = None
    member_off = 0
    resync = False

    def refill() -> None:
        nonlocal buf, eof
        chunk = source.read(_CHUNK_SIZE)
        if chunk:
            buf += chunk
        else:
            eof = True

    while True:
        if decomp is None:
            # Hunt for the start of the next member.
            while len(buf) < len(GZIP_MAGIC) and not eof:
                refill()
            if not buf:
                return
            if not buf.startswith(GZIP_MAGIC):
                idx = buf.find(GZIP_MAGIC, 1)
                if idx == -1:
                    if not resync:
                        counters.corrupt_regions += 1
                        resync = True
                        yield None, pos
                    if eof:
                        return
                    pos += len(buf) - 2
                    buf = buf[-2:]
                    refill()
                    continue
                if not resync:
                    counters.corrupt_regions += 1
                    resync = True
                    yield None, pos
                pos += idx
                buf = buf[idx:]
            decomp = zlib.decompressobj(16 + zlib.MAX_WBITS)
            member_off = pos
            continue

        if not buf:
            if eof:
                # Truncated final member.
                if not resync:
                    counters.corrupt_regions += 1
                yield None, member_off
                return
            refill()
            continue

        try:
            data = decomp.decompress(buf)
        except zlib.error:
            if not resync:
                counters.corrupt_regions += 1
                resync = True
            yield None, member_off
            # Keep buf: the next member's magic may already be inside it.
            # But step past a leading magic first; it belongs to the member
            # that just failed, and re-entering it would never terminate.
            if buf.startswith(GZIP_MAGIC):
                pos += 1
                buf = buf[1:]
            decomp = None
            continue

        if decomp.eof:
            leftover = decomp.unused_data
            pos += len(buf) - len(leftover)
            buf = leftover
            decomp = None
            resync = False
        else:
            pos += len(buf)
            buf = b""
        if data:
            yield data, member_off


def _parse_record(buf: bytearray, member_off: int) -> tuple[RawWarcRecord | None, int, bool]:
    """Try to parse one record from the front of buf.

    Returns (record, bytes_consumed, malformed). record None with
    consumed 0 means more data is needed (unless malformed is set, in
    which case the caller should resync).
    """
    end = buf.find(b"\r\n\r\n", 0, MAX_HEADER_BYTES + 4)
    if end == -1:
        if len(buf) > MAX_HEADER_BYTES:
            return None, 0, True
        return None, 0, False

    block = bytes(buf[:end])
    lines = block.split(b"\r\n")
    if not lines[0].startswith(b"WARC/"):
        return None, 0, True

    headers: dict[str, str] = {}
    last_key: str | None = None
    for raw in lines[1:]:
        if raw[:1] in (b" ", b"\t") and last_key is not None:
            headers[last_key] += " " + raw.decode("utf-8", "replace").strip()
            continue
        name, sep, value = raw.partition(b":")
        if not sep:
            return None, 0, True
        last_key = name.decode("utf-8", "replace").strip()
        headers[last_key] = value.decode("utf-8", "replace").strip()

    length_text = next(
        (v for k, v in headers.items() if k.lower() == "content-length"), None
    )
    if length_text is None or not length_text.isdigit():
        return None, 0, True
    length = int(length_text)

    payload_start = end + 4
    if len(buf) < payload_start + length:
        return None, 0, False
    payload = bytes(buf[payload_start:payload_start + length])

    record_type = RecordType.from_header(
        next((v for k, v in headers.items() if k.lower() == "warc-type"), None)
    )
    target_uri = next(
        (v for k, v in headers.items() if k.lower() == "warc-target-uri"), None
    )
    if target_uri is not None:
        target_uri = target_uri.strip("<>")

    http_status = None
    content_type = None
    warc_content_type = next(
        (v for k, v in headers.items() if k.lower() == "content-type"), ""
    )
    if warc_content_type.lower().startswith("application/http"):
        head = _parse_http_head(payload)
        if head is not None:
            http_status = head.status
            content_type = head.headers.get("content-type")

    consumed = payload_start + length
    # Swallow the record separator (and be lenient about extra blank lines).
    while buf[consumed:consumed + 2] == b"\r\n":
        consumed += 2

    record = RawWarcRecord(
        record_type=record_type,
        target_uri=target_uri,
        warc_headers=headers,
        http_status=http_status,
        content_type=content_type,
        payload=payload,
        byte_offset=member_off,
    )
    return record, consumed, False


def stream_records(
    source: BinaryIO,
    record_types: Iterable[RecordType | str] | None = None,
    counters: StreamCounters | None = None,
) -> Iterator[RawWarcRecord]:
    """Yield WARC records from a gzip-compressed stream, in file order.

    record_types, when given, keeps only those types (others are counted
    as filtered).  counters, when given, receives the skip accounting
    that later surfaces in the run report.
    """
    if counters is None:
        counters = StreamCounters()
    wanted = None
    if record_types is not None:
        wanted = {RecordType(t) if not isinstance(t, RecordType) else t for t in record_types}

    buf = bytearray()
    buf_member_off = 0
    parsing_garbage = False

    def emit_from_buf() -> Iterator[RawWarcRecord]:
        nonlocal buf, parsing_garbage
        while True:
            record, consumed, malformed = _parse_record(buf, buf_member_off)
            if malformed:
                # Resync to the next plausible record start.
                idx = buf.find(b"\r\nWARC/", 1)
                if not parsing_garbage:
                    counters.corrupt_regions += 1
                    parsing_garbage = True
                if idx == -1:
                    # All garbage except a small overlap for a split marker.
                    if len(buf) > 8:
                        del buf[:-8]
                    return
                del buf[:idx + 2]
                continue
            if record is None:
                return
            parsing_garbage = False
            del buf[:consumed]
            if wanted is not None and record.record_type not in wanted:
                counters.filtered += 1
                continue
            counters.yielded += 1
            yield record

    for data, member_off in _iter_member_chunks(source, counters):
        if data is None:
            # Damaged region: whatever is pending cannot be trusted.
            buf.clear()
            parsing_garbage = False
            continue
        if not buf:
            buf_member_off = member_off
        elif member_off != buf_member_off:
            # A fresh gzip member is a record boundary in Common Crawl
            # files; a record still pending from the previous member was
            # cut short there and must not bleed into this one.
            if not parsing_garbage and bytes(buf).strip(b"\r\n"):
                counters.corrupt_regions += 1
            buf.clear()
            parsing_garbage = False
            buf_member_off = member_off
        buf.extend(data)
        yield from emit_from_buf()

    if buf.strip(b"\r\n"):
        # Healthy gzip but a record was cut off mid-payload.
        counters.corrupt_regions += 1
