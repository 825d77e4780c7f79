"""Common Crawl segment references and their canonical s3 naming."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ValidationError

CRAWL_ID_RE = re.compile(r"^CC-MAIN-\d{4}-\d{2}$")

_CANONICAL_RE = re.compile(
    r"^s3://commoncrawl/crawl-data/(?P<crawl_id>CC-MAIN-\d{4}-\d{2})"
    r"/segments/(?P<segment_id>[^/]+)/warc/(?P<file_name>[^/]+)$"
)


@dataclass(frozen=True)
class WarcSegmentRef:
    """One WARC file within a Common Crawl monthly folder."""

    crawl_id: str
    segment_id: str
    file_name: str

    def __post_init__(self) -> None:
        if not CRAWL_ID_RE.match(self.crawl_id):
            raise ValidationError(f"crawl_id {self.crawl_id!r} does not match CC-MAIN-<YYYY>-<WW>")
        if not self.segment_id or "/" in self.segment_id:
            raise ValidationError(f"bad segment_id {self.segment_id!r}")
        if not self.file_name or "/" in self.file_name:
            raise ValidationError(f"bad file_name {self.file_name!r}")

    @property
    def key(self) -> str:
        """Stable identifier used for shard names and duplicate checks."""
        return f"{self.crawl_id}/{self.segment_id}/{self.file_name}"


def canonical_warc_url(ref: WarcSegmentRef) -> str:
    """Render the canonical s3 location of a segment's WARC file."""
    return (
        f"s3://commoncrawl/crawl-data/{ref.crawl_id}"
        f"/segments/{ref.segment_id}/warc/{ref.file_name}"
    )


def parse_warc_url(url: str) -> WarcSegmentRef:
    """Inverse of canonical_warc_url; raises ValidationError on anything else."""
    m = _CANONICAL_RE.match(url)
    if m is None:
        raise ValidationError(f"not a canonical segment URL: {url!r}")
    return WarcSegmentRef(m.group("crawl_id"), m.group("segment_id"), m.group("file_name"))


def ref_from_crawl_path(path: str) -> WarcSegmentRef:
    """Build a ref from an official listing line such as
    "crawl-data/CC-MAIN-2019-04/segments/<id>/warc/<file>.warc.gz"."""
    return parse_warc_url("s3://commoncrawl/" + path.strip().lstrip("/"))
