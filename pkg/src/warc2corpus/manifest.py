"""Job manifests: the ordered segment list a run commits to.

Manifest order is load-bearing: it is the canonical processing order
used for every dedup tie-break, so two runs with the same manifest and
seed produce the same corpus no matter how many workers they use.
"""

from __future__ import annotations

import gzip
import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ValidationError
from .segments import WarcSegmentRef, canonical_warc_url, ref_from_crawl_path


@dataclass(frozen=True)
class JobManifest:
    segments: tuple[WarcSegmentRef, ...]
    shuffle_seed: int
    created_at: str
    # Optional per-segment source override (local file or mirror URL),
    # keyed by segment key; used for fixtures and private mirrors.
    locations: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        keys = [s.key for s in self.segments]
        if len(set(keys)) != len(keys):
            raise ValidationError("manifest contains duplicate segments")
        unknown = set(self.locations) - set(keys)
        if unknown:
            raise ValidationError(f"locations for segments not in manifest: {sorted(unknown)}")

    def location_of(self, segment: WarcSegmentRef) -> str:
        return self.locations.get(segment.key, canonical_warc_url(segment))


def shuffle_manifest(
    segments: Sequence[WarcSegmentRef],
    seed: int,
    locations: dict[str, str] | None = None,
) -> JobManifest:
    """Deterministic seeded permutation of a duplicate-free segment list."""
    if not segments:
        raise ValidationError("cannot build a manifest from zero segments")
    if len({s.key for s in segments}) != len(segments):
        raise ValidationError("segment list contains duplicates")
    order = list(segments)
    random.Random(seed).shuffle(order)
    return JobManifest(
        segments=tuple(order),
        shuffle_seed=seed,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        locations=dict(locations or {}),
    )


def save_manifest(manifest: JobManifest, path: Path) -> None:
    payload = {
        "shuffle_seed": manifest.shuffle_seed,
        "created_at": manifest.created_at,
        "segments": [
            {
                "crawl_id": s.crawl_id,
                "segment_id": s.segment_id,
                "file_name": s.file_name,
                **(
                    {"location": manifest.locations[s.key]}
                    if s.key in manifest.locations
                    else {}
                ),
            }
            for s in manifest.segments
        ],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_manifest(path: Path) -> JobManifest:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from exc
    try:
        segments = []
        locations: dict[str, str] = {}
        for entry in payload["segments"]:
            ref = WarcSegmentRef(entry["crawl_id"], entry["segment_id"], entry["file_name"])
            segments.append(ref)
            if "location" in entry:
                locations[ref.key] = entry["location"]
        return JobManifest(
            segments=tuple(segments),
            shuffle_seed=int(payload["shuffle_seed"]),
            created_at=str(payload["created_at"]),
            locations=locations,
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"manifest {path} is missing fields: {exc}") from exc


def parse_paths_listing(lines: Iterable[str]) -> list[WarcSegmentRef]:
    """Parse a crawl's warc.paths listing (one crawl-data path per line)."""
    refs = []
    for line in lines:
        line = line.strip()
        if line:
            refs.append(ref_from_crawl_path(line))
    return refs


def read_paths_file(path: Path) -> list[WarcSegmentRef]:
    """Read a warc.paths or warc.paths.gz listing from disk."""
    if path.suffix == ".gz":
        with gzip.open(path, "rt", encoding="utf-8") as handle:
            return parse_paths_listing(handle)
    return parse_paths_listing(path.read_text(encoding="utf-8").splitlines())
