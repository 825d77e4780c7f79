"""Run reports: per-segment status, per-stage counters, phase timings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError

# Stage order for the document-record flow.  Counters must be monotone
# non-increasing along this chain (at document granularity).
STAGE_ORDER = (
    "fetched",
    "responses",
    "decoded",
    "lang_accepted",
    "extracted",
    "after_exact_documents",
    "after_exact_paragraphs",
    "after_lsh",
    "written",
)

SEGMENT_STATUSES = ("done", "failed", "skipped")


@dataclass
class RunReport:
    segments: dict[str, str] = field(default_factory=dict)  # key -> status
    counters: dict[str, int] = field(default_factory=dict)
    phase_seconds: dict[str, float] = field(default_factory=dict)

    def mark_segment(self, key: str, status: str) -> None:
        if status not in SEGMENT_STATUSES:
            raise ValidationError(f"unknown segment status {status!r}")
        self.segments[key] = status

    def bump(self, counter: str, amount: int = 1) -> None:
        self.counters[counter] = self.counters.get(counter, 0) + amount

    def check_monotone(self) -> None:
        """Enforce the conservation shape of the stage chain."""
        present = [s for s in STAGE_ORDER if s in self.counters]
        for earlier, later in zip(present, present[1:]):
            if self.counters[earlier] < self.counters[later]:
                raise ValidationError(
                    f"counter {later} ({self.counters[later]}) exceeds "
                    f"{earlier} ({self.counters[earlier]})"
                )

    def save(self, path: Path) -> None:
        payload = {
            "segments": self.segments,
            "counters": self.counters,
            "phase_seconds": self.phase_seconds,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "RunReport":
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            return cls(
                segments=dict(payload["segments"]),
                counters={k: int(v) for k, v in payload["counters"].items()},
                phase_seconds={k: float(v) for k, v in payload["phase_seconds"].items()},
            )
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"cannot load report {path}: {exc}") from exc

    def merged_with(self, other: "RunReport") -> "RunReport":
        merged = RunReport(
            segments={**self.segments, **other.segments},
            counters=dict(self.counters),
            phase_seconds=dict(self.phase_seconds),
        )
        for key, value in other.counters.items():
            merged.counters[key] = merged.counters.get(key, 0) + value
        for key, value in other.phase_seconds.items():
            merged.phase_seconds[key] = merged.phase_seconds.get(key, 0.0) + value
        return merged
