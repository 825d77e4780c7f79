"""Run configuration: one INI file, validated completely at startup."""

from __future__ import annotations

import configparser
import shlex
from dataclasses import dataclass, fields
from pathlib import Path

from .dedup import LshParams
from .errors import ConfigError

GRANULARITIES = ("document", "paragraph")


@dataclass(frozen=True)
class PipelineConfig:
    lang_target: str = "es"
    lang_min_confidence: float = 0.8
    lang_min_chars: int = 40
    min_words: int = 3
    min_alpha_ratio: float = 0.5
    num_perms: int = 128
    bands: int = 16
    rows: int = 8
    shingle_size: int = 5
    jaccard_threshold: float = 0.8
    chunk_bytes: int = 10 << 30
    workers: int = 1
    seed: int = 0
    url_rules: str = ""  # path to a rules file; empty means pass-through
    record_granularity: str = "document"
    stage2_command: str = ""  # external detector command; empty uses the bundled model

    def __post_init__(self) -> None:
        self.lsh_params()  # raises ConfigError when inconsistent
        if not self.lang_target or not self.lang_target.isalpha():
            raise ConfigError(f"lang_target {self.lang_target!r} is not a language code")
        if not 0.0 <= self.lang_min_confidence <= 1.0:
            raise ConfigError("lang_min_confidence must be within [0, 1]")
        if self.lang_min_chars < 0 or self.min_words < 0:
            raise ConfigError("character and word minimums cannot be negative")
        if not 0.0 <= self.min_alpha_ratio <= 1.0:
            raise ConfigError("min_alpha_ratio must be within [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.record_granularity not in GRANULARITIES:
            raise ConfigError(
                f"record_granularity must be one of {GRANULARITIES}, "
                f"got {self.record_granularity!r}"
            )
        if self.url_rules and not Path(self.url_rules).exists():
            raise ConfigError(f"url_rules file {self.url_rules!r} does not exist")
        if self.stage2_command:
            try:
                shlex.split(self.stage2_command)
            except ValueError as exc:
                raise ConfigError(f"stage2_command is not parseable: {exc}") from exc

    def lsh_params(self) -> LshParams:
        return LshParams(
            num_perms=self.num_perms,
            bands=self.bands,
            rows=self.rows,
            shingle_size=self.shingle_size,
            jaccard_threshold=self.jaccard_threshold,
        )


def load_config(path: Path | None) -> PipelineConfig:
    """Load the [pipeline] section of an INI file; None gives defaults."""
    if path is None:
        return PipelineConfig()
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} does not exist or is unreadable")
    if not parser.has_section("pipeline"):
        raise ConfigError(f"config file {path} has no [pipeline] section")
    section = parser["pipeline"]
    known = {f.name: f.type for f in fields(PipelineConfig)}
    unknown = set(section) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for name in section:
        raw = section[name]
        try:
            if known[name] == "int":
                kwargs[name] = int(raw)
            elif known[name] == "float":
                kwargs[name] = float(raw)
            else:
                kwargs[name] = raw
        except ValueError as exc:
            raise ConfigError(f"config key {name}: {exc}") from exc
    return PipelineConfig(**kwargs)
