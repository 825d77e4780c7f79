"""Three-stage deduplication that never edits inside a surviving document.

Stage order: exact duplicate documents go first, exact duplicate
paragraphs second (first occurrence corpus-wide wins), and near-duplicate
documents last via MinHash signatures in a banded LSH index.  Candidate
pairs from the index are always verified with exact Jaccard over shingle
sets before anything is removed, so removals are never estimator noise.

The survivor rule everywhere is "keep the earliest in canonical order";
callers feed records in manifest order, then in-file order.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .corpus_io import CorpusRecord
from .errors import ConfigError, EmptyShingleSetError

DEFAULT_NUM_PERMS = 128
DEFAULT_BANDS = 16
DEFAULT_ROWS = 8
DEFAULT_SHINGLE_SIZE = 5
DEFAULT_JACCARD_THRESHOLD = 0.8

_STRIP_CATEGORIES = ("P", "S", "N")


def normalize_for_dedup(text: str) -> str:
    """Key material only; stored text is never altered.

    NFKC, lowercase, drop punctuation/symbols/digits, collapse whitespace.
    An empty result is a valid key meaning the text was content-free.
    """
    text = unicodedata.normalize("NFKC", text).lower()
    kept = "".join(
        " " if ch.isspace() else ch
        for ch in text
        if not unicodedata.category(ch).startswith(_STRIP_CATEGORIES)
    )
    return " ".join(kept.split())


def dedup_key(text: str) -> bytes:
    """128-bit digest of the normalized text."""
    return hashlib.blake2b(normalize_for_dedup(text).encode("utf-8"), digest_size=16).digest()


def shingle(normalized: str, w: int) -> frozenset[str]:
    """All contiguous w-word windows; short texts yield one whole-text shingle."""
    if w < 1:
        raise ConfigError("shingle width must be at least 1")
    words = normalized.split()
    if not words:
        return frozenset()
    if len(words) < w:
        return frozenset({" ".join(words)})
    return frozenset(" ".join(words[i : i + w]) for i in range(len(words) - w + 1))


def exact_jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class LshParams:
    num_perms: int = DEFAULT_NUM_PERMS
    bands: int = DEFAULT_BANDS
    rows: int = DEFAULT_ROWS
    shingle_size: int = DEFAULT_SHINGLE_SIZE
    jaccard_threshold: float = DEFAULT_JACCARD_THRESHOLD

    def __post_init__(self) -> None:
        if self.num_perms < 1 or self.bands < 1 or self.rows < 1:
            raise ConfigError("num_perms, bands and rows must be positive")
        if self.bands * self.rows != self.num_perms:
            raise ConfigError(
                f"bands x rows must equal num_perms "
                f"({self.bands} x {self.rows} != {self.num_perms})"
            )
        if self.shingle_size < 1:
            raise ConfigError("shingle_size must be at least 1")
        if not 0.0 < self.jaccard_threshold <= 1.0:
            raise ConfigError("jaccard_threshold must be in (0, 1]")


def candidate_probability(jaccard: float, params: LshParams) -> float:
    """Chance the banding step pairs two docs of the given similarity."""
    return 1.0 - (1.0 - jaccard**params.rows) ** params.bands


# --------------------------------------------------------------------------
# MinHash

_GAMMA = np.uint64(0x9E3779B97F4A7C15)


def _mix64(values: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, vectorized over uint64 (wrapping arithmetic)."""
    z = values.copy()
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def _derived_seeds(seed: int, count: int) -> np.ndarray:
    steps = np.arange(1, count + 1, dtype=np.uint64)
    return _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GAMMA * steps)


def _base_hashes(shingles: Iterable[str]) -> np.ndarray:
    digests = [
        int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "big")
        for s in shingles
    ]
    return np.array(digests, dtype=np.uint64)


@dataclass(frozen=True)
class MinHashSignature:
    values: np.ndarray  # shape (num_perms,), dtype uint64

    def estimate_jaccard(self, other: "MinHashSignature") -> float:
        if self.values.shape != other.values.shape:
            raise ConfigError("signatures come from different parameter sets")
        return float(np.mean(self.values == other.values))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MinHashSignature) and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())


def minhash_signature(shingles: frozenset[str], params: LshParams, seed: int = 0) -> MinHashSignature:
    """k minima under k seeded 64-bit hash functions.

    One hash family: each function is the splitmix64 finalizer applied to
    the shingle's base digest xored with a per-function derived seed.
    The expected agreement fraction between two signatures equals the
    exact Jaccard similarity of the underlying sets.
    """
    if not shingles:
        raise EmptyShingleSetError("cannot sign an empty shingle set")
    base = _base_hashes(shingles)
    seeds = _derived_seeds(seed, params.num_perms)
    # (k, n) table of per-function hashes; minima along n give the sketch.
    table = _mix64(base[np.newaxis, :] ^ seeds[:, np.newaxis])
    return MinHashSignature(values=table.min(axis=1))


# --------------------------------------------------------------------------
# Exact stages


def dedup_exact_documents(records: Sequence[CorpusRecord]) -> tuple[list[CorpusRecord], int]:
    """First record per whole-text key survives; returns (survivors, removed)."""
    seen: set[bytes] = set()
    survivors: list[CorpusRecord] = []
    removed = 0
    for record in records:
        key = dedup_key(record.text)
        if key in seen:
            removed += 1
            continue
        seen.add(key)
        survivors.append(record)
    return survivors, removed


def dedup_exact_paragraphs(
    records: Sequence[CorpusRecord],
) -> tuple[list[CorpusRecord], int, int]:
    """Corpus-global first occurrence per paragraph key.

    Later occurrences are removed from their documents; surviving
    paragraphs keep their relative order; documents left with nothing are
    dropped.  Returns (survivors, paragraphs_removed, documents_emptied).
    """
    seen: set[bytes] = set()
    survivors: list[CorpusRecord] = []
    paragraphs_removed = 0
    documents_emptied = 0
    for record in records:
        kept: list[str] = []
        for paragraph in record.text.split("\n"):
            key = dedup_key(paragraph)
            if key in seen:
                paragraphs_removed += 1
                continue
            seen.add(key)
            kept.append(paragraph)
        if not kept:
            documents_emptied += 1
            continue
        if len(kept) == len(record.text.split("\n")):
            survivors.append(record)
        else:
            survivors.append(replace(record, text="\n".join(kept)))
    return survivors, paragraphs_removed, documents_emptied


# --------------------------------------------------------------------------
# LSH near-dedup


@dataclass(frozen=True)
class DuplicateCluster:
    kept_id: str
    removed_ids: tuple[str, ...]
    similarities: tuple[float, ...]  # verified Jaccard of each removed vs kept


class LshIndex:
    """Banded signature index; tables are independent per band, so a
    parallel build can partition inserts by band id."""

    def __init__(self, params: LshParams):
        self.params = params
        self._tables: list[dict[bytes, list[int]]] = [{} for _ in range(params.bands)]

    def _band_keys(self, signature: MinHashSignature) -> list[bytes]:
        grid = signature.values.reshape(self.params.bands, self.params.rows)
        return [grid[band].tobytes() for band in range(self.params.bands)]

    def add(self, doc_index: int, signature: MinHashSignature) -> None:
        for band, key in enumerate(self._band_keys(signature)):
            self._tables[band].setdefault(key, []).append(doc_index)

    def candidates(self, signature: MinHashSignature) -> set[int]:
        found: set[int] = set()
        for band, key in enumerate(self._band_keys(signature)):
            found.update(self._tables[band].get(key, ()))
        return found


def lsh_near_dedup(
    records: Sequence[CorpusRecord], params: LshParams, seed: int = 0
) -> tuple[list[CorpusRecord], list[DuplicateCluster]]:
    """Remove whole near-duplicate documents, keeping the earliest.

    Every removal is justified by an exact Jaccard at or above the
    threshold against the cluster's kept document, computed on shingle
    sets, not signatures.  Survivors pass through byte-identical.
    """
    index = LshIndex(params)
    survivors: list[CorpusRecord] = []
    survivor_shingles: list[frozenset[str]] = []
    removed_by: dict[int, list[tuple[str, float]]] = {}

    for record in records:
        shingles = shingle(normalize_for_dedup(record.text), params.shingle_size)
        if not shingles:
            # Content-free text cannot be signed; exact dedup already
            # collapsed such documents, so pass the remainder through.
            survivors.append(record)
            survivor_shingles.append(shingles)
            continue
        signature = minhash_signature(shingles, params, seed)
        best_match: tuple[float, int] | None = None
        for kept_index in sorted(index.candidates(signature)):
            similarity = exact_jaccard(shingles, survivor_shingles[kept_index])
            if similarity < params.jaccard_threshold:
                continue
            if best_match is None or similarity > best_match[0]:
                best_match = (similarity, kept_index)
        if best_match is not None:
            similarity, kept_index = best_match
            removed_by.setdefault(kept_index, []).append((record.id, similarity))
            continue
        index.add(len(survivors), signature)
        survivors.append(record)
        survivor_shingles.append(shingles)

    clusters = [
        DuplicateCluster(
            kept_id=survivors[kept_index].id,
            removed_ids=tuple(rid for rid, _ in removals),
            similarities=tuple(sim for _, sim in removals),
        )
        for kept_index, removals in sorted(removed_by.items())
    ]
    return survivors, clusters


# --------------------------------------------------------------------------
# The full chain


@dataclass(frozen=True)
class DedupCounts:
    exact_documents_removed: int
    paragraphs_removed: int
    documents_emptied: int
    near_duplicates_removed: int


def dedup_chain(
    records: Sequence[CorpusRecord], params: LshParams, seed: int = 0
) -> tuple[list[CorpusRecord], list[DuplicateCluster], DedupCounts]:
    """Exact documents, then exact paragraphs, then LSH near-dedup."""
    after_docs, docs_removed = dedup_exact_documents(records)
    after_paragraphs, paragraphs_removed, emptied = dedup_exact_paragraphs(after_docs)
    survivors, clusters = lsh_near_dedup(after_paragraphs, params, seed)
    counts = DedupCounts(
        exact_documents_removed=docs_removed,
        paragraphs_removed=paragraphs_removed,
        documents_emptied=emptied,
        near_duplicates_removed=sum(len(c.removed_ids) for c in clusters),
    )
    return survivors, clusters, counts
