"""warc2corpus: curate a clean monolingual text corpus from WARC archives.

The pipeline goes raw crawl archive -> HTML responses -> decoded pages ->
paragraph-structured documents -> language-filtered records -> exact and
near deduplication -> chunked JSONL with full provenance per record.
"""

from .config import PipelineConfig, load_config
from .corpus_io import (
    CorpusRecord,
    CorpusStats,
    UrlRules,
    compute_stats,
    filter_by_url,
    make_record,
    read_records,
    write_chunks,
)
from .dedup import (
    DuplicateCluster,
    LshParams,
    MinHashSignature,
    dedup_chain,
    dedup_exact_documents,
    dedup_exact_paragraphs,
    exact_jaccard,
    lsh_near_dedup,
    minhash_signature,
    normalize_for_dedup,
    shingle,
)
from .errors import (
    ConfigError,
    EmptyShingleSetError,
    FetchError,
    ModelError,
    UndecodableError,
    ValidationError,
    Warc2CorpusError,
)
from .extract import (
    CleaningPolicy,
    Document,
    HtmlPage,
    Paragraph,
    clean_document,
    decode_to_utf8,
    extract_document,
    extract_paragraphs,
)
from .langid import (
    LanguageCascade,
    LanguageVerdict,
    accept_target,
    default_cascade,
    detect_stage1,
    detect_stage2,
)
from .manifest import JobManifest, load_manifest, save_manifest, shuffle_manifest
from .pipeline import run_dedup, run_extract
from .report import RunReport
from .segments import WarcSegmentRef, canonical_warc_url, parse_warc_url
from .warc import RawWarcRecord, RecordType, StreamCounters, stream_records

__version__ = "0.1.0"

__all__ = [
    "CleaningPolicy",
    "ConfigError",
    "CorpusRecord",
    "CorpusStats",
    "Document",
    "DuplicateCluster",
    "EmptyShingleSetError",
    "FetchError",
    "HtmlPage",
    "JobManifest",
    "LanguageCascade",
    "LanguageVerdict",
    "LshParams",
    "MinHashSignature",
    "ModelError",
    "Paragraph",
    "PipelineConfig",
    "RawWarcRecord",
    "RecordType",
    "RunReport",
    "StreamCounters",
    "UndecodableError",
    "UrlRules",
    "ValidationError",
    "Warc2CorpusError",
    "WarcSegmentRef",
    "accept_target",
    "canonical_warc_url",
    "clean_document",
    "compute_stats",
    "decode_to_utf8",
    "dedup_chain",
    "dedup_exact_documents",
    "dedup_exact_paragraphs",
    "default_cascade",
    "detect_stage1",
    "detect_stage2",
    "exact_jaccard",
    "extract_document",
    "extract_paragraphs",
    "filter_by_url",
    "load_config",
    "load_manifest",
    "lsh_near_dedup",
    "make_record",
    "minhash_signature",
    "normalize_for_dedup",
    "parse_warc_url",
    "read_records",
    "run_dedup",
    "run_extract",
    "save_manifest",
    "shingle",
    "shuffle_manifest",
    "stream_records",
    "write_chunks",
    "__version__",
]
