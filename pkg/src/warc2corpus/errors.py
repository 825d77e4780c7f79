"""Exception types shared across the pipeline."""


class Warc2CorpusError(Exception):
    """Base class for all package errors."""


class ValidationError(Warc2CorpusError):
    """A value violated one of its structural invariants."""


class ConfigError(Warc2CorpusError):
    """Bad configuration detected at startup."""


class ModelError(Warc2CorpusError):
    """A language model file is missing or corrupt."""


class UndecodableError(Warc2CorpusError):
    """A page's bytes could not be decoded into plausible text."""


class EmptyShingleSetError(Warc2CorpusError):
    """A signature was requested for an empty shingle set."""


class FetchError(Warc2CorpusError):
    """A segment could not be fetched after all retries."""
