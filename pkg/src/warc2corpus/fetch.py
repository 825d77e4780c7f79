"""One byte-stream abstraction over local WARC files and remote segments.

Remote sources are fetched with streaming HTTP GETs; s3://commoncrawl/
locations are rewritten to the public HTTPS mirror.  Transient failures
retry with exponential backoff before the segment is marked failed.
"""

from __future__ import annotations

import os
import time
from pathlib import Path
from typing import BinaryIO

import requests

from .errors import FetchError

# Overridable for private mirrors; credentials ride along as a header.
DEFAULT_MIRROR = "https://data.commoncrawl.org/"
MIRROR_ENV = "WARC2CORPUS_MIRROR"
TOKEN_ENV = "WARC2CORPUS_HTTP_TOKEN"

MAX_ATTEMPTS = 3
BACKOFF_BASE_SECONDS = 1.0


def resolve_url(location: str) -> str:
    """Map an s3://commoncrawl/ URL onto the configured HTTPS mirror."""
    mirror = os.environ.get(MIRROR_ENV, DEFAULT_MIRROR)
    if location.startswith("s3://commoncrawl/"):
        return mirror.rstrip("/") + "/" + location[len("s3://commoncrawl/"):]
    return location


def open_stream(
    location: str | Path,
    *,
    max_attempts: int = MAX_ATTEMPTS,
    backoff: float = BACKOFF_BASE_SECONDS,
    timeout: float = 300.0,
) -> BinaryIO:
    """Open a segment as a raw binary stream.

    Local paths open directly; http(s) and s3 locations stream over HTTP
    with up to max_attempts tries and exponential backoff between them.
    """
    loc = str(location)
    if not (loc.startswith("http://") or loc.startswith("https://") or loc.startswith("s3://")):
        try:
            return open(loc, "rb")
        except OSError as exc:
            raise FetchError(f"cannot open {loc}: {exc}") from exc

    url = resolve_url(loc)
    headers = {}
    token = os.environ.get(TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"

    last_error: Exception | None = None
    for attempt in range(max_attempts):
        if attempt:
            time.sleep(backoff * (2 ** (attempt - 1)))
        try:
            response = requests.get(url, stream=True, timeout=timeout, headers=headers)
            response.raise_for_status()
            response.raw.decode_content = False
            return response.raw
        except requests.RequestException as exc:
            last_error = exc
    raise FetchError(f"giving up on {url} after {max_attempts} attempts: {last_error}")
