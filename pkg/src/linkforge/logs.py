"""Access-log parsing: TSV records, user identities, bot filtering.

The expected input is a 7-column TSV, one HTTP request per line:

    timestamp_ms  ip  x_forwarded_for  user_agent  url  referer  status

Fields must be tab-free; URLs are normalized on ingestion (scheme and
host case-folded, fragment stripped, trailing slash removed).
"""

from __future__ import annotations

import gzip
import hashlib
from dataclasses import dataclass
from typing import IO, Iterable, Iterator
from urllib.parse import urlsplit, urlunsplit

from .errors import BadStatus, BadTimestamp, MalformedLine

LOG_FIELDS = ("timestamp", "ip", "xff", "user_agent", "url", "referer", "status")

#: Shipped default bot denylist (case-insensitive substrings).
DEFAULT_BOT_PATTERNS = ("bot", "crawler", "spider", "slurp")


@dataclass(frozen=True)
class LogFormat:
    """Column layout of a log file: field order plus separator."""

    fields: tuple = LOG_FIELDS
    sep: str = "\t"

    def index(self, name: str) -> int:
        return self.fields.index(name)


DEFAULT_FORMAT = LogFormat()


@dataclass(frozen=True)
class LogRecord:
    """One validated HTTP request."""

    timestamp: int          # epoch milliseconds, UTC
    ip: str
    xff: str
    user_agent: str
    url: str                # normalized, non-empty
    referer: str            # normalized, possibly empty
    status: int


def normalize_url(url: str) -> str:
    """Normalize a URL or path: case-fold scheme/host, drop the fragment,
    strip a trailing slash (query strings are kept).

    Idempotent: ``normalize_url(normalize_url(u)) == normalize_url(u)``.
    """
    url = url.strip()
    if not url:
        return ""
    parts = urlsplit(url)
    path = parts.path
    if len(path) > 1 and path.endswith("/"):
        path = path.rstrip("/") or "/"
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), path, parts.query, ""))


def referer_class(referer: str) -> str:
    """Classify a normalized referer as ``empty``, ``internal`` (site-relative
    path) or ``external`` (carries a scheme/host)."""
    if not referer:
        return "empty"
    if referer.startswith("/"):
        return "internal"
    return "external"


def parse_log_line(line: str, fmt: LogFormat = DEFAULT_FORMAT) -> LogRecord:
    """Parse one log line into a LogRecord, or raise a typed error.

    Raises MalformedLine on a wrong column count or empty URL,
    BadTimestamp on an unparseable or non-positive timestamp, and
    BadStatus on a non-integer or out-of-range status.
    """
    cols = line.rstrip("\r\n").split(fmt.sep)
    if len(cols) != len(fmt.fields):
        raise MalformedLine(
            f"expected {len(fmt.fields)} columns, got {len(cols)}"
        )
    raw_ts = cols[fmt.index("timestamp")]
    try:
        timestamp = int(raw_ts)
    except ValueError:
        raise BadTimestamp(f"unparseable timestamp {raw_ts!r}") from None
    if timestamp <= 0:
        raise BadTimestamp(f"non-positive timestamp {timestamp}")
    raw_status = cols[fmt.index("status")]
    try:
        status = int(raw_status)
    except ValueError:
        raise BadStatus(f"non-integer status {raw_status!r}") from None
    if not 100 <= status <= 599:
        raise BadStatus(f"status {status} outside [100, 599]")
    url = normalize_url(cols[fmt.index("url")])
    if not url:
        raise MalformedLine("empty URL after normalization")
    return LogRecord(
        timestamp=timestamp,
        ip=cols[fmt.index("ip")],
        xff=cols[fmt.index("xff")],
        user_agent=cols[fmt.index("user_agent")],
        url=url,
        referer=normalize_url(cols[fmt.index("referer")]),
        status=status,
    )


def derive_user_id(ip: str, xff: str, user_agent: str) -> str:
    """Approximate user identity: MD5 over ip|xff|user_agent.

    Returns 32 lowercase hex characters; a pure function of its inputs.
    """
    payload = f"{ip}|{xff}|{user_agent}".encode("utf-8")
    return hashlib.md5(payload).hexdigest()


def is_bot(user_agent: str, denylist: Iterable[str] = DEFAULT_BOT_PATTERNS) -> bool:
    """True iff the user agent matches any case-insensitive substring pattern."""
    ua = user_agent.lower()
    return any(pattern.lower() in ua for pattern in denylist)


def load_patterns(path) -> tuple:
    """Read a pattern file: one pattern per line, blank lines and '#' comments skipped."""
    patterns = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                patterns.append(line)
    return tuple(patterns)


def open_log(path) -> IO[str]:
    """Open a plain or gzip-compressed log file as UTF-8 text."""
    if str(path).endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def read_log(path, fmt: LogFormat = DEFAULT_FORMAT) -> Iterator[LogRecord]:
    """Yield every record of a log file; parse errors propagate."""
    with open_log(path) as fh:
        for line in fh:
            if line.strip():
                yield parse_log_line(line, fmt)


def keep_record(record: LogRecord, bot_patterns: Iterable[str] = DEFAULT_BOT_PATTERNS) -> bool:
    """Ingestion filter: drop bot traffic and non-2xx responses."""
    if is_bot(record.user_agent, bot_patterns):
        return False
    return 200 <= record.status <= 299
