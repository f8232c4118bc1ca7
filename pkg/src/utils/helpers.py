"""
Small helpers shared across modules: UTC timestamps, NDJSON lines and output directories.
"""

import json
from datetime import datetime, timezone
from pathlib import Path


def utc_now():
    """Returns the current UTC time as an ISO-8601 string with millisecond precision."""
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def to_json_line(obj):
    """Serializes one NDJSON line (sorted keys, UTF-8 kept as-is, trailing newline)."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def iter_json_lines(path):
    """
    Yields (line number, decoded object) for every non-blank line of an NDJSON file.

    Args:
        path (str | Path): File to read.
    """
    with open(path, "r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if line.strip():
                yield number, json.loads(line)


def ensure_dir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
