"""Small shared helpers: canonical JSON, slugs, clocks."""

from __future__ import annotations

import json
import re
from datetime import datetime, timezone
from typing import Any, Callable

Clock = Callable[[], datetime]

# Fixed instant used whenever a run must be byte-reproducible (replay mode).
REPLAY_INSTANT = datetime(2024, 1, 1, 0, 0, 0, tzinfo=timezone.utc)


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def fixed_clock(instant: datetime = REPLAY_INSTANT) -> Clock:
    """Clock that always returns the same instant."""
    return lambda: instant


def canonical_json_bytes(value: Any) -> bytes:
    """Serialize to sorted-key, minimal-whitespace UTF-8 JSON.

    Equal values always produce equal bytes, which is what report round-trips
    and request digests rely on.
    """
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def normalize_ws(text: str) -> str:
    """Collapse runs of whitespace to single spaces and trim the ends."""
    return " ".join(text.split())


def slugify(text: str) -> str:
    """Lowercase, non-alphanumerics to single hyphens."""
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "unnamed"


def dotted_sort_key(dotted_id: str) -> tuple:
    """Sort key for dotted numeric ids ("1.2" < "1.10" < "2.1").

    Non-numeric segments sort after numeric ones, lexicographically.
    """
    parts = []
    for part in dotted_id.split("."):
        if part.isdigit():
            parts.append((0, int(part), ""))
        else:
            parts.append((1, 0, part))
    return tuple(parts)


def isoformat_utc(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat()
