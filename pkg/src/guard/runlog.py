"""Degradation tracking across pipeline stages.

Stages that fall back after an external-service or schema failure never abort
the assessment; they record what happened here so the report's methodology
appendix can disclose every degraded stage.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass


@dataclass(frozen=True)
class Degradation:
    stage: str
    detail: str


class RunLog:
    """Thread-safe collector of degradation events for one assessment run."""

    def __init__(self) -> None:
        self._entries: list[Degradation] = []
        self._lock = threading.Lock()

    def add(self, stage: str, detail: str) -> None:
        with self._lock:
            self._entries.append(Degradation(stage=stage, detail=detail))

    @property
    def entries(self) -> tuple[Degradation, ...]:
        with self._lock:
            return tuple(self._entries)

    def sorted_entries(self) -> tuple[Degradation, ...]:
        """Entries in (stage, detail) order, independent of thread scheduling."""
        return tuple(sorted(self.entries, key=lambda d: (d.stage, d.detail)))

    @property
    def degraded(self) -> bool:
        return bool(self.entries)
