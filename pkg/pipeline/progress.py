"""Line-oriented CLI progress reporting for solver and simulation runs."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import TextIO


@dataclass
class ProgressReporter:
    """Print one progress line per finished unit of work.

    Lines look like ``[compare] 2/3 seed 7 done`` so captured stdout stays
    diffable; nothing is redrawn in place.
    """

    total: int
    label: str = "progress"
    enabled: bool = True
    stream: TextIO = field(default_factory=lambda: sys.stdout)

    def __post_init__(self) -> None:
        self._effective_total = self.total if self.total > 0 else 1
        self._current = 0

    @property
    def current(self) -> int:
        return self._current

    def note(self, message: str) -> None:
        """Emit a free-form progress line under this reporter's label."""
        if self.enabled:
            self.stream.write(f"[{self.label}] {message}\n")
            self.stream.flush()

    def advance(self, detail: str = "", step: int = 1) -> None:
        """Count ``step`` finished units and report the running total."""
        self._current = max(0, min(self._current + step, self._effective_total))
        suffix = f" {detail}" if detail else ""
        self.note(f"{self._current}/{self._effective_total}{suffix}")

    def complete(self) -> None:
        """Close the run with a final summary line."""
        self.note(f"complete ({self._current}/{self._effective_total})")
