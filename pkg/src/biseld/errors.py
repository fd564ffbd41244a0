"""Domain error type shared across the toolkit.

Carries optional file/line/field context so the CLI can report where a
bad value came from instead of just what it was.
"""

from __future__ import annotations


class BiseldError(ValueError):
    """Domain error with optional provenance context."""

    def __init__(self, message: str, *, path=None, line: int | None = None,
                 field: str | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        self.field = field
        super().__init__(self._format(message))

    def _format(self, message: str) -> str:
        ctx = []
        if self.path is not None:
            ctx.append(self.path if self.line is None else f"{self.path}:{self.line}")
        elif self.line is not None:
            ctx.append(f"line {self.line}")
        if self.field is not None:
            ctx.append(f"field '{self.field}'")
        if ctx:
            return f"{message} ({', '.join(ctx)})"
        return message
