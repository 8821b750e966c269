"""Shared validation machinery: violations, reports, and format errors."""

from __future__ import annotations

from dataclasses import dataclass, field


class FormatError(ValueError):
    """Raised by parsers on malformed input.

    Carries a stable error ``code`` plus a human-readable ``location``
    (line/column for text inputs, a JSON-ish path otherwise).
    """

    def __init__(self, code: str, message: str, location: str = ""):
        self.code = code
        self.location = location
        super().__init__(f"{code}: {message}" + (f" (at {location})" if location else ""))


@dataclass(frozen=True)
class Violation:
    """One violated invariant, as found by a validator."""

    code: str
    message: str
    location: str = ""

    def to_json(self) -> dict:
        return {"code": self.code, "message": self.message, "location": self.location}


@dataclass
class ValidationReport:
    """Collects violations; empty report == valid input."""

    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str, location: str = "") -> None:
        self.violations.append(Violation(code, message, location))

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_json() for v in self.violations]}

    def summary(self) -> str:
        if self.ok:
            return "ok"
        lines = [f"{len(self.violations)} violation(s):"]
        for v in self.violations:
            loc = f" [{v.location}]" if v.location else ""
            lines.append(f"  - {v.code}{loc}: {v.message}")
        return "\n".join(lines)
