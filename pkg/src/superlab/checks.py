"""Pass/fail report containers shared by the validation routines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class Check:
    name: str
    passed: bool
    value: Any = None
    detail: str = ""


@dataclass
class ValidationReport:
    """Ordered collection of named checks.

    A report with no checks is ``complete=False``; ``passed`` then reports
    False as well, since nothing was verified.
    """

    checks: list[Check] = field(default_factory=list)
    complete: bool = True

    def add(self, name: str, passed: bool, value: Any = None, detail: str = "") -> Check:
        c = Check(name, bool(passed), value, detail)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return self.complete and bool(self.checks) and all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.checks)

    def summary(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail or c.value}" for c in self.checks]
        if not self.complete:
            lines.append("INCOMPLETE  no checks were run")
        return "\n".join(lines)
