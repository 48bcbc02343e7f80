"""Pass/fail records shared by the verification routines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class Verdict:
    """Outcome of an exhaustive or sampled identity check.

    ``failures`` holds serializable descriptions of counterexamples in the
    order they were found; ``checked`` counts evaluated instances.
    """

    name: str
    checked: int = 0
    failures: List[Dict[str, Any]] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    max_failures: int = 5

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self):
        return self.ok

    def record(self, holds: bool, **info) -> bool:
        self.checked += 1
        if not holds and len(self.failures) < self.max_failures:
            self.failures.append({k: _plain(v) for k, v in info.items()})
        elif not holds:
            self.details["suppressed_failures"] = self.details.get("suppressed_failures", 0) + 1
        return holds

    def fail(self, **info):
        self.record(False, **info)

    def merge(self, other: "Verdict", prefix: Optional[str] = None) -> "Verdict":
        self.checked += other.checked
        for f in other.failures:
            if len(self.failures) < self.max_failures:
                self.failures.append({"check": prefix or other.name, **f})
        return self

    @property
    def first_failure(self) -> Optional[Dict[str, Any]]:
        return self.failures[0] if self.failures else None

    def to_json(self) -> dict:
        out = {"name": self.name, "pass": self.ok, "checked": self.checked}
        if self.failures:
            out["first_failure"] = self.failures[0]
            out["failures"] = self.failures
        if self.details:
            out["details"] = {k: _plain(v) for k, v in self.details.items()}
        return out


def _plain(v):
    from fractions import Fraction
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    return str(v)
