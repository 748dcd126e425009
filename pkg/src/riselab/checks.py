"""Result record shared by every numerical check."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check: worst violation found against the allowed tolerance.

    ``max_violation`` is the largest amount by which the checked relation
    fails (0 when it holds with room to spare).  Truthy iff the check passed.
    """

    check: str
    max_violation: float
    tolerance: float
    details: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tolerance)

    def __bool__(self) -> bool:
        return self.passed

    def as_record(self, scenario: str = "", seed: int = 0) -> dict:
        return {
            "scenario": scenario,
            "seed": seed,
            "check": self.check,
            "max_violation": float(self.max_violation),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
        }


def violation(excess) -> float:
    """Largest positive entry of ``excess`` (amount by which ``<= 0`` fails), else 0."""
    import numpy as np

    excess = np.asarray(excess, dtype=float)
    if excess.size == 0:
        return 0.0
    return float(max(0.0, np.max(excess)))
