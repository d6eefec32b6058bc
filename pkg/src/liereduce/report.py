"""Named verdicts collected into reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .expr import EqualityVerdict


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    witness: dict | None = None
    probabilistic: bool = False
    values: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"name": self.name, "passed": self.passed, "probabilistic": self.probabilistic}
        if self.detail:
            out["detail"] = self.detail
        if self.witness is not None:
            out["witness"] = {k: _plain(v) for k, v in sorted(self.witness.items())}
        if self.values:
            out["values"] = {k: _plain(v) for k, v in sorted(self.values.items())}
        return out


def _plain(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return v


def from_verdict(name: str, verdict: EqualityVerdict, detail: str = "") -> Check:
    values = {}
    if not verdict.equal and verdict.lhs is not None:
        values = {"lhs": verdict.lhs, "rhs": verdict.rhs}
    return Check(name, verdict.equal, detail, verdict.witness, True, values)


class StepFailed(RuntimeError):
    """A reduction step aborted; ``checks`` holds everything verified so far."""

    def __init__(self, message: str, checks=None, step: int | None = None):
        self.checks = list(checks or [])
        self.step = step
        super().__init__(message)


def all_passed(checks) -> bool:
    return all(c.passed for c in checks)


def first_failure(checks):
    return next((c for c in checks if not c.passed), None)
