"""Structured outcomes of symbolic checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a check.

    ``residual`` holds ``(label, value)`` pairs describing what failed to
    vanish; a check passes exactly when the residual is empty.
    """

    name: str
    residual: tuple = ()
    details: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return not self.residual

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def residual_text(self, formatter=str) -> list:
        return [f"{label}: {formatter(value)}" for label, value in self.residual]

    def __bool__(self) -> bool:
        return self.passed

    def summary(self) -> str:
        return f"{self.name}: {self.status}" + (f" ({len(self.residual)} residual terms)"
                                                 if self.residual else "")


def jsonable(value: Any) -> Any:
    """Render values for JSON reports with numbers as exact decimal strings."""
    from fractions import Fraction

    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (int, Fraction)):
        f = Fraction(value)
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return str(value)
