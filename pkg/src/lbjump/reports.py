"""Small result containers shared by the checking and certification routines."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class ViolationReport:
    """Outcome of a pointwise check over a grid.

    ``violations`` holds (point, description) pairs; an empty list means the
    check passed everywhere.
    """

    check: str
    violations: list[tuple[float, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, point: float, message: str) -> None:
        self.violations.append((point, message))

    def __bool__(self) -> bool:  # truthiness == passed
        return self.ok


@dataclass
class CertReport:
    """Outcome of a numerical certificate with named residuals.

    ``values`` carries the quantities that were compared (gaps, residuals,
    bounds) so failures are diagnosable without rerunning.
    """

    name: str
    ok: bool
    values: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok
