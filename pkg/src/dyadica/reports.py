"""Report containers shared across the verification modules.

Reports are plain frozen dataclasses; ``to_dict`` produces the
JSON-serializable form used by the harness emitters. Every failing check
carries a witness sufficient to reproduce the worst case.
"""

from dataclasses import dataclass, field
from typing import Optional


def _clean(obj):
    """Recursively convert numpy scalars/arrays to plain Python types."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one verification scan.

    value is the headline quantity (a worst-case ratio or a minimal
    constant, depending on the check); witness pins down where it was
    attained.
    """

    check: str
    passed: bool
    value: float
    threshold: Optional[float] = None
    witness: Optional[dict] = None
    samples: int = 0
    skipped: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(
            {
                "check": self.check,
                "passed": bool(self.passed),
                "value": self.value,
                "threshold": self.threshold,
                "witness": self.witness,
                "samples": self.samples,
                "skipped": self.skipped,
                "details": self.details,
            }
        )


@dataclass(frozen=True)
class RunReport:
    """Top-level result of one harness command."""

    command: str
    config: dict
    checks: list
    passed: bool
    wall_time_s: float
    summary: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "command": self.command,
            "config": _clean(self.config),
            "passed": bool(self.passed),
            "summary": _clean(self.summary),
            "checks": [c.to_dict() if hasattr(c, "to_dict") else _clean(c) for c in self.checks],
        }
        if include_timings:
            out["wall_time_s"] = self.wall_time_s
        return out


def any_failed(checks) -> bool:
    return any(not (c.passed if hasattr(c, "passed") else c.get("passed", True)) for c in checks)
