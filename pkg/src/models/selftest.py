"""
Selftest result models.
"""
from datetime import datetime
from typing import List

from pydantic import BaseModel, Field


class CheckResult(BaseModel):
    """Outcome of one invariant check."""
    name: str
    passed: bool
    detail: str = Field(default="", description="Measured values or the failure reason")


class SelftestReport(BaseModel):
    """All checks of one selftest run."""
    checks: List[CheckResult] = Field(default_factory=list)
    started_at: datetime = Field(default_factory=datetime.utcnow)

    @property
    def passed(self) -> int:
        return sum(1 for c in self.checks if c.passed)

    @property
    def failed(self) -> int:
        return len(self.checks) - self.passed

    @property
    def ok(self) -> bool:
        return self.failed == 0

    class Config:
        json_encoders = {
            datetime: lambda v: v.isoformat()
        }
