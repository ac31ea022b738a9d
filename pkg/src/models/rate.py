"""
Rate result models.
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class OutputStatus(str, Enum):
    """Tag returned instead of a variance when the receiver is transmitting."""
    NO_OUTPUT = "no_output"


class Binding(BaseModel):
    """Minimizing term of one rate constraint."""
    level: int = Field(..., ge=1)
    term: str = Field(..., description="Receiver index, 'd' or a cut label")

    def label(self) -> str:
        return f"{self.level}:{self.term}"


class RateBreakdown(BaseModel):
    """Per-level rates of one protocol evaluation."""
    protocol: str
    per_level: List[float] = Field(default_factory=list)
    total: float = Field(..., ge=0.0)
    binding: List[Binding] = Field(default_factory=list)
    details: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode='after')
    def validate_total(self):
        if any(r < 0 for r in self.per_level):
            raise ValueError("Per-level rates must be non-negative")
        if self.per_level and abs(sum(self.per_level) - self.total) > 1e-9:
            raise ValueError("Total rate must equal the sum of per-level rates")
        return self

    @property
    def binding_label(self) -> str:
        return ";".join(b.label() for b in self.binding)


class ProtocolResult(BaseModel):
    """Optimized rate of a protocol at one network point."""
    protocol: str
    rate: float = Field(..., ge=0.0)
    breakdown: Optional[RateBreakdown] = None
    params: Dict[str, Any] = Field(default_factory=dict, description="Best parameters found")
    evaluations: int = Field(default=0, ge=0)
    seed: int = 0

    @property
    def binding_label(self) -> str:
        return self.breakdown.binding_label if self.breakdown else ""
