"""
Configuration models for rate sweeps.
"""
import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator, validator

from src.models.network import CombiningMode, KnowledgeMode


class Protocol(str, Enum):
    """Rate expressions that can be evaluated at a network point."""
    SINGLE_HOP = "single_hop"
    SINGLE_HOP_NORMALIZED = "single_hop_normalized"
    PARTIAL_DF = "pdf"
    DF = "df"
    DF_NO_REUSE = "df_no_reuse"
    CF = "cf"
    COMBINED = "combined"
    CUTSET = "cutset"

    @classmethod
    def parse(cls, name: str) -> "Protocol":
        try:
            return cls(name.strip())
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise ValueError(f"Unknown protocol '{name.strip()}'; valid protocols: {valid}")


class SweepKind(str, Enum):
    """Experiment geometries."""
    TWO_RELAY_DISTANCE = "two_relay_distance"
    SINGLE_RELAY_DISTANCE = "single_relay_distance"
    RELAY_COUNT = "relay_count"
    PATH_LOSS = "path_loss"
    SINGLE_POINT = "single_point"


# (start, stop, step) used when a sweep file leaves the range open
DEFAULT_RANGES: Dict[SweepKind, Tuple[float, float, float]] = {
    SweepKind.TWO_RELAY_DISTANCE: (-0.5, 0.5, 0.1),
    SweepKind.SINGLE_RELAY_DISTANCE: (-0.5, 1.5, 0.1),
    SweepKind.RELAY_COUNT: (0.0, 6.0, 1.0),
    SweepKind.PATH_LOSS: (2.0, 6.0, 0.5),
    SweepKind.SINGLE_POINT: (0.5, 0.5, 1.0),
}

PATH_LOSS_RELAY_COUNTS = (1, 3)


class SweepSpec(BaseModel):
    """A validated sweep or single-point request."""
    kind: SweepKind = Field(default=SweepKind.SINGLE_POINT)
    start: Optional[float] = Field(default=None, description="First value of the swept variable")
    stop: Optional[float] = Field(default=None, description="Last value of the swept variable (inclusive)")
    step: Optional[float] = Field(default=None, description="Grid spacing of the swept variable")
    r: float = Field(default=0.5, description="Relay position for single-point runs")
    n_relays: int = Field(default=2, ge=0, le=8)
    snr_db: float = Field(default=10.0, description="SNR_{s,d} = P_s/N_d in dB")
    theta: float = Field(default=4.0, gt=0.0, description="Path loss exponent")
    protocols: List[Protocol] = Field(default_factory=lambda: [Protocol.DF])
    combining: CombiningMode = Field(default=CombiningMode.NON_COHERENT)
    schedule: KnowledgeMode = Field(default=KnowledgeMode.FIXED_SCHEDULE)
    normalize_power: bool = Field(default=False, description="Give the single-hop baseline (N+1)P")
    seed: int = Field(default=0)
    budget: int = Field(default=4000, gt=0, description="Optimizer evaluations per branch")
    workers: int = Field(default=1, ge=1, le=64)
    max_relay_orders: int = Field(default=3, ge=0, description="Enumerate relay orders up to this many relays")

    @validator('step')
    def validate_step(cls, v):
        if v is not None and v <= 0:
            raise ValueError('step must be positive')
        return v

    @validator('snr_db')
    def validate_snr(cls, v):
        if not math.isfinite(v):
            raise ValueError('snr_db must be finite')
        return v

    @validator('protocols')
    def validate_protocols(cls, v):
        if not v:
            raise ValueError('At least one protocol is required')
        return v

    @model_validator(mode='after')
    def validate_range(self):
        start, stop, _ = self.resolved_range()
        if stop < start:
            raise ValueError(f"stop ({stop}) must not be below start ({start})")
        if self.kind == SweepKind.RELAY_COUNT and (start < 0 or stop > 8):
            raise ValueError("Relay counts must lie in [0, 8]")
        if self.kind == SweepKind.PATH_LOSS and start <= 0:
            raise ValueError("Path loss exponents must be positive")
        return self

    def resolved_range(self) -> Tuple[float, float, float]:
        start, stop, step = DEFAULT_RANGES[self.kind]
        return (
            self.start if self.start is not None else start,
            self.stop if self.stop is not None else stop,
            self.step if self.step is not None else step,
        )

    def grid(self) -> List[float]:
        """Values of the swept variable, stop included when it lies on the grid."""
        if self.kind == SweepKind.SINGLE_POINT:
            return [self.r]
        start, stop, step = self.resolved_range()
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]


class SpecOverride(BaseModel):
    """Command-line values that replace sweep-file values."""
    r: Optional[float] = None
    n_relays: Optional[int] = Field(None, ge=0, le=8)
    snr_db: Optional[float] = None
    theta: Optional[float] = Field(None, gt=0.0)
    schedule: Optional[KnowledgeMode] = None
    combining: Optional[CombiningMode] = None
    seed: Optional[int] = None
    budget: Optional[int] = Field(None, gt=0)
    workers: Optional[int] = Field(None, ge=1, le=64)
    protocols: Optional[List[Protocol]] = None
    kind: Optional[SweepKind] = None

    def apply(self, spec: SweepSpec) -> SweepSpec:
        changes = {k: v for k, v in self.model_dump().items() if v is not None}
        if not changes:
            return spec
        return SweepSpec(**{**spec.model_dump(), **changes})
