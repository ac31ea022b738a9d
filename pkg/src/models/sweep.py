"""
Sweep grid points and result rows.
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from src.models.config import Protocol, SweepKind
from src.models.network import CombiningMode, KnowledgeMode

CSV_COLUMNS = [
    "r", "N", "theta", "snr_db", "protocol", "schedule",
    "combining", "rate_bpcu", "binding", "evals", "seed",
]


class SweepPoint(BaseModel):
    """One protocol evaluation job of a sweep."""
    index: int = Field(..., ge=0, description="Grid index; rows are ordered by it")
    kind: SweepKind
    r: float
    n_relays: int = Field(..., ge=0)
    theta: float = Field(..., gt=0.0)
    snr_db: float
    protocol: Protocol
    schedule: KnowledgeMode
    combining: CombiningMode
    seed: int = 0
    budget: int = Field(default=4000, gt=0)
    max_relay_orders: int = Field(default=3, ge=0)


class SweepRow(BaseModel):
    """One CSV row."""
    r: float
    n_relays: int
    theta: float
    snr_db: float
    protocol: Protocol
    schedule: KnowledgeMode
    combining: CombiningMode
    rate_bpcu: Optional[float] = None
    binding: str = ""
    evals: int = 0
    seed: int = 0

    @property
    def failed(self) -> bool:
        return self.rate_bpcu is None

    @property
    def series(self) -> str:
        """Plot series label."""
        return f"{self.protocol.value} ({self.schedule.value})"

    def to_csv(self) -> Dict[str, str]:
        return {
            "r": f"{self.r:.5f}",
            "N": str(self.n_relays),
            "theta": f"{self.theta:g}",
            "snr_db": f"{self.snr_db:g}",
            "protocol": self.protocol.value,
            "schedule": self.schedule.value,
            "combining": self.combining.value,
            "rate_bpcu": "" if self.rate_bpcu is None else f"{self.rate_bpcu:.5f}",
            "binding": self.binding,
            "evals": str(self.evals),
            "seed": str(self.seed),
        }

    @classmethod
    def from_csv(cls, record: Dict[str, str]) -> "SweepRow":
        return cls(
            r=float(record["r"]),
            n_relays=int(record["N"]),
            theta=float(record["theta"]),
            snr_db=float(record["snr_db"]),
            protocol=Protocol(record["protocol"]),
            schedule=KnowledgeMode(record["schedule"]),
            combining=CombiningMode(record["combining"]),
            rate_bpcu=float(record["rate_bpcu"]) if record["rate_bpcu"] else None,
            binding=record["binding"],
            evals=int(record["evals"]),
            seed=int(record["seed"]),
        )


class SweepTable(BaseModel):
    """Ordered result rows of one sweep."""
    kind: SweepKind
    rows: List[SweepRow] = Field(default_factory=list)

    @property
    def swept_variable(self) -> str:
        if self.kind == SweepKind.RELAY_COUNT:
            return "N"
        if self.kind == SweepKind.PATH_LOSS:
            return "theta"
        return "r"

    @property
    def failed_rows(self) -> List[SweepRow]:
        return [row for row in self.rows if row.failed]
