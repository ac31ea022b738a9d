"""
Run ledger models for optimizer runs, sweep points and written outputs.
"""
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field


class AuditAction(str, Enum):
    """Ledger action types."""
    CONFIG_LOADED = "config_loaded"
    OPTIMIZATION_COMPLETED = "optimization_completed"
    POINT_EVALUATED = "point_evaluated"
    POINT_FAILED = "point_failed"
    SWEEP_COMPLETED = "sweep_completed"
    OUTPUT_WRITTEN = "output_written"
    SELFTEST_COMPLETED = "selftest_completed"


class AuditLogEntry(BaseModel):
    """One ledger entry."""
    audit_id: str = Field(..., description="Unique entry identifier")
    run_id: str = Field(..., description="Run the entry belongs to")
    action: AuditAction
    timestamp: datetime = Field(default_factory=datetime.utcnow)
    details: Dict[str, Any] = Field(default_factory=dict)
    success: bool = Field(default=True)
    error_message: Optional[str] = None

    class Config:
        json_encoders = {
            datetime: lambda v: v.isoformat()
        }
