"""
Audit service - run ledger of optimizer runs, sweep points and written files.
"""
import logging
from datetime import datetime
from typing import Any, Dict, List, Optional
from uuid import uuid4

from src.models.audit import AuditAction, AuditLogEntry

logger = logging.getLogger(__name__)


class AuditService:
    """In-memory ledger of one run; entries keep the order they were recorded in."""

    def __init__(self, run_id: Optional[str] = None):
        self.run_id = run_id or str(uuid4())
        self._entries: List[AuditLogEntry] = []

    async def log_entry(
        self,
        action: AuditAction,
        details: Optional[Dict[str, Any]] = None,
        success: bool = True,
        error_message: Optional[str] = None,
    ) -> AuditLogEntry:
        entry = AuditLogEntry(
            audit_id=str(uuid4()),
            run_id=self.run_id,
            action=action,
            timestamp=datetime.utcnow(),
            details=details or {},
            success=success,
            error_message=error_message,
        )
        self._entries.append(entry)
        logger.debug(f"Ledger: {action.value} (run {self.run_id}, success={success})")
        return entry

    async def log_config_loaded(self, path: str, kind: str) -> AuditLogEntry:
        return await self.log_entry(AuditAction.CONFIG_LOADED, {"path": path, "kind": kind})

    async def log_optimization(self, protocol: str, rate: float, evaluations: int, seed: int) -> AuditLogEntry:
        """Log a finished protocol optimization."""
        return await self.log_entry(
            AuditAction.OPTIMIZATION_COMPLETED,
            {"protocol": protocol, "rate": rate, "evaluations": evaluations, "seed": seed},
        )

    async def log_point_evaluated(self, index: int, protocol: str, rate: float) -> AuditLogEntry:
        return await self.log_entry(AuditAction.POINT_EVALUATED, {"index": index, "protocol": protocol, "rate": rate})

    async def log_point_failed(self, index: int, protocol: str, error_message: str) -> AuditLogEntry:
        """Log a sweep point that raised; the sweep carries on."""
        return await self.log_entry(
            AuditAction.POINT_FAILED, {"index": index, "protocol": protocol}, success=False, error_message=error_message
        )

    async def log_sweep_completed(self, kind: str, rows: int, failed: int) -> AuditLogEntry:
        return await self.log_entry(
            AuditAction.SWEEP_COMPLETED, {"kind": kind, "rows": rows, "failed": failed}, success=failed == 0
        )

    async def log_output_written(self, path: str, fmt: str) -> AuditLogEntry:
        return await self.log_entry(AuditAction.OUTPUT_WRITTEN, {"path": path, "format": fmt})

    async def log_selftest(self, passed: int, failed: int) -> AuditLogEntry:
        return await self.log_entry(
            AuditAction.SELFTEST_COMPLETED, {"passed": passed, "failed": failed}, success=failed == 0
        )

    async def get_run_trail(
        self,
        run_id: Optional[str] = None,
        action: Optional[AuditAction] = None,
    ) -> List[AuditLogEntry]:
        """
        Ledger entries of a run, oldest first.

        Args:
            run_id: Run to return (the current one by default)
            action: Only entries of this action when given

        Returns:
            Matching entries
        """
        run_id = run_id or self.run_id
        return [e for e in self._entries if e.run_id == run_id and (action is None or e.action == action)]
