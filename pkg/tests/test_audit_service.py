"""
Tests for the run ledger.
"""
import pytest

from src.models.audit import AuditAction
from src.services.audit_service import AuditService


@pytest.fixture
def audit_service():
    """Create audit service fixture."""
    return AuditService(run_id="run-1")


class TestAuditService:
    """Recording and reading ledger entries."""

    @pytest.mark.asyncio
    async def test_entries_carry_run_id(self, audit_service):
        entry = await audit_service.log_optimization("df", 4.8, 120, seed=3)
        assert entry.run_id == "run-1"
        assert entry.details == {"protocol": "df", "rate": 4.8, "evaluations": 120, "seed": 3}

    @pytest.mark.asyncio
    async def test_failed_point_is_unsuccessful(self, audit_service):
        entry = await audit_service.log_point_failed(4, "cf", "CovarianceError: indefinite")
        assert not entry.success
        assert entry.error_message == "CovarianceError: indefinite"

    @pytest.mark.asyncio
    async def test_sweep_with_failures_is_unsuccessful(self, audit_service):
        assert not (await audit_service.log_sweep_completed("relay_count", rows=2, failed=1)).success
        assert (await audit_service.log_sweep_completed("relay_count", rows=2, failed=0)).success

    @pytest.mark.asyncio
    async def test_trail_keeps_order_and_filters_by_action(self, audit_service):
        await audit_service.log_point_evaluated(0, "df", 5.0)
        await audit_service.log_point_failed(1, "df", "QuadratureError")
        await audit_service.log_point_evaluated(2, "df", 5.5)

        trail = await audit_service.get_run_trail()
        assert [e.details["index"] for e in trail] == [0, 1, 2]

        evaluated = await audit_service.get_run_trail(action=AuditAction.POINT_EVALUATED)
        assert [e.details["index"] for e in evaluated] == [0, 2]

    @pytest.mark.asyncio
    async def test_trail_is_per_run(self, audit_service):
        await audit_service.log_selftest(passed=9, failed=0)
        assert len(await audit_service.get_run_trail()) == 1
        assert await audit_service.get_run_trail("other-run") == []
