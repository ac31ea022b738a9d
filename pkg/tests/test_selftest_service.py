"""
Tests for the selftest suite.
"""
import pytest

from src.models.audit import AuditAction
from src.services.audit_service import AuditService
from src.services.selftest_service import SelftestService


@pytest.fixture
def audit_service():
    """Create audit service fixture."""
    return AuditService()


@pytest.fixture
def selftest_service(audit_service):
    """Create selftest service fixture."""
    return SelftestService(audit_service=audit_service)


class TestSelftest:
    """Invariant suite."""

    @pytest.mark.asyncio
    async def test_all_checks_pass(self, selftest_service):
        report = await selftest_service.run()
        failures = [f"{c.name}: {c.detail}" for c in report.checks if not c.passed]
        assert failures == []
        assert report.ok
        assert report.passed == len(selftest_service.checks())

    @pytest.mark.asyncio
    async def test_report_is_audited(self, selftest_service, audit_service):
        report = await selftest_service.run()
        trail = await audit_service.get_run_trail()
        assert trail[-1].action == AuditAction.SELFTEST_COMPLETED
        assert trail[-1].details == {"passed": report.passed, "failed": report.failed}

    @pytest.mark.asyncio
    async def test_raising_check_is_reported(self, selftest_service, monkeypatch):
        def broken():
            raise ArithmeticError("quadrature diverged")

        monkeypatch.setattr(selftest_service, "checks", lambda: [("broken", broken)])
        report = await selftest_service.run()

        assert not report.ok
        assert report.checks[0].detail == "ArithmeticError: quadrature diverged"

    def test_individual_checks(self, selftest_service):
        passed, detail = selftest_service.check_single_hop_golden()
        assert passed, detail
        passed, detail = selftest_service.check_reuse_filtering()
        assert passed, detail
