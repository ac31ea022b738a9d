"""
Headless rate agent for programmatic access.
Bundles config loading, protocol optimization, sweeps and outputs.
"""
import logging
from typing import List, Optional

from src.models.audit import AuditLogEntry
from src.models.config import Protocol, SpecOverride, SweepKind, SweepSpec
from src.models.network import KnowledgeMode
from src.models.rate import ProtocolResult
from src.models.selftest import SelftestReport
from src.models.sweep import SweepPoint, SweepTable
from src.services.audit_service import AuditService
from src.services.config_service import ConfigService
from src.services.rate_service import RateService
from src.services.reporting_service import ReportingService
from src.services.selftest_service import SelftestService
from src.services.sweep_service import SweepService, network_for

logger = logging.getLogger(__name__)

# no relays to schedule
SINGLE_HOPS = (Protocol.SINGLE_HOP, Protocol.SINGLE_HOP_NORMALIZED)


class RelayRateAgent:
    """
    Headless agent over the rate services.
    No CLI dependencies required.
    """

    def __init__(self, enable_audit: bool = True):
        self.audit_service = AuditService() if enable_audit else None
        self.config_service = ConfigService(audit_service=self.audit_service)
        self.rate_service = RateService(audit_service=self.audit_service)
        self.sweep_service = SweepService(audit_service=self.audit_service)
        self.reporting = ReportingService(audit_service=self.audit_service)
        self.selftest = SelftestService(audit_service=self.audit_service)

        logger.info("RelayRateAgent initialized")

    async def load_config(self, path: str, override: Optional[SpecOverride] = None) -> SweepSpec:
        return await self.config_service.load_config(path, override)

    async def compute_rate(self, protocol: Protocol, spec: SweepSpec) -> ProtocolResult:
        """
        Optimize one protocol at the single network point described by spec.

        Args:
            protocol: Protocol to evaluate
            spec: Geometry (r, n_relays, theta, snr_db), schedule, seed and budget

        Returns:
            ProtocolResult with rate, binding constraints and parameters

        Raises:
            ValueError: random access requested for CF, the combined protocol or the cut-set bound
        """
        if spec.normalize_power and protocol == Protocol.SINGLE_HOP:
            protocol = Protocol.SINGLE_HOP_NORMALIZED
        schedule = KnowledgeMode.FIXED_SCHEDULE if protocol in SINGLE_HOPS else spec.schedule
        point = SweepPoint(
            index=0,
            kind=SweepKind.SINGLE_POINT,
            r=spec.r,
            n_relays=spec.n_relays,
            theta=spec.theta,
            snr_db=spec.snr_db,
            protocol=protocol,
            schedule=schedule,
            combining=spec.combining,
            seed=spec.seed,
            budget=spec.budget,
            max_relay_orders=spec.max_relay_orders,
        )
        return await self.rate_service.compute_rate(
            protocol,
            network_for(point),
            schedule,
            seed=spec.seed,
            budget=spec.budget,
            max_relay_orders=spec.max_relay_orders,
        )

    async def run_sweep(self, spec: SweepSpec, out_dir: Optional[str] = None, plot: bool = False) -> SweepTable:
        """
        Run a sweep and optionally write its outputs.

        Args:
            spec: Sweep spec
            out_dir: Directory for rates.csv (and rates.svg); nothing is written when None
            plot: Also write the SVG plot

        Returns:
            SweepTable in grid order
        """
        table = await self.sweep_service.run_sweep(spec)
        if out_dir is not None:
            await self.reporting.emit_outputs(table, out_dir, plot=plot)
        return table

    async def run_selftest(self) -> SelftestReport:
        return await self.selftest.run()

    async def get_audit_log(self) -> List[AuditLogEntry]:
        """Ledger of this agent's run; empty when auditing is disabled."""
        if not self.audit_service:
            logger.warning("Audit service not available")
            return []
        return await self.audit_service.get_run_trail()


def create_agent(enable_audit: bool = True) -> RelayRateAgent:
    """
    Factory function to create a RelayRateAgent instance.

    Args:
        enable_audit: Keep a run ledger

    Returns:
        Configured RelayRateAgent instance
    """
    return RelayRateAgent(enable_audit=enable_audit)
