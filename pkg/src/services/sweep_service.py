"""
Sweep service - builds experiment grids and evaluates them point by point.
"""
import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional

from src.models.config import PATH_LOSS_RELAY_COUNTS, Protocol, SweepKind, SweepSpec
from src.models.network import KnowledgeMode, NetworkConfig
from src.models.sweep import SweepPoint, SweepRow, SweepTable
from src.services.audit_service import AuditService
from src.services.rate_service import DF_FAMILY, FIXED_SCHEDULE_ONLY, RateService

logger = logging.getLogger(__name__)


def network_for(point: SweepPoint) -> NetworkConfig:
    """
    Network geometry of one grid point.

    Two-relay lines put relay 1 at r and relay 2 at 1-r; relay-count and
    path-loss sweeps place N relays at i/(N+1).
    """
    options = {"snr_db": point.snr_db, "path_loss_exponent": point.theta, "combining": point.combining}
    if point.kind == SweepKind.TWO_RELAY_DISTANCE:
        return NetworkConfig.two_relay_line(point.r, **options)
    if point.kind == SweepKind.SINGLE_RELAY_DISTANCE:
        return NetworkConfig.single_relay_line(point.r, **options)
    if point.kind == SweepKind.SINGLE_POINT:
        if point.n_relays == 2:
            return NetworkConfig.two_relay_line(point.r, **options)
        if point.n_relays == 1:
            return NetworkConfig.single_relay_line(point.r, **options)
    return NetworkConfig.equally_spaced(point.n_relays, **options)


def evaluate_point(point: SweepPoint) -> SweepRow:
    """
    Optimize one protocol at one grid point.

    Runs in worker processes, so it builds its own services. Failures are
    logged and returned as rows without a rate.
    """
    row = SweepRow(
        r=point.r,
        n_relays=point.n_relays,
        theta=point.theta,
        snr_db=point.snr_db,
        protocol=point.protocol,
        schedule=point.schedule,
        combining=point.combining,
        seed=point.seed,
    )
    try:
        result = RateService().evaluate(
            point.protocol,
            network_for(point),
            point.schedule,
            seed=point.seed,
            budget=point.budget,
            max_relay_orders=point.max_relay_orders,
        )
    except (ValueError, ArithmeticError) as e:
        logger.error(f"Point {point.index} ({point.protocol.value}) failed: {e}", exc_info=True)
        return row.model_copy(update={"binding": f"failed: {type(e).__name__}"})

    return row.model_copy(update={
        "rate_bpcu": result.rate,
        "binding": result.binding_label,
        "evals": result.evaluations,
    })


class SweepService:
    """
    Runs a SweepSpec over its grid.

    With more than one worker the points are spread over a process pool;
    rows always come back in grid order.
    """

    def __init__(self, audit_service: Optional[AuditService] = None):
        self.audit_service = audit_service

    def build_points(self, spec: SweepSpec) -> List[SweepPoint]:
        """
        Expand a spec into evaluation jobs, ordered by grid value, relay count and protocol.

        Args:
            spec: Validated sweep spec

        Returns:
            SweepPoints with consecutive indices
        """
        fixed_only = [p.value for p in spec.protocols if p in FIXED_SCHEDULE_ONLY]
        if spec.schedule != KnowledgeMode.FIXED_SCHEDULE and fixed_only:
            logger.warning(f"Random access applies to the DF family only; {', '.join(fixed_only)} use a fixed schedule")
        points = []
        for value in spec.grid():
            for n_relays, r, theta in self._geometries(spec, value):
                for protocol in spec.protocols:
                    if spec.normalize_power and protocol == Protocol.SINGLE_HOP:
                        protocol = Protocol.SINGLE_HOP_NORMALIZED
                    schedule = spec.schedule if protocol in DF_FAMILY else KnowledgeMode.FIXED_SCHEDULE
                    points.append(SweepPoint(
                        index=len(points),
                        kind=spec.kind,
                        r=r,
                        n_relays=n_relays,
                        theta=theta,
                        snr_db=spec.snr_db,
                        protocol=protocol,
                        schedule=schedule,
                        combining=spec.combining,
                        seed=spec.seed,
                        budget=spec.budget,
                        max_relay_orders=spec.max_relay_orders,
                    ))
        return points

    async def run_sweep(self, spec: SweepSpec) -> SweepTable:
        """
        Evaluate every point of the sweep.

        Args:
            spec: Validated sweep spec

        Returns:
            SweepTable with one row per point; failed points have no rate
        """
        points = self.build_points(spec)
        logger.info(f"Running {spec.kind.value} sweep: {len(points)} points on {spec.workers} worker(s)")

        if spec.workers > 1 and len(points) > 1:
            loop = asyncio.get_running_loop()
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                rows = await asyncio.gather(*[
                    loop.run_in_executor(pool, evaluate_point, point) for point in points
                ])
        else:
            rows = [evaluate_point(point) for point in points]

        table = SweepTable(kind=spec.kind, rows=list(rows))
        for point, row in zip(points, table.rows):
            if row.failed:
                logger.warning(f"Point {point.index} recorded as failed ({row.binding})")
            if self.audit_service:
                if row.failed:
                    await self.audit_service.log_point_failed(point.index, point.protocol.value, row.binding)
                else:
                    await self.audit_service.log_point_evaluated(point.index, point.protocol.value, row.rate_bpcu)

        if self.audit_service:
            await self.audit_service.log_sweep_completed(spec.kind.value, len(table.rows), len(table.failed_rows))
        logger.info(f"Sweep finished: {len(table.rows)} rows, {len(table.failed_rows)} failed")
        return table

    @staticmethod
    def _geometries(spec: SweepSpec, value: float):
        """(n_relays, r, theta) combinations behind one grid value."""
        if spec.kind == SweepKind.TWO_RELAY_DISTANCE:
            return [(2, value, spec.theta)]
        if spec.kind == SweepKind.SINGLE_RELAY_DISTANCE:
            return [(1, value, spec.theta)]
        if spec.kind == SweepKind.RELAY_COUNT:
            n = int(round(value))
            return [(n, 1.0 / (n + 1), spec.theta)]
        if spec.kind == SweepKind.PATH_LOSS:
            return [(n, 1.0 / (n + 1), value) for n in PATH_LOSS_RELAY_COUNTS]
        return [(spec.n_relays, spec.r, spec.theta)]
