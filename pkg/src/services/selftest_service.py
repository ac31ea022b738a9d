"""
Selftest service - invariant checks over the numeric services.
"""
import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.models.network import (
    CombiningMode, NetworkConfig, PowerAllocation, StateDistribution, all_state_codes,
)
from src.models.quantization import MixtureSpec
from src.models.selftest import CheckResult, SelftestReport
from src.services.audit_service import AuditService
from src.services.cf_service import CFService
from src.services.channel_service import ChannelService
from src.services.cutset_service import CutsetService
from src.services.df_service import DFService
from src.services.entropy_service import EntropyService

logger = logging.getLogger(__name__)

GOLDEN_SINGLE_HOP = (3.45943, 4.39232, 4.95420, 5.35755, 5.67243, 5.93074, 6.14975)
TIGHTNESS_INSTANCES = 100
TIGHTNESS_TOLERANCE = 1e-6

Check = Callable[[], Tuple[bool, str]]


class SelftestService:
    """
    Runs the invariant suite and reports every check.

    A check that raises is reported as failed; the remaining checks still run.
    """

    def __init__(
        self,
        channel_service: Optional[ChannelService] = None,
        entropy_service: Optional[EntropyService] = None,
        df_service: Optional[DFService] = None,
        cf_service: Optional[CFService] = None,
        cutset_service: Optional[CutsetService] = None,
        audit_service: Optional[AuditService] = None,
        seed: int = 7,
    ):
        self.channel_service = channel_service or ChannelService()
        self.entropy_service = entropy_service or EntropyService()
        self.df_service = df_service or DFService(self.channel_service, self.entropy_service)
        self.cf_service = cf_service or CFService(self.channel_service)
        self.cutset_service = cutset_service or CutsetService(self.channel_service)
        self.audit_service = audit_service
        self.seed = seed

    def checks(self) -> List[Tuple[str, Check]]:
        return [
            ("gain_monotonicity", self.check_gain_monotonicity),
            ("entropy_closed_form", self.check_entropy_closed_form),
            ("entropy_sandwich", self.check_entropy_sandwich),
            ("entropy_scale", self.check_entropy_scale),
            ("single_hop_golden", self.check_single_hop_golden),
            ("reuse_filtering", self.check_reuse_filtering),
            ("cf_feasibility_tightness", self.check_cf_tightness),
            ("coherent_combining_gain", self.check_coherent_gain),
            ("df_below_cutset", self.check_df_below_cutset),
        ]

    async def run(self) -> SelftestReport:
        """
        Execute every check.

        Returns:
            SelftestReport with one CheckResult per check
        """
        report = SelftestReport()
        for name, check in self.checks():
            try:
                passed, detail = check()
            except Exception as e:
                logger.error(f"Check {name} raised: {e}", exc_info=True)
                passed, detail = False, f"{type(e).__name__}: {e}"
            report.checks.append(CheckResult(name=name, passed=passed, detail=detail))
            logger.info(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

        if self.audit_service:
            await self.audit_service.log_selftest(report.passed, report.failed)
        logger.info(f"Selftest finished: {report.passed} passed, {report.failed} failed")
        return report

    def check_gain_monotonicity(self) -> Tuple[bool, str]:
        config = NetworkConfig.from_positions([0.0, 0.1, 0.3, 0.6, 1.0])
        gains = self.channel_service.build_gains(config)
        from_source = gains[0, 1:]
        ok = bool(np.all(np.diff(from_source) < 0)) and np.allclose(gains, gains.T)
        return ok, f"source gains {np.round(from_source, 3).tolist()}"

    def check_entropy_closed_form(self) -> Tuple[bool, str]:
        worst = 0.0
        for variance in (1e-3, 1e-1, 1.0, 10.0, 1e3):
            value = self.entropy_service.mixture_entropy(MixtureSpec.from_pairs([(1.0, variance)]))
            worst = max(worst, abs(value - math.log2(math.pi * math.e * variance)))
        return worst <= 1e-9, f"max deviation {worst:.2e}"

    def check_entropy_sandwich(self) -> Tuple[bool, str]:
        rng = np.random.default_rng(self.seed)
        for _ in range(20):
            weights = rng.dirichlet(np.ones(3))
            variances = 10.0 ** rng.uniform(-2, 3, size=3)
            mix = MixtureSpec.from_pairs(list(zip(weights.tolist(), variances.tolist())))
            lower, upper = self.entropy_service.mixture_entropy_bounds(mix)
            value = self.entropy_service.mixture_entropy(mix)
            if not lower - 1e-9 <= value <= upper + 1e-9:
                return False, f"{value:.6f} outside [{lower:.6f}, {upper:.6f}]"
        return True, "20 random mixtures inside their bounds"

    def check_entropy_scale(self) -> Tuple[bool, str]:
        mix = MixtureSpec.from_pairs([(0.3, 1.0), (0.7, 20.0)])
        scaled = MixtureSpec.from_pairs([(0.3, 8.0), (0.7, 160.0)])
        shift = self.entropy_service.mixture_entropy(scaled) - self.entropy_service.mixture_entropy(mix)
        return abs(shift - 3.0) <= 1e-8, f"entropy shift {shift:.10f} for power x8"

    def check_single_hop_golden(self) -> Tuple[bool, str]:
        worst = 0.0
        for n, expected in enumerate(GOLDEN_SINGLE_HOP):
            base = NetworkConfig.from_positions([0.0, 1.0])
            base = base.with_source_power((n + 1) * base.tx_power[0])
            rate = self.df_service.df_rate(
                base, PowerAllocation.source_only(0), StateDistribution.deterministic("T")
            ).total
            worst = max(worst, abs(rate - expected))
        return worst <= 1e-4, f"max deviation {worst:.2e}"

    def check_reuse_filtering(self) -> Tuple[bool, str]:
        uniform = StateDistribution.uniform(2)
        filtered = self.df_service.apply_reuse_constraint(uniform, 3)
        kept = [state.code for state, _ in filtered.items()]
        ok = all(code.count("T") <= 1 for code in kept) and math.isclose(sum(filtered.pmf.values()), 1.0)
        return ok, f"kept {kept}"

    def check_cf_tightness(self) -> Tuple[bool, str]:
        rng = np.random.default_rng(self.seed)
        codes = all_state_codes(2)
        worst = 0.0
        for _ in range(TIGHTNESS_INSTANCES):
            config = NetworkConfig.two_relay_line(float(rng.uniform(0.05, 0.95)))
            dist = StateDistribution.from_weights(2, codes, rng.dirichlet(np.ones(len(codes))))
            omega = [float(w) for w in rng.uniform(0.2, 1.0, size=2)]
            alloc = PowerAllocation.from_fractions(2, 1, {(0, 0, 1): 1.0}, omega=omega)
            quant = self.cf_service.solve_quantization_noise(config, alloc, dist)
            for relay in (1, 2):
                nhat = quant.nhat[relay - 1]
                if not math.isfinite(nhat):
                    continue
                lhs, rhs = self.cf_service.feasibility_sides(config, alloc, quant, dist, relay)
                if lhs > rhs + TIGHTNESS_TOLERANCE:
                    return False, f"relay {relay} violates its constraint by {lhs - rhs:.2e}"
                if nhat > 1e-5:
                    worst = max(worst, abs(lhs - rhs))
        return worst <= TIGHTNESS_TOLERANCE, f"max gap {worst:.2e} bits over {TIGHTNESS_INSTANCES} instances"

    def check_coherent_gain(self) -> Tuple[bool, str]:
        alloc = PowerAllocation.from_fractions(1, 1, {(0, 0, 1): 0.5, (0, 1, 1): 0.5, (1, 1, 1): 1.0})
        dist = StateDistribution(num_relays=1, pmf={"TL": 0.5, "TT": 0.5})
        rates = {}
        for mode in CombiningMode:
            config = NetworkConfig.single_relay_line(0.5, combining=mode)
            rates[mode] = self.df_service.df_rate(config, alloc, dist).total
        coherent, non_coherent = rates[CombiningMode.COHERENT], rates[CombiningMode.NON_COHERENT]
        return coherent >= non_coherent - 1e-12, f"coherent {coherent:.5f} vs non-coherent {non_coherent:.5f}"

    def check_df_below_cutset(self) -> Tuple[bool, str]:
        alloc = PowerAllocation.from_fractions(1, 1, {(0, 0, 1): 0.6, (0, 1, 1): 0.4, (1, 1, 1): 1.0})
        for r in (-0.5, 0.0, 0.25, 0.5, 0.75, 1.5):
            config = NetworkConfig.single_relay_line(r)
            for p in (0.2, 0.5, 0.8):
                dist = StateDistribution(num_relays=1, pmf={"TL": p, "TT": 1.0 - p})
                df = self.df_service.df_rate(config, alloc, dist).total
                bound = self.cutset_service.cutset_bound(config, dist).total
                if df > bound + 1e-9:
                    return False, f"r={r}, p={p}: DF {df:.5f} above cut-set {bound:.5f}"
        return True, "18 points"
