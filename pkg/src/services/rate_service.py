"""
Rate service - optimized rate of any protocol at one network point.
"""
import itertools
import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.models.config import Protocol
from src.models.network import (
    CombiningMode, KnowledgeMode, NetworkConfig, PowerAllocation, StateDistribution,
    all_state_codes, max_transmitters, supported_messages,
)
from src.models.quantization import CombinedParams
from src.models.rate import Binding, ProtocolResult, RateBreakdown
from src.models.search import ConstraintKind, OptimizationResult, ParameterBlock, SearchSpec
from src.services.audit_service import AuditService
from src.services.cf_service import CFService
from src.services.combined_service import CombinedService
from src.services.cutset_service import CutsetService, correlation_pairs
from src.services.df_service import DFService
from src.services.optimizer_service import OptimizerService

logger = logging.getLogger(__name__)

DF_FAMILY = (Protocol.PARTIAL_DF, Protocol.DF, Protocol.DF_NO_REUSE)
FIXED_SCHEDULE_ONLY = (Protocol.CF, Protocol.COMBINED, Protocol.CUTSET)

FractionKey = Tuple[int, int, int]


def relay_orders(num_relays: int, max_relay_orders: int) -> List[Optional[Tuple[int, ...]]]:
    """All relay decoding orders for small networks; the identity (None) comes first."""
    if num_relays == 0 or num_relays > max_relay_orders:
        return [None]
    orders = list(itertools.permutations(range(1, num_relays + 1)))
    return [None] + orders[1:]


def df_layout(num_relays: int, num_levels: int) -> List[Tuple[int, List[FractionKey]]]:
    """Per transmitting node, the (supporter, origin, level) keys of the messages it sends."""
    messages = supported_messages(num_relays, num_levels)
    layout = []
    for node in range(num_relays + 1):
        keys = [(node, m.origin, m.level) for m, supporters in sorted(messages.items()) if node in supporters]
        if keys:
            layout.append((node, keys))
    return layout


class RateService:
    """
    Builds the search space of each protocol and runs the optimizer over it.

    Fixed-schedule DF and the cut-set bound choose the state pmf with a
    linear program, so only power fractions or input correlations are searched.
    """

    def __init__(
        self,
        df_service: Optional[DFService] = None,
        cf_service: Optional[CFService] = None,
        combined_service: Optional[CombinedService] = None,
        cutset_service: Optional[CutsetService] = None,
        optimizer_service: Optional[OptimizerService] = None,
        audit_service: Optional[AuditService] = None,
    ):
        self.df_service = df_service or DFService()
        self.cf_service = cf_service or CFService()
        self.combined_service = combined_service or CombinedService()
        self.cutset_service = cutset_service or CutsetService()
        self.optimizer_service = optimizer_service or OptimizerService()
        self.audit_service = audit_service

    async def compute_rate(
        self,
        protocol: Protocol,
        config: NetworkConfig,
        schedule: KnowledgeMode = KnowledgeMode.FIXED_SCHEDULE,
        seed: int = 0,
        budget: int = 4000,
        max_relay_orders: int = 3,
    ) -> ProtocolResult:
        """
        Optimized rate of a protocol, recorded in the run ledger.

        Args:
            protocol: Protocol to evaluate
            config: Network point
            schedule: Fixed schedule or random access (DF family only)
            seed: Optimizer seed
            budget: Objective evaluations per branch
            max_relay_orders: Enumerate relay orders up to this many relays

        Returns:
            ProtocolResult with the best rate and its parameters
        """
        result = self.evaluate(protocol, config, schedule, seed, budget, max_relay_orders)
        if self.audit_service:
            await self.audit_service.log_optimization(protocol.value, result.rate, result.evaluations, seed)
        return result

    def evaluate(
        self,
        protocol: Protocol,
        config: NetworkConfig,
        schedule: KnowledgeMode = KnowledgeMode.FIXED_SCHEDULE,
        seed: int = 0,
        budget: int = 4000,
        max_relay_orders: int = 3,
    ) -> ProtocolResult:
        """Synchronous core of compute_rate; safe to call from worker processes."""
        logger.debug(f"Evaluating {protocol.value} ({schedule.value}) with {config.num_relays} relays")
        if protocol in FIXED_SCHEDULE_ONLY and schedule != KnowledgeMode.FIXED_SCHEDULE:
            raise ValueError(f"{protocol.value} requires a fixed schedule; random access applies to the DF family only")
        if protocol in (Protocol.SINGLE_HOP, Protocol.SINGLE_HOP_NORMALIZED):
            return self._single_hop(config, protocol == Protocol.SINGLE_HOP_NORMALIZED, seed)
        if protocol == Protocol.PARTIAL_DF:
            level_one = self._df(Protocol.DF, config, schedule, seed, budget, max_relay_orders)
            return self._df(protocol, config, schedule, seed, budget, max_relay_orders, level_one)
        if protocol in DF_FAMILY:
            return self._df(protocol, config, schedule, seed, budget, max_relay_orders)
        if protocol == Protocol.CF:
            return self._cf(config, seed, budget, max_relay_orders)
        if protocol == Protocol.COMBINED:
            return self._combined(config, seed, budget, max_relay_orders)
        if protocol == Protocol.CUTSET:
            return self._cutset(config, seed, budget)
        raise ValueError(f"Unsupported protocol {protocol}")

    def _single_hop(self, config: NetworkConfig, normalized: bool, seed: int) -> ProtocolResult:
        base = config.without_relays()
        if normalized:
            base = base.with_source_power((config.num_relays + 1) * config.tx_power[0])
        breakdown = self.df_service.df_rate(base, PowerAllocation.source_only(0), StateDistribution.deterministic("T"))
        protocol = Protocol.SINGLE_HOP_NORMALIZED if normalized else Protocol.SINGLE_HOP
        breakdown = breakdown.model_copy(update={"protocol": protocol.value})
        return ProtocolResult(
            protocol=protocol.value,
            rate=breakdown.total,
            breakdown=breakdown,
            params={"source_power": base.tx_power[0]},
            evaluations=1,
            seed=seed,
        )

    def _df(
        self,
        protocol: Protocol,
        config: NetworkConfig,
        schedule: KnowledgeMode,
        seed: int,
        budget: int,
        max_relay_orders: int,
        level_one: Optional[ProtocolResult] = None,
    ) -> ProtocolResult:
        """
        DF family search. A level_one result (single-level DF on the same
        network) seeds the multi-level search at its optimum, embedded with
        all power on level 1.
        """
        n = config.num_relays
        num_levels = n + 1 if protocol == Protocol.PARTIAL_DF else 1
        reuse = n + 1 if protocol == Protocol.DF_NO_REUSE else 1
        limit = max_transmitters(n, reuse)
        codes = [c for c in all_state_codes(n) if c.count("T") <= limit]
        layout = df_layout(n, num_levels)
        blocks = [
            ParameterBlock(name=f"nu_{node}", size=len(keys), kind=ConstraintKind.SUM_CAPPED)
            for node, keys in layout
        ]
        orders = relay_orders(n, max_relay_orders)

        def allocation(values: Dict[str, np.ndarray]) -> PowerAllocation:
            fractions = {}
            for node, keys in layout:
                fractions.update(zip(keys, (float(v) for v in values[f"nu_{node}"])))
            return PowerAllocation.from_fractions(n, num_levels, fractions)

        def schedule_lp(values: Dict[str, np.ndarray], order):
            rows = self.df_service.constraint_coefficients(
                config.with_relay_order(order), allocation(values), codes, num_levels
            )
            return self.optimizer_service.solve_schedule_lp(rows)

        seeded_fractions, seeded_pmf = [], []
        if level_one is not None:
            shares = level_one.params["fractions"]
            seeded_fractions = [shares.get(f"{s},{o},{k}", 0.0) for _, keys in layout for s, o, k in keys]
            seeded_pmf = [level_one.params["pmf"].get(code, 0.0) for code in codes]

        fixed_spec = SearchSpec(
            protocol=protocol.value,
            blocks=blocks,
            branches=orders,
            budget=budget,
            seed=seed,
            warm_starts=[seeded_fractions] if level_one is not None else [],
        )
        fixed = self.optimizer_service.optimize_rate(fixed_spec, lambda values, order: schedule_lp(values, order)[0])
        fixed_values = fixed_spec.split(np.array(fixed.params))
        _, fixed_pmf, _ = schedule_lp(fixed_values, fixed.branch)
        prior_evaluations = level_one.evaluations if level_one is not None else 0

        if schedule == KnowledgeMode.FIXED_SCHEDULE:
            best, values, pmf = fixed, fixed_values, fixed_pmf
            evaluations = prior_evaluations + fixed.evaluations
        else:
            pmf_block = ParameterBlock(name="pmf", size=len(codes), kind=ConstraintKind.SIMPLEX)

            def random_rate(values: Dict[str, np.ndarray], order) -> float:
                dist = StateDistribution.from_weights(n, codes, values["pmf"], KnowledgeMode.RANDOM_ACCESS, reuse)
                return self.df_service.df_rate(
                    config.with_relay_order(order), allocation(values), dist, num_levels
                ).total

            warm_starts = [list(fixed.params) + [float(p) for p in fixed_pmf]]
            if level_one is not None:
                warm_starts.append(seeded_fractions + seeded_pmf)
            random_spec = SearchSpec(
                protocol=f"{protocol.value} random",
                blocks=blocks + [pmf_block],
                branches=orders,
                budget=budget,
                seed=seed,
                warm_starts=warm_starts,
            )
            best = self.optimizer_service.optimize_rate(random_spec, random_rate)
            values = random_spec.split(np.array(best.params))
            pmf = values["pmf"]
            evaluations = prior_evaluations + fixed.evaluations + best.evaluations

        dist = StateDistribution.from_weights(n, codes, pmf, schedule, reuse)
        ordered = config.with_relay_order(best.branch)
        breakdown = self.df_service.df_rate(ordered, allocation(values), dist, num_levels)
        breakdown = breakdown.model_copy(update={"protocol": protocol.value})
        return self._result(protocol, breakdown, best, evaluations, seed, {
            "relay_order": list(best.branch) if best.branch else None,
            "fractions": {f"{s},{o},{k}": f for (s, o, k), f in allocation(values).share_map().items()},
            "pmf": {code: p for code, p in dist.pmf.items() if p > 0},
        })

    def _cf(
        self,
        config: NetworkConfig,
        seed: int,
        budget: int,
        max_relay_orders: int,
    ) -> ProtocolResult:
        n = config.num_relays
        codes = all_state_codes(n)
        blocks = [ParameterBlock(name="pmf", size=len(codes), kind=ConstraintKind.SIMPLEX)]
        if n > 0:
            blocks.append(ParameterBlock(name="omega", size=n))

        def cf_point(values: Dict[str, np.ndarray], order):
            omega = [float(w) for w in values["omega"]] if n > 0 else []
            alloc = PowerAllocation.from_fractions(n, 1, {(0, 0, 1): 1.0}, omega=omega)
            dist = StateDistribution.from_weights(n, codes, values["pmf"])
            ordered = config.with_relay_order(order)
            quant = self.cf_service.solve_quantization_noise(ordered, alloc, dist)
            return self.cf_service.cf_rate(ordered, alloc, quant, dist), quant, dist

        # relays silent: direct link only
        relay_off = [1.0 if code == "T" + "L" * n else 0.0 for code in codes] + [0.5] * n
        spec = SearchSpec(
            protocol=Protocol.CF.value,
            blocks=blocks,
            branches=relay_orders(n, max_relay_orders),
            budget=budget,
            seed=seed,
            warm_starts=[relay_off],
        )
        best = self.optimizer_service.optimize_rate(spec, lambda values, order: cf_point(values, order)[0])
        values = spec.split(np.array(best.params))
        rate, quant, dist = cf_point(values, best.branch)
        breakdown = RateBreakdown(
            protocol=Protocol.CF.value,
            per_level=[rate],
            total=rate,
            binding=[Binding(level=1, term="d")],
            details={f"nhat_{j}": v for j, v in enumerate(quant.nhat, start=1)},
        )
        return self._result(Protocol.CF, breakdown, best, best.evaluations, seed, {
            "relay_order": list(best.branch) if best.branch else None,
            "omega": [float(w) for w in values.get("omega", [])],
            "nhat": list(quant.nhat),
            "pmf": {code: p for code, p in dist.pmf.items() if p > 0},
        })

    def _combined(self, config: NetworkConfig, seed: int, budget: int, max_relay_orders: int) -> ProtocolResult:
        if config.num_relays != 2:
            raise ValueError(f"The combined protocol needs exactly 2 relays, got {config.num_relays}")
        blocks = [
            ParameterBlock(name="p1", size=1),
            ParameterBlock(name="nu_s_s1", size=1),
            ParameterBlock(name="phase_two_source", size=2, kind=ConstraintKind.SUM_CAPPED),
            ParameterBlock(name="nu_1_11", size=1),
            ParameterBlock(name="omega_2", size=1),
        ]
        branches = [
            (order, decode)
            for order in relay_orders(2, max_relay_orders)
            for decode in (False, True)
        ]

        def params_of(values: Dict[str, np.ndarray], decode: bool) -> CombinedParams:
            p1 = float(values["p1"][0])
            nu_s_s2, nu_s_11 = (float(v) for v in values["phase_two_source"])
            return CombinedParams(
                p1=p1,
                p2=1.0 - p1,
                nu_s_s1=float(values["nu_s_s1"][0]),
                nu_s_s2=nu_s_s2,
                nu_s_11=nu_s_11,
                nu_1_11=float(values["nu_1_11"][0]),
                omega_2=float(values["omega_2"][0]),
                decode_interference=decode,
            )

        def combined(values: Dict[str, np.ndarray], branch) -> RateBreakdown:
            order, decode = branch
            return self.combined_service.combined_rate(config.with_relay_order(order), params_of(values, decode))

        spec = SearchSpec(protocol=Protocol.COMBINED.value, blocks=blocks, branches=branches, budget=budget, seed=seed)
        best = self.optimizer_service.optimize_rate(spec, lambda values, branch: combined(values, branch).total)
        values = spec.split(np.array(best.params))
        breakdown = combined(values, best.branch)
        order, decode = best.branch
        return self._result(Protocol.COMBINED, breakdown, best, best.evaluations, seed, {
            "relay_order": list(order) if order else None,
            **params_of(values, decode).model_dump(exclude={"nhat_2"}),
            "nhat_2": breakdown.details["nhat_2"],
        })

    def _cutset(self, config: NetworkConfig, seed: int, budget: int) -> ProtocolResult:
        n = config.num_relays
        codes = all_state_codes(n)
        pairs = correlation_pairs(n) if config.combining == CombiningMode.COHERENT else []
        blocks = [ParameterBlock(name="rho", size=len(pairs))] if pairs else []

        def correlations(values: Dict[str, np.ndarray]) -> Dict[Tuple[int, int], float]:
            return {pair: float(rho) for pair, rho in zip(pairs, values.get("rho", []))}

        def schedule_lp(values: Dict[str, np.ndarray]):
            rows = self.cutset_service.cut_coefficients(config, codes, correlations(values))
            return self.optimizer_service.solve_schedule_lp({(1, label): row for label, row in rows.items()})

        spec = SearchSpec(protocol=Protocol.CUTSET.value, blocks=blocks, budget=budget, seed=seed)
        best = self.optimizer_service.optimize_rate(spec, lambda values, _: schedule_lp(values)[0])
        values = spec.split(np.array(best.params))
        _, pmf, _ = schedule_lp(values)
        dist = StateDistribution.from_weights(n, codes, pmf)
        breakdown = self.cutset_service.cutset_bound(config, dist, correlations(values))
        return self._result(Protocol.CUTSET, breakdown, best, best.evaluations, seed, {
            "correlations": {f"{i},{k}": rho for (i, k), rho in correlations(values).items()},
            "pmf": {code: p for code, p in dist.pmf.items() if p > 0},
        })

    @staticmethod
    def _result(
        protocol: Protocol,
        breakdown: RateBreakdown,
        best: OptimizationResult,
        evaluations: int,
        seed: int,
        params: Dict[str, Any],
    ) -> ProtocolResult:
        logger.info(f"{protocol.value}: {breakdown.total:.5f} bpcu (binding {breakdown.binding_label})")
        return ProtocolResult(
            protocol=protocol.value,
            rate=breakdown.total,
            breakdown=breakdown,
            params=params,
            evaluations=evaluations,
            seed=seed,
        )
