"""
Combined service - alternating two-relay protocol with one DF and one CF relay.

Phase 1 (state TLT, share p1): the source sends X_s1, relay 2 broadcasts
its quantization index while relay 1 listens. Phase 2 (state TTL, share
p2): the source sends a fresh message X_s2 and supports relay 1's codeword
V, which forwards X_s1; relay 2 listens and quantizes.
"""
import logging
import math
from typing import Optional, Tuple

from src.models.network import MessageId, NetworkConfig, PowerAllocation, StateVector
from src.models.quantization import CombinedParams, QuantizationBound, QuantizationParams
from src.models.rate import Binding, RateBreakdown
from src.services.cf_service import CFService, log2det
from src.services.channel_service import ChannelService

logger = logging.getLogger(__name__)

PHASE_ONE = "TLT"
PHASE_TWO = "TTL"

FIRST_MESSAGE = MessageId(0, 1)
FRESH_MESSAGE = MessageId(0, 2)
RELAY_MESSAGE = MessageId(1, 1)
BROADCAST_MESSAGE = MessageId(2, 0)

NOISE_FLOOR_SLACK = 1e-9


def capacity(snr: float) -> float:
    """log2(1 + snr)."""
    return math.log2(1.0 + snr)


class CombinedService:
    """Rates of the alternating DF/CF protocol on a two-relay network."""

    def __init__(
        self,
        channel_service: Optional[ChannelService] = None,
        cf_service: Optional[CFService] = None,
    ):
        self.channel_service = channel_service or ChannelService()
        self.cf_service = cf_service or CFService(self.channel_service)

    def phase_allocations(self, params: CombinedParams) -> Tuple[PowerAllocation, PowerAllocation]:
        """
        Per-phase power allocations.

        X_s1 and X_s2 map onto source levels 1 and 2, V onto relay 1's
        level-1 codeword and relay 2's index onto its broadcast message.
        """
        first = PowerAllocation.from_fractions(
            2, 2, {(0, 0, 1): params.nu_s_s1}, omega=[0.0, params.omega_2]
        )
        second = PowerAllocation.from_fractions(
            2, 2,
            {(0, 0, 2): params.nu_s_s2, (0, 1, 1): params.nu_s_11, (1, 1, 1): params.nu_1_11},
            omega=[0.0, 0.0],
        )
        return first, second

    def quantization_feasibility(self, config: NetworkConfig, params: CombinedParams) -> QuantizationBound:
        """
        Broadcast rates of relay 2 and the smallest admissible quantization noise.

        Args:
            config: Two-relay network; relay_order is applied first
            params: Phase shares and power fractions

        Returns:
            QuantizationBound; nhat_lower is +inf when the broadcast carries nothing
        """
        config = self._checked(config)
        first, second = self._tables(config, params)
        destination = config.destination
        power = self.channel_service.received_power

        rhat_destination = params.p1 * capacity(
            power(first, [BROADCAST_MESSAGE], destination)
            / (config.noise(destination) + power(first, [FIRST_MESSAGE], destination))
        )
        rhat_relay = None
        if params.decode_interference:
            rhat_relay = params.p1 * capacity(
                power(first, [BROADCAST_MESSAGE], 1)
                / (config.noise(1) + power(first, [FIRST_MESSAGE], 1))
            )

        if rhat_destination <= 0 or (rhat_relay is not None and rhat_relay <= 0):
            logger.debug("Relay 2 broadcast carries no rate, quantization switched off")
            return QuantizationBound(rhat_destination, rhat_relay, math.inf)
        if params.p2 <= 0:
            return QuantizationBound(rhat_destination, rhat_relay, 0.0)

        stats = self.channel_service.second_order_stats(second, [FRESH_MESSAGE, RELAY_MESSAGE], (2, destination))
        conditional = (
            stats.power_first + config.noise(2)
            - stats.covariance ** 2 / (stats.power_second + config.noise(destination))
        )
        bound = conditional / math.expm1(rhat_destination / params.p2 * math.log(2.0))
        if rhat_relay is not None:
            fresh = power(second, [FRESH_MESSAGE], 2) + config.noise(2)
            bound = max(bound, fresh / math.expm1(rhat_relay / params.p2 * math.log(2.0)))
        return QuantizationBound(rhat_destination, rhat_relay, bound)

    def combined_rate(self, config: NetworkConfig, params: CombinedParams) -> RateBreakdown:
        """
        R_DF + R_CF for one parameter point.

        Args:
            config: Two-relay network; relay_order is applied first
            params: Protocol parameters; nhat_2=None uses the lower bound

        Returns:
            RateBreakdown with per_level [R_DF, R_CF]
        """
        bound = self.quantization_feasibility(config, params)
        nhat = bound.nhat_lower if params.nhat_2 is None else params.nhat_2
        if nhat < bound.nhat_lower * (1.0 - NOISE_FLOOR_SLACK):
            raise ValueError(
                f"Quantization noise {nhat:.6g} is below its lower bound {bound.nhat_lower:.6g}"
            )

        config = self._checked(config)
        first, second = self._tables(config, params)
        destination = config.destination
        power = self.channel_service.received_power

        direct = params.p1 * capacity(
            power(first, [FIRST_MESSAGE], destination) / config.noise(destination)
        )
        forwarded = 0.0
        if params.p2 > 0:
            _, phase_two = self.phase_allocations(params)
            quant = QuantizationParams(nhat=[math.inf, nhat])
            state = StateVector.from_code(PHASE_TWO)
            before = self.cf_service.build_cov_matrix(config, phase_two, quant, state, [0, 1], [2])
            after = self.cf_service.build_cov_matrix(config, phase_two, quant, state, [0], [2])
            forwarded = params.p2 * (
                log2det(before.as_array()) - log2det(after.as_array())
            )

        relay_noise = config.noise(1)
        if not params.decode_interference:
            relay_noise += power(first, [BROADCAST_MESSAGE], 1)
        relay_cut = params.p1 * capacity(power(first, [FIRST_MESSAGE], 1) / relay_noise)

        destination_cut = direct + forwarded
        rate_df = max(min(destination_cut, relay_cut), 0.0)
        df_term = "d" if destination_cut <= relay_cut else "1"

        rate_cf = 0.0
        if params.p2 > 0:
            via_relay = 0.0 if math.isinf(nhat) else power(second, [FRESH_MESSAGE], 2) / (config.noise(2) + nhat)
            rate_cf = params.p2 * capacity(
                via_relay + power(second, [FRESH_MESSAGE], destination) / config.noise(destination)
            )

        logger.debug(f"Combined rate: DF {rate_df:.5f} ({df_term}), CF {rate_cf:.5f}, nhat {nhat:.4g}")
        return RateBreakdown(
            protocol="combined",
            per_level=[rate_df, rate_cf],
            total=rate_df + rate_cf,
            binding=[Binding(level=1, term=df_term), Binding(level=2, term="cf")],
            details={
                "nhat_2": nhat,
                "rhat_destination": bound.rhat_destination,
                "rhat_relay": bound.rhat_relay if bound.rhat_relay is not None else 0.0,
            },
        )

    def _tables(self, config: NetworkConfig, params: CombinedParams):
        gains = self.channel_service.build_gains(config)
        first_alloc, second_alloc = self.phase_allocations(params)
        first = self.channel_service.amplitude_table(config, first_alloc, StateVector.from_code(PHASE_ONE), gains)
        second = self.channel_service.amplitude_table(config, second_alloc, StateVector.from_code(PHASE_TWO), gains)
        return first, second

    @staticmethod
    def _checked(config: NetworkConfig) -> NetworkConfig:
        if config.num_relays != 2:
            raise ValueError(f"The combined protocol needs exactly 2 relays, got {config.num_relays}")
        return config.ordered()
