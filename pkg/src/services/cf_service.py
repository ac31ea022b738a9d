"""
CF service - regular-encoding compress-and-forward rates.
"""
import logging
import math
from typing import Collection, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from src.exceptions import CovarianceError
from src.models.network import (
    MessageAmplitudeTable, NetworkConfig, PowerAllocation,
    StateDistribution, StateVector,
)
from src.models.quantization import CovMatrix, QuantizationParams
from src.services.channel_service import ChannelService

logger = logging.getLogger(__name__)

SEARCH_SPAN = 1e12
MAX_ITERATIONS = 200


def log2det(matrix: np.ndarray) -> float:
    """log2 det of a covariance matrix; raises CovarianceError unless positive definite."""
    sign, logdet = np.linalg.slogdet(matrix)
    if sign <= 0:
        raise CovarianceError(f"Covariance matrix of size {matrix.shape[0]} is not positive definite")
    return logdet / math.log(2.0)


class CFService:
    """
    Compress-and-forward with one broadcast codeword per quantization index.

    The source sends a single message; relay j quantizes its output with
    noise variance N̂_j and broadcasts the index with power share omega_j.
    Only fixed schedules are supported.
    """

    def __init__(self, channel_service: Optional[ChannelService] = None):
        self.channel_service = channel_service or ChannelService()

    def build_cov_matrix(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        quant: QuantizationParams,
        state: StateVector,
        unknown_senders: Collection[int],
        quantizers: Collection[int],
    ) -> CovMatrix:
        """
        Covariance of the destination output and the quantized relay outputs.

        Rows are the destination followed by every relay of `quantizers`
        that listens in `state` and has finite quantization noise. Only the
        messages of `unknown_senders` contribute signal power.

        Args:
            config: Network (relay order already applied)
            alloc: Source fraction and broadcast fractions omega
            quant: Quantization noise per relay
            state: Listen/transmit state
            unknown_senders: Nodes whose messages are not yet known
            quantizers: Relays whose quantized outputs are used

        Returns:
            CovMatrix labelled 'd' and relay indices
        """
        table = self.channel_service.amplitude_table(config, alloc, state)
        rows = self._rows(config, state, quantizers, quant.nhat)
        matrix = self._cov_array(config, table, unknown_senders, rows, quant.nhat)
        labels = ["d"] + [str(j) for j in rows]
        return CovMatrix(labels=labels, entries=matrix.tolist())

    def cf_rate(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        quant: QuantizationParams,
        state_dist: StateDistribution,
    ) -> float:
        """
        sum_m p(m) log2(det K_{s,[1:N]}(m) / det K_{empty,[1:N]}(m)).

        Args:
            config: Network; relay_order is applied first
            alloc: Source fraction and broadcast fractions omega
            quant: Quantization noise per relay (from solve_quantization_noise or explicit)
            state_dist: Fixed schedule

        Returns:
            Rate in bits per channel use
        """
        self._check_inputs(config, alloc, quant, state_dist)
        config = config.ordered()
        relays = list(range(1, config.num_relays + 1))
        total = 0.0
        for state, p in state_dist.items():
            table = self.channel_service.amplitude_table(config, alloc, state)
            rows = self._rows(config, state, relays, quant.nhat)
            with_source = log2det(self._cov_array(config, table, [0], rows, quant.nhat))
            without = log2det(self._cov_array(config, table, [], rows, quant.nhat))
            total += p * (with_source - without)
        return max(total, 0.0)

    def solve_quantization_noise(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        state_dist: StateDistribution,
    ) -> QuantizationParams:
        """
        Smallest feasible quantization noise per relay, solved from relay N down to 1.

        Relay r's source-coding side (summed over states where it listens)
        must not exceed its channel-coding side (summed over states where it
        transmits); downstream noises are fixed before relay r is solved.
        A non-positive channel side or a relay that never listens yields +inf.

        Args:
            config: Network; relay_order is applied first
            alloc: Source fraction and broadcast fractions omega
            state_dist: Fixed schedule

        Returns:
            QuantizationParams
        """
        nhat = [math.inf] * config.num_relays
        self._check_inputs(config, alloc, QuantizationParams(nhat=nhat), state_dist)
        config = config.ordered()
        tables = self._tables(config, alloc, state_dist)

        for relay in range(config.num_relays, 0, -1):
            nhat[relay - 1] = self._solve_relay(config, tables, state_dist, relay, nhat)
            logger.debug(f"Relay {relay}: quantization noise {nhat[relay - 1]:.6g}")
        return QuantizationParams(nhat=nhat)

    def feasibility_sides(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        quant: QuantizationParams,
        state_dist: StateDistribution,
        relay: int,
    ) -> Tuple[float, float]:
        """Source-coding and channel-coding sides of relay's constraint at quant."""
        self._check_inputs(config, alloc, quant, state_dist)
        config = config.ordered()
        tables = self._tables(config, alloc, state_dist)
        nhat = list(quant.nhat)
        rhs = self._channel_side(config, tables, state_dist, relay, nhat)
        lhs = self._source_side(config, tables, state_dist, relay, nhat, nhat[relay - 1])
        return lhs, rhs

    def _solve_relay(
        self,
        config: NetworkConfig,
        tables: Dict[str, MessageAmplitudeTable],
        state_dist: StateDistribution,
        relay: int,
        nhat: List[float],
    ) -> float:
        listening = [(s, p) for s, p in state_dist.items() if s.listens(relay)]
        if not listening:
            return math.inf
        rhs = self._channel_side(config, tables, state_dist, relay, nhat)
        if rhs <= 0:
            return math.inf

        scale = config.noise(relay) + max(
            self.channel_service.received_power(tables[s.code], tables[s.code].messages, relay)
            for s, _ in listening
        )
        low, high = math.log(scale / SEARCH_SPAN), math.log(scale * SEARCH_SPAN)

        def excess(log_nhat: float) -> float:
            return self._source_side(config, tables, state_dist, relay, nhat, math.exp(log_nhat)) - rhs

        if excess(high) > 0:
            logger.debug(f"Relay {relay}: channel side {rhs:.3e} too small for any quantization")
            return math.inf
        if excess(low) <= 0:
            return math.exp(low)
        root = optimize.brentq(excess, low, high, xtol=1e-13, rtol=1e-14, maxiter=MAX_ITERATIONS)
        return math.exp(root)

    def _source_side(
        self,
        config: NetworkConfig,
        tables: Dict[str, MessageAmplitudeTable],
        state_dist: StateDistribution,
        relay: int,
        nhat: Sequence[float],
        candidate: float,
    ) -> float:
        if not math.isfinite(candidate):
            return 0.0
        trial = list(nhat)
        trial[relay - 1] = candidate
        upstream = list(range(0, relay))
        downstream = list(range(relay, config.num_relays + 1))
        total = 0.0
        for state, p in state_dist.items():
            if state.transmits(relay):
                continue
            table = tables[state.code]
            interference = self._sender_power(table, downstream, relay)
            own = self._sender_power(table, upstream, relay) + candidate + config.noise(relay)
            with_relay = log2det(self._cov_array(config, table, upstream, self._rows(config, state, downstream, trial), trial))
            without = log2det(self._cov_array(config, table, upstream, self._rows(config, state, downstream[1:], trial), trial))
            total += p * (math.log2(1.0 + interference / own) + with_relay - math.log2(candidate) - without)
        return total

    def _channel_side(
        self,
        config: NetworkConfig,
        tables: Dict[str, MessageAmplitudeTable],
        state_dist: StateDistribution,
        relay: int,
        nhat: Sequence[float],
    ) -> float:
        downstream = list(range(relay + 1, config.num_relays + 1))
        total = 0.0
        for state, p in state_dist.items():
            if not state.transmits(relay):
                continue
            table = tables[state.code]
            rows = self._rows(config, state, downstream, nhat)
            with_relay = log2det(self._cov_array(config, table, list(range(0, relay + 1)), rows, nhat))
            without = log2det(self._cov_array(config, table, list(range(0, relay)), rows, nhat))
            total += p * (with_relay - without)
        return total

    def _sender_power(self, table: MessageAmplitudeTable, senders: Collection[int], receiver: int) -> float:
        origins = set(senders)
        return self.channel_service.received_power(
            table, [m for m in table.messages if m.origin in origins], receiver
        )

    @staticmethod
    def _rows(
        config: NetworkConfig,
        state: StateVector,
        quantizers: Collection[int],
        nhat: Sequence[float],
    ) -> List[int]:
        return [
            j for j in sorted(quantizers)
            if 1 <= j <= config.num_relays and state.listens(j) and math.isfinite(nhat[j - 1])
        ]

    def _cov_array(
        self,
        config: NetworkConfig,
        table: MessageAmplitudeTable,
        unknown_senders: Collection[int],
        rows: Sequence[int],
        nhat: Sequence[float],
    ) -> np.ndarray:
        origins = set(unknown_senders)
        messages = [m for m in table.messages if m.origin in origins]
        receivers = [config.destination] + list(rows)
        matrix = self.channel_service.covariance_block(table, messages, receivers)
        noise = [config.noise(config.destination)] + [nhat[j - 1] + config.noise(j) for j in rows]
        return matrix + np.diag(noise)

    def _tables(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        state_dist: StateDistribution,
    ) -> Dict[str, MessageAmplitudeTable]:
        gains = self.channel_service.build_gains(config)
        return {
            state.code: self.channel_service.amplitude_table(config, alloc, state, gains)
            for state, _ in state_dist.items()
        }

    @staticmethod
    def _check_inputs(
        config: NetworkConfig,
        alloc: PowerAllocation,
        quant: QuantizationParams,
        state_dist: StateDistribution,
    ) -> None:
        if not state_dist.is_fixed:
            raise ValueError("Compress-and-forward requires a fixed schedule")
        if len(quant.nhat) != config.num_relays:
            raise ValueError(f"Expected {config.num_relays} quantization noises, got {len(quant.nhat)}")
        if alloc.num_relays != config.num_relays or state_dist.num_relays != config.num_relays:
            raise ValueError("Network, allocation and state distribution disagree on the number of relays")
