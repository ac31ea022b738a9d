"""
Channel service - gains, message amplitudes and second-order receive statistics.
"""
import logging
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from src.models.network import (
    CombiningMode, MessageAmplitudeTable, MessageId, NetworkConfig,
    PowerAllocation, ReceiveStats, StateVector, supported_messages,
)
from src.models.rate import OutputStatus

logger = logging.getLogger(__name__)


class ChannelService:
    """
    Second-order statistics shared by every protocol.

    All methods are pure; a single instance can be used from many workers.
    """

    def build_gains(self, config: NetworkConfig) -> np.ndarray:
        """
        Gain matrix h[l'][l] = d[l'][l]^(-theta/2); the diagonal is zero.

        Args:
            config: Network geometry and path loss

        Returns:
            (N+2)x(N+2) array of amplitude gains
        """
        distance = np.asarray(config.distance, dtype=float)
        off_diagonal = ~np.eye(config.num_nodes, dtype=bool)
        if np.any(distance[off_diagonal] <= 0):
            raise ValueError("Distances between distinct nodes must be positive")
        gains = np.zeros_like(distance)
        gains[off_diagonal] = distance[off_diagonal] ** (-config.path_loss_exponent / 2.0)
        return gains

    def amplitude_table(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        state: StateVector,
        gains: Optional[np.ndarray] = None,
    ) -> MessageAmplitudeTable:
        """
        Amplitude of every message at every node for one state.

        A relay message is only emitted while its originating relay
        transmits, and each co-sender contributes only while it transmits.
        CF broadcast messages (level 0) are sent by their relay alone.

        Args:
            config: Network (relay order already applied)
            alloc: Power fractions nu and broadcast fractions omega
            state: Listen/transmit state of nodes 0..N
            gains: Precomputed gain matrix, built from config when omitted

        Returns:
            MessageAmplitudeTable with zero columns for transmitting nodes
        """
        if len(state) != config.num_relays + 1:
            raise ValueError(f"State {state.code} does not match a network with {config.num_relays} relays")
        h = self.build_gains(config) if gains is None else gains
        shares = alloc.share_map()
        coherent = config.combining == CombiningMode.COHERENT

        row_messages = []
        rows = []
        senders = dict(supported_messages(config.num_relays, alloc.num_levels))
        for relay in range(1, config.num_relays + 1):
            if alloc.broadcast_fraction(relay) > 0:
                senders[MessageId(relay, 0)] = [relay]

        for message, supporters in senders.items():
            if message.origin > 0 and not state.transmits(message.origin):
                continue
            contributions = []
            for supporter in supporters:
                if not state.transmits(supporter):
                    continue
                if message.level == 0:
                    fraction = alloc.broadcast_fraction(supporter)
                else:
                    fraction = shares.get((supporter, message.origin, message.level), 0.0)
                if fraction <= 0:
                    continue
                contributions.append(h[supporter] * np.sqrt(fraction * config.tx_power[supporter]))
            if not contributions:
                continue
            if coherent:
                row_messages.append(message)
                rows.append(np.sum(contributions, axis=0))
            else:
                row_messages.extend([message] * len(contributions))
                rows.extend(contributions)

        amplitudes = np.array(rows, dtype=float).reshape(len(rows), config.num_nodes)
        for node in range(config.num_relays + 1):
            if state.transmits(node):
                amplitudes[:, node] = 0.0
        return MessageAmplitudeTable(
            state=state,
            combining=config.combining,
            row_messages=row_messages,
            amplitudes=amplitudes,
        )

    def second_order_stats(
        self,
        table: MessageAmplitudeTable,
        senders: Optional[Iterable[MessageId]],
        receivers: Union[int, Tuple[int, int]],
    ) -> ReceiveStats:
        """
        Received powers and output covariance caused by a message set.

        V_l = sum of a[msg][l]^2 over the rows, C = sum of a[msg][l] a[msg][l'].

        Args:
            table: Amplitudes for one state
            senders: Messages to include (None = every message)
            receivers: A node or a pair of nodes

        Returns:
            ReceiveStats; a single receiver yields (V, V, V)
        """
        first, second = (receivers, receivers) if isinstance(receivers, int) else receivers
        rows = table.rows_of(senders)
        if rows.size == 0:
            return ReceiveStats(0.0, 0.0, 0.0)
        a_first = rows[:, first]
        a_second = rows[:, second]
        return ReceiveStats(
            float(a_first @ a_first),
            float(a_second @ a_second),
            float(a_first @ a_second),
        )

    def covariance_block(
        self,
        table: MessageAmplitudeTable,
        senders: Optional[Iterable[MessageId]],
        receivers: Sequence[int],
    ) -> np.ndarray:
        """Matrix of output covariances over several receivers, without noise."""
        rows = table.rows_of(senders)
        if rows.size == 0:
            return np.zeros((len(receivers), len(receivers)))
        block = rows[:, list(receivers)]
        return block.T @ block

    def received_power(
        self,
        table: MessageAmplitudeTable,
        messages: Iterable[MessageId],
        receiver: int,
    ) -> float:
        rows = table.rows_of(messages)
        if rows.size == 0:
            return 0.0
        column = rows[:, receiver]
        return float(column @ column)

    def residual_variance(
        self,
        config: NetworkConfig,
        table: MessageAmplitudeTable,
        decoder: int,
        known: Iterable[MessageId],
    ) -> Union[float, OutputStatus]:
        """
        Variance of the decoder's output once the known messages are subtracted.

        Args:
            config: Network providing the decoder noise power
            table: Amplitudes for the state under consideration
            decoder: Receiving node 1..N+1
            known: Messages already decoded and removed

        Returns:
            Noise plus interference power, or OutputStatus.NO_OUTPUT when
            the decoder transmits in this state
        """
        if table.state.transmits(decoder):
            return OutputStatus.NO_OUTPUT
        known_set = set(known)
        unknown = [m for m in table.messages if m not in known_set]
        return config.noise(decoder) + self.received_power(table, unknown, decoder)
