"""
DF service - partial decode-and-forward rates for fixed and random schedules.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.exceptions import InfeasibleScheduleError
from src.models.network import (
    MessageAmplitudeTable, MessageId, NetworkConfig, PowerAllocation,
    StateDistribution, StateVector, max_transmitters, supported_messages,
)
from src.models.rate import Binding, OutputStatus, RateBreakdown
from src.services.channel_service import ChannelService
from src.services.entropy_service import EntropyService

logger = logging.getLogger(__name__)

# (sender, nodes whose state the receiver knows)
CutTerm = Tuple[int, List[int]]


def receiver_label(receiver: int, num_relays: int) -> str:
    return "d" if receiver == num_relays + 1 else str(receiver)


class DFService:
    """
    Partial decode-and-forward with superposition levels.

    The source splits its message into K levels; relay j decodes levels
    1..min(j, K) and forwards them with the help of the source and relays
    k..j. Relays are numbered in decoding order (see NetworkConfig.ordered).
    """

    def __init__(
        self,
        channel_service: Optional[ChannelService] = None,
        entropy_service: Optional[EntropyService] = None,
    ):
        self.channel_service = channel_service or ChannelService()
        self.entropy_service = entropy_service or EntropyService()

    def df_rate(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        state_dist: StateDistribution,
        num_levels: Optional[int] = None,
    ) -> RateBreakdown:
        """
        Achievable rate of partial DF for one parameter point.

        Level 1 is limited by every receiver l in 1..N+1, level k >= 2 by
        l in k..N+1; each limit adds the Q terms of the source and of the
        relays that forward the level before l.

        Args:
            config: Network; relay_order is applied first
            alloc: Power fractions with alloc.num_levels levels
            state_dist: State distribution (fixed or random)
            num_levels: Number of levels K (defaults to alloc.num_levels)

        Returns:
            RateBreakdown with one rate and one binding cut per level
        """
        num_levels = num_levels or alloc.num_levels
        self._check_inputs(config, alloc, state_dist, num_levels)
        config = config.ordered()
        tables = self._tables(config, alloc, [state for state, _ in state_dist.items()])

        per_level = []
        binding = []
        for level in range(1, num_levels + 1):
            best_value, best_receiver = math.inf, None
            for receiver, terms in self.cut_terms(config.num_relays, level):
                value = sum(
                    self._q(config, tables, state_dist, level, sender, receiver, known)
                    for sender, known in terms
                )
                if value < best_value:
                    best_value, best_receiver = value, receiver
            per_level.append(max(best_value, 0.0))
            binding.append(Binding(level=level, term=receiver_label(best_receiver, config.num_relays)))

        return RateBreakdown(
            protocol="df",
            per_level=per_level,
            total=sum(per_level),
            binding=binding,
        )

    def constraint_coefficients(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        codes: Sequence[str],
        num_levels: Optional[int] = None,
    ) -> Dict[Tuple[int, int], np.ndarray]:
        """
        Per-state value of every DF cut under a fixed schedule.

        With known states each cut equals sum_m p_m * a[level, l, m], so the
        state pmf can be chosen by a linear program.

        Args:
            config: Network; relay_order is applied first
            alloc: Power fractions
            codes: Candidate state codes
            num_levels: Number of levels K

        Returns:
            {(level, receiver): array over codes}
        """
        num_levels = num_levels or alloc.num_levels
        config = config.ordered()
        states = [StateVector.from_code(code) for code in codes]
        tables = self._tables(config, alloc, states)
        coefficients = {}
        for level in range(1, num_levels + 1):
            for receiver, terms in self.cut_terms(config.num_relays, level):
                row = np.zeros(len(states))
                for index, state in enumerate(states):
                    for sender, _ in terms:
                        pair = self._variance_pair(config, tables[state.code], level, sender, receiver)
                        if pair is not OutputStatus.NO_OUTPUT:
                            row[index] += math.log2(pair[0] / pair[1])
                coefficients[(level, receiver)] = row
        return coefficients

    def apply_reuse_constraint(self, state_dist: StateDistribution, k: int) -> StateDistribution:
        """
        Remove states with more than floor((N+1)/k) transmitters and renormalize.

        Args:
            state_dist: Distribution to filter
            k: Reuse factor (1 allows every state)

        Returns:
            Filtered distribution carrying reuse_factor=k
        """
        if k < 1:
            raise ValueError("Reuse factor must be at least 1")
        limit = max_transmitters(state_dist.num_relays, k)
        kept = {code: p for code, p in state_dist.pmf.items() if code.count("T") <= limit}
        if all(code.count("T") <= limit for code, p in state_dist.pmf.items() if p > 0):
            return state_dist.model_copy(update={"reuse_factor": k})
        if sum(kept.values()) <= 0:
            raise InfeasibleScheduleError(
                f"No state with at most {limit} transmitters has positive probability (reuse 1/{k})"
            )
        codes = sorted(kept)
        logger.debug(f"Reuse 1/{k} keeps {len(codes)} of {len(state_dist.pmf)} states")
        return StateDistribution.from_weights(
            state_dist.num_relays,
            codes,
            [kept[c] for c in codes],
            knowledge_mode=state_dist.knowledge_mode,
            reuse_factor=k,
        )

    @staticmethod
    def cut_terms(num_relays: int, level: int) -> List[Tuple[int, List[CutTerm]]]:
        """
        Receivers limiting a level and the (sender, known nodes) terms of each.

        Known node sets are relays i..N (written L_i); level 1 uses L_1 for the
        source and L_{j+1} for relay j, higher levels use every node for the
        source and L_j for relay j.
        """
        destination = num_relays + 1

        def relays_from(i: int) -> List[int]:
            return list(range(i, num_relays + 1))

        cuts = []
        for receiver in range(level, destination + 1):
            if level == 1:
                terms = [(0, relays_from(1))] + [(j, relays_from(j + 1)) for j in range(1, receiver)]
            else:
                terms = [(0, list(range(0, num_relays + 1)))] + [(j, relays_from(j)) for j in range(level, receiver)]
            cuts.append((receiver, terms))
        return cuts

    @staticmethod
    def unknown_after(num_relays: int, num_levels: int, sender: int, level: int, receiver: int) -> Set[MessageId]:
        """
        Messages still interfering at the receiver once (sender, level) is decoded.

        Source messages: higher source levels and the levels above the
        receiver's index carried by relays after it. Relay j's messages:
        all source levels, every level of relays before j, higher levels of
        relay j and the levels above the receiver's index of relays after it.
        """
        existing = supported_messages(num_relays, num_levels)
        unknown = set()
        for message in existing:
            origin, k = message
            if sender == 0:
                if origin == 0 and k > level:
                    unknown.add(message)
            else:
                if origin == 0 or 1 <= origin < sender or (origin == sender and k > level):
                    unknown.add(message)
            if origin > receiver and k > receiver:
                unknown.add(message)
        unknown.discard(MessageId(sender, level))
        return unknown

    def _check_inputs(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        state_dist: StateDistribution,
        num_levels: int,
    ) -> None:
        if num_levels > config.num_relays + 1:
            raise ValueError(f"At most {config.num_relays + 1} levels are possible with {config.num_relays} relays")
        if alloc.num_levels != num_levels:
            raise ValueError(f"Power allocation has {alloc.num_levels} levels, expected {num_levels}")
        if alloc.num_relays != config.num_relays or state_dist.num_relays != config.num_relays:
            raise ValueError("Network, allocation and state distribution disagree on the number of relays")

    def _tables(
        self,
        config: NetworkConfig,
        alloc: PowerAllocation,
        states: Sequence[StateVector],
    ) -> Dict[str, MessageAmplitudeTable]:
        gains = self.channel_service.build_gains(config)
        return {
            state.code: self.channel_service.amplitude_table(config, alloc, state, gains)
            for state in states
        }

    def _variance_pair(
        self,
        config: NetworkConfig,
        table: MessageAmplitudeTable,
        level: int,
        sender: int,
        receiver: int,
    ):
        unknown = self.unknown_after(config.num_relays, config.num_relays + 1, sender, level, receiver)
        known_after = [m for m in table.messages if m not in unknown]
        after = self.channel_service.residual_variance(config, table, receiver, known_after)
        if after is OutputStatus.NO_OUTPUT:
            return OutputStatus.NO_OUTPUT
        known_before = [m for m in known_after if m != MessageId(sender, level)]
        before = self.channel_service.residual_variance(config, table, receiver, known_before)
        return before, after

    def _q(
        self,
        config: NetworkConfig,
        tables: Dict[str, MessageAmplitudeTable],
        state_dist: StateDistribution,
        level: int,
        sender: int,
        receiver: int,
        known: List[int],
    ) -> float:
        return self.entropy_service.q_mutual(
            level, sender, receiver, known, state_dist,
            lambda state: self._variance_pair(config, tables[state.code], level, sender, receiver),
        )
