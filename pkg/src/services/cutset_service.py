"""
Cut-set service - half-duplex cut-set upper bound for fixed schedules.
"""
import itertools
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.models.network import CombiningMode, NetworkConfig, StateDistribution, StateVector
from src.models.rate import Binding, RateBreakdown
from src.services.cf_service import log2det
from src.services.channel_service import ChannelService

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-12

Correlations = Mapping[Tuple[int, int], float]


def cut_label(cut: Sequence[int]) -> str:
    """'s+1+2' style label of a source-side node set."""
    return "+".join("s" if node == 0 else str(node) for node in cut)


def correlation_pairs(num_relays: int) -> List[Tuple[int, int]]:
    """Transmitter pairs (i, k), i < k, over nodes 0..N."""
    return list(itertools.combinations(range(num_relays + 1), 2))


class CutsetService:
    """
    min over cuts S (s in S, d not in S) of sum_m p(m) log2 det(I + N^-1 H Sigma H^T).

    Per state, H maps the transmitting nodes of S to the listening nodes
    outside S; Sigma is the covariance of those inputs conditioned on the
    inputs of transmitting nodes outside S.
    """

    def __init__(self, channel_service: Optional[ChannelService] = None):
        self.channel_service = channel_service or ChannelService()

    def cutset_bound(
        self,
        config: NetworkConfig,
        state_dist: StateDistribution,
        input_correlations: Optional[Correlations] = None,
    ) -> RateBreakdown:
        """
        Cut-set bound for one schedule and one input correlation choice.

        Args:
            config: Network geometry and powers
            state_dist: Fixed schedule
            input_correlations: {(i, k): rho} for node pairs; missing pairs are independent

        Returns:
            RateBreakdown whose binding term labels the minimizing cut
        """
        if not state_dist.is_fixed:
            raise ValueError("The cut-set bound is evaluated for fixed schedules only")
        if state_dist.num_relays != config.num_relays:
            raise ValueError("Network and state distribution disagree on the number of relays")
        codes = [state.code for state, _ in state_dist.items()]
        weights = np.array([p for _, p in state_dist.items()])
        rows = self.cut_coefficients(config, codes, input_correlations)

        label, value = min(((lbl, float(weights @ row)) for lbl, row in rows.items()), key=lambda kv: kv[1])
        value = max(value, 0.0)
        return RateBreakdown(
            protocol="cutset",
            per_level=[value],
            total=value,
            binding=[Binding(level=1, term=label)],
        )

    def cut_coefficients(
        self,
        config: NetworkConfig,
        codes: Sequence[str],
        input_correlations: Optional[Correlations] = None,
    ) -> Dict[str, np.ndarray]:
        """
        Per-state value of every cut; the bound is linear in the state pmf.

        Args:
            config: Network geometry and powers
            codes: Candidate state codes
            input_correlations: {(i, k): rho} for node pairs

        Returns:
            {cut label: array over codes}
        """
        correlation = self.correlation_matrix(config, input_correlations)
        gains = self.channel_service.build_gains(config)
        states = [StateVector.from_code(code) for code in codes]
        coefficients = {}
        for cut in self.cuts(config.num_relays):
            coefficients[cut_label(cut)] = np.array(
                [self.cut_value(config, state, cut, correlation, gains) for state in states]
            )
        return coefficients

    @staticmethod
    def cuts(num_relays: int) -> List[Tuple[int, ...]]:
        """Source-side node sets: the source plus any subset of relays."""
        relays = range(1, num_relays + 1)
        return [
            (0,) + subset
            for size in range(num_relays + 1)
            for subset in itertools.combinations(relays, size)
        ]

    def correlation_matrix(self, config: NetworkConfig, input_correlations: Optional[Correlations]) -> np.ndarray:
        """
        Unit-diagonal correlation matrix of nodes 0..N.

        Raises ValueError for coefficients outside [0, 1], for correlations on
        a non-coherent network and for matrices that are not positive semidefinite.
        """
        size = config.num_relays + 1
        matrix = np.eye(size)
        for (i, k), rho in (input_correlations or {}).items():
            if not (0 <= i < size and 0 <= k < size) or i == k:
                raise ValueError(f"Invalid correlation pair ({i}, {k})")
            if not 0.0 <= rho <= 1.0:
                raise ValueError(f"Correlation of nodes {i} and {k} must lie in [0, 1], got {rho}")
            if rho > 0 and config.combining == CombiningMode.NON_COHERENT:
                raise ValueError("Non-coherent networks have independent inputs")
            matrix[i, k] = matrix[k, i] = rho
        if np.linalg.eigvalsh(matrix).min() < -PSD_TOLERANCE:
            raise ValueError("Input correlation matrix is not positive semidefinite")
        return matrix

    def cut_value(
        self,
        config: NetworkConfig,
        state: StateVector,
        cut: Sequence[int],
        correlation: np.ndarray,
        gains: Optional[np.ndarray] = None,
    ) -> float:
        """log2 det(I + N^-1 H Sigma H^T) of one cut in one state."""
        h = self.channel_service.build_gains(config) if gains is None else gains
        inside = set(cut)
        senders = [i for i in sorted(inside) if state.transmits(i)]
        others = [i for i in range(config.num_relays + 1) if i not in inside and state.transmits(i)]
        receivers = [j for j in range(1, config.num_nodes) if j not in inside and state.listens(j)]
        if not senders or not receivers:
            return 0.0

        amplitude = np.sqrt(np.asarray(config.tx_power, dtype=float))
        covariance = correlation * np.outer(amplitude, amplitude)
        sigma = covariance[np.ix_(senders, senders)]
        if others:
            cross = covariance[np.ix_(senders, others)]
            sigma = sigma - cross @ np.linalg.pinv(covariance[np.ix_(others, others)]) @ cross.T
            sigma = (sigma + sigma.T) / 2.0

        channel = h[np.ix_(senders, receivers)].T
        whitening = np.diag(np.array([config.noise(j) for j in receivers]) ** -0.5)
        # det(I + N^-1 H Sigma H^T) = det(I + N^-1/2 H Sigma H^T N^-1/2)
        scaled = whitening @ channel @ sigma @ channel.T @ whitening
        return max(log2det(np.eye(len(receivers)) + (scaled + scaled.T) / 2.0), 0.0)
