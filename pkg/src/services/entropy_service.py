"""
Entropy service - differential entropy of exponential mixtures and the DF
mutual-information function Q.
"""
import logging
import math
from collections import defaultdict
from typing import Callable, Collection, Dict, List, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from src.exceptions import QuadratureError
from src.models.network import StateDistribution, StateVector
from src.models.quantization import MixtureSpec
from src.models.rate import OutputStatus

logger = logging.getLogger(__name__)

LOG2E = 1.0 / math.log(2.0)
WEIGHT_FLOOR = 1e-15
TAIL_TOLERANCE = 1e-10
MAX_ERROR = 1e-8

VarianceProvider = Callable[[StateVector], Union[Tuple[float, float], OutputStatus]]


def gaussian_entropy(variance: float) -> float:
    """log2(pi e sigma^2), the entropy of a circular complex Gaussian."""
    return math.log2(math.pi * math.e * variance)


class EntropyService:
    """Numerical entropies of exponential power mixtures."""

    def __init__(self, epsabs: float = 1e-11, limit: int = 200):
        self.epsabs = epsabs
        self.limit = limit

    def mixture_entropy(self, mix: MixtureSpec) -> float:
        """
        Differential entropy in bits of a complex Gaussian mixture.

        The output power density is sum_j a_j/(pi s_j) exp(-y/s_j); the
        entropy is -pi * integral over y >= 0 of p log2 p.

        Args:
            mix: Mixture weights and variances

        Returns:
            Entropy in bits, absolute error below 1e-8
        """
        return self.entropy_of(mix.weights, mix.variances)

    def entropy_of(self, weights: np.ndarray, variances: np.ndarray) -> float:
        weights = np.asarray(weights, dtype=float)
        variances = np.asarray(variances, dtype=float)
        keep = weights >= WEIGHT_FLOOR
        weights, variances = weights[keep], variances[keep]
        weights = weights / weights.sum()

        # merge components sharing a variance
        unique, inverse = np.unique(variances, return_inverse=True)
        if len(unique) < len(variances):
            weights = np.bincount(inverse, weights=weights)
            variances = unique
        if len(variances) == 1 or np.allclose(variances, variances[0], rtol=1e-13, atol=0.0):
            return gaussian_entropy(float(np.dot(weights, variances)))

        # rescale by the largest variance so every rate r_j >= 1
        reference = float(variances.max())
        rates = reference / variances
        log_coeffs = np.log(weights * rates)

        def integrand(t: float) -> float:
            log_q = logsumexp(log_coeffs - rates * t)
            return -math.exp(log_q) * log_q * LOG2E

        upper = self._truncation_point(float(np.dot(weights, rates)))
        breakpoints = sorted({min(c / r, upper / 2) for r in rates for c in (1.0, 5.0)})
        value, error = integrate.quad(
            integrand, 0.0, upper,
            points=breakpoints, limit=self.limit, epsabs=self.epsabs, epsrel=1e-12,
        )
        if error > MAX_ERROR:
            raise QuadratureError("Mixture entropy integral did not converge", error_estimate=error)
        return math.log2(math.pi * reference) + value

    @staticmethod
    def _truncation_point(coefficient_sum: float) -> float:
        """
        Smallest T (step 5, from 40) whose tail bound is below TAIL_TOLERANCE.

        q(t) <= R exp(-t) with R = sum a_j r_j, and -q log q is increasing
        below 1/e, so the tail is at most R e^{-T} (T + 1 - ln R) / ln 2.
        """
        upper = 40.0
        log_r = math.log(coefficient_sum)
        while True:
            bound_q = coefficient_sum * math.exp(-upper)
            tail = bound_q * (upper + 1.0 - log_r) * LOG2E
            if bound_q < 1.0 / math.e and tail < TAIL_TOLERANCE:
                return upper
            upper += 5.0

    def mixture_entropy_bounds(self, mix: MixtureSpec) -> Tuple[float, float]:
        """
        Log-sum lower bound and Jensen upper bound of the mixture entropy.

        Returns:
            (sum a_j log2(pi e s_j), log2(pi e sum a_j s_j))
        """
        weights, variances = mix.weights, mix.variances
        lower = float(sum(w * gaussian_entropy(v) for w, v in zip(weights, variances) if w > 0))
        upper = gaussian_entropy(float(np.dot(weights, variances)))
        return lower, upper

    def q_mutual(
        self,
        level: int,
        sender: int,
        receiver: int,
        known_nodes: Collection[int],
        state_dist: StateDistribution,
        variances: VarianceProvider,
    ) -> float:
        """
        Mutual information carried by message (sender, level) at a receiver.

        Only states in which the receiver listens contribute. The receiver
        always knows its own state and those of known_nodes; the "after"
        term also conditions on the sender's state. For a fixed schedule
        every state is known and each term is log2(before/after).

        Args:
            level: Message level (for logging only; the conditioning sets carry the semantics)
            sender: Node whose message is decoded
            receiver: Decoding node
            known_nodes: Nodes whose states the receiver knows
            state_dist: State distribution
            variances: Maps a state to (variance before, variance after) decoding

        Returns:
            Mutual information in bits, clipped at zero
        """
        if state_dist.is_fixed:
            total = 0.0
            for state, p in state_dist.items():
                pair = variances(state)
                if pair is OutputStatus.NO_OUTPUT:
                    continue
                before, after = pair
                total += p * math.log2(before / after)
            return max(total, 0.0)

        before_known = set(known_nodes) | {receiver}
        after_known = before_known | {sender}
        before_groups: Dict[Tuple, List[Tuple[float, float]]] = defaultdict(list)
        after_groups: Dict[Tuple, List[Tuple[float, float]]] = defaultdict(list)
        for state, p in state_dist.items():
            pair = variances(state)
            if pair is OutputStatus.NO_OUTPUT:
                continue
            before, after = pair
            before_groups[self._group_key(state, before_known)].append((p, before))
            after_groups[self._group_key(state, after_known)].append((p, after))

        value = self._grouped_entropy(before_groups) - self._grouped_entropy(after_groups)
        if value < -1e-9:
            logger.debug(f"Q({level}, {sender}->{receiver}) = {value:.3e} clipped to 0")
        return max(value, 0.0)

    @staticmethod
    def _group_key(state: StateVector, nodes: Collection[int]) -> Tuple:
        return tuple(state.transmits(n) for n in sorted(nodes) if n < len(state))

    def _grouped_entropy(self, groups: Dict[Tuple, List[Tuple[float, float]]]) -> float:
        total = 0.0
        for members in groups.values():
            probabilities = np.array([p for p, _ in members])
            mass = probabilities.sum()
            if mass <= 0:
                continue
            total += mass * self.entropy_of(probabilities / mass, np.array([v for _, v in members]))
        return total
