"""
Tests for compress-and-forward covariances, quantization noise and rates.
"""
import math

import numpy as np
import pytest

from src.models.network import (
    KnowledgeMode, NetworkConfig, PowerAllocation, StateDistribution,
    StateVector, all_state_codes,
)
from src.models.quantization import QuantizationParams
from src.services.cf_service import CFService


@pytest.fixture
def cf_service():
    """Create CF service fixture."""
    return CFService()


@pytest.fixture
def mid_relay():
    return NetworkConfig.single_relay_line(0.5)


def cf_allocation(omega):
    return PowerAllocation.from_fractions(len(omega), 1, {(0, 0, 1): 1.0}, omega=omega)


class TestCovMatrix:
    """Covariance of destination and quantized relay outputs."""

    def test_all_known_is_diagonal(self, cf_service):
        config = NetworkConfig.two_relay_line(0.3)
        cov = cf_service.build_cov_matrix(
            config, cf_allocation([0.5, 0.5]), QuantizationParams(nhat=[2.0, 3.0]),
            StateVector.from_code("TLL"), [], [1, 2],
        )
        assert cov.labels == ["d", "1", "2"]
        assert np.allclose(cov.as_array(), np.diag([1.0, 3.0, 4.0]))

    def test_single_relay_source_unknown(self, cf_service, mid_relay):
        cov = cf_service.build_cov_matrix(
            mid_relay, cf_allocation([1.0]), QuantizationParams(nhat=[0.5]),
            StateVector.from_code("TL"), [0], [1],
        )
        assert np.allclose(cov.as_array(), [[11.0, 40.0], [40.0, 161.5]])

    def test_infinite_noise_row_dropped(self, cf_service, mid_relay):
        cov = cf_service.build_cov_matrix(
            mid_relay, cf_allocation([1.0]), QuantizationParams.switched_off(1),
            StateVector.from_code("TL"), [0], [1],
        )
        assert cov.labels == ["d"]
        assert cov.entries == [[pytest.approx(11.0)]]

    def test_transmitting_relay_has_no_row(self, cf_service, mid_relay):
        cov = cf_service.build_cov_matrix(
            mid_relay, cf_allocation([1.0]), QuantizationParams(nhat=[0.5]),
            StateVector.from_code("TT"), [0, 1], [1],
        )
        assert cov.labels == ["d"]
        assert cov.entries[0][0] == pytest.approx(10.0 + 160.0 + 1.0)


class TestCFRate:
    """Rates for given quantization noise."""

    def test_relays_off_gives_direct_link(self, cf_service, mid_relay):
        dist = StateDistribution(num_relays=1, pmf={"TL": 0.5, "TT": 0.5})
        rate = cf_service.cf_rate(mid_relay, cf_allocation([1.0]), QuantizationParams.switched_off(1), dist)
        assert rate == pytest.approx(math.log2(11.0), abs=1e-12)

    def test_matches_determinant_oracle(self, cf_service, mid_relay):
        dist = StateDistribution(num_relays=1, pmf={"TL": 0.6, "TT": 0.4})
        rate = cf_service.cf_rate(mid_relay, cf_allocation([1.0]), QuantizationParams(nhat=[2.0]), dist)
        listening = np.linalg.det(np.array([[11.0, 40.0], [40.0, 163.0]])) / 3.0
        assert rate == pytest.approx(0.6 * math.log2(listening) + 0.4 * math.log2(11.0), abs=1e-9)

    def test_non_increasing_in_quantization_noise(self, cf_service):
        config = NetworkConfig.two_relay_line(0.3)
        dist = StateDistribution(num_relays=2, pmf={"TLL": 0.3, "TLT": 0.3, "TTL": 0.4})
        alloc = cf_allocation([1.0, 1.0])
        rates = [
            cf_service.cf_rate(config, alloc, QuantizationParams(nhat=[n, 1.0]), dist)
            for n in (0.1, 1.0, 10.0, 100.0, math.inf)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))
        assert min(rates) >= 0.0

    def test_huge_noise_matches_relay_off(self, cf_service):
        config = NetworkConfig.two_relay_line(0.3)
        dist = StateDistribution(num_relays=2, pmf={"TLL": 0.5, "TTL": 0.5})
        alloc = cf_allocation([1.0, 1.0])
        huge = cf_service.cf_rate(config, alloc, QuantizationParams(nhat=[1e16, 2.0]), dist)
        off = cf_service.cf_rate(config, alloc, QuantizationParams(nhat=[math.inf, 2.0]), dist)
        assert huge == pytest.approx(off, abs=1e-6)

    def test_random_schedule_rejected(self, cf_service, mid_relay):
        dist = StateDistribution(num_relays=1, pmf={"TL": 1.0}, knowledge_mode=KnowledgeMode.RANDOM_ACCESS)
        with pytest.raises(ValueError, match="fixed schedule"):
            cf_service.cf_rate(mid_relay, cf_allocation([1.0]), QuantizationParams(nhat=[1.0]), dist)

    def test_wrong_quantizer_count(self, cf_service, mid_relay):
        dist = StateDistribution.deterministic("TL")
        with pytest.raises(ValueError, match="Expected 1 quantization"):
            cf_service.cf_rate(mid_relay, cf_allocation([1.0]), QuantizationParams(nhat=[1.0, 1.0]), dist)


class TestQuantizationNoise:
    """Descending solve of the quantization constraints."""

    @pytest.mark.parametrize("listen_share", [0.3, 0.5, 0.8])
    def test_single_relay_closed_form(self, cf_service, mid_relay, listen_share):
        dist = StateDistribution(num_relays=1, pmf={"TL": listen_share, "TT": 1.0 - listen_share})
        quant = cf_service.solve_quantization_noise(mid_relay, cf_allocation([1.0]), dist)

        conditional = 160.0 + 1.0 - 40.0 ** 2 / 11.0
        broadcast = (1.0 - listen_share) * math.log2(171.0 / 11.0)
        expected = conditional / (2.0 ** (broadcast / listen_share) - 1.0)
        assert quant.nhat[0] == pytest.approx(expected, rel=1e-6)

    def test_silent_broadcast_switches_relay_off(self, cf_service, mid_relay):
        dist = StateDistribution(num_relays=1, pmf={"TL": 0.5, "TT": 0.5})
        quant = cf_service.solve_quantization_noise(mid_relay, cf_allocation([0.0]), dist)
        assert quant.nhat == [math.inf]

    def test_relay_never_listening(self, cf_service, mid_relay):
        quant = cf_service.solve_quantization_noise(mid_relay, cf_allocation([1.0]), StateDistribution.deterministic("TT"))
        assert quant.nhat == [math.inf]

    def test_strong_broadcast_gives_fine_quantization(self, cf_service):
        weak = NetworkConfig.from_positions([0.0, 0.5, 1.0], snr_db=10.0)
        dist = StateDistribution(num_relays=1, pmf={"TL": 0.5, "TT": 0.5})
        strong_link = cf_service.solve_quantization_noise(weak, cf_allocation([1.0]), dist).nhat[0]
        weak_link = cf_service.solve_quantization_noise(weak, cf_allocation([0.05]), dist).nhat[0]
        assert strong_link < weak_link

    def test_feasibility_tightness_randomized(self, cf_service):
        rng = np.random.default_rng(7)
        codes = all_state_codes(2)
        checked = 0
        for _ in range(100):
            config = NetworkConfig.two_relay_line(float(rng.uniform(0.05, 0.95)))
            weights = rng.dirichlet(np.ones(len(codes)))
            dist = StateDistribution.from_weights(2, codes, weights)
            alloc = cf_allocation([float(w) for w in rng.uniform(0.2, 1.0, size=2)])
            quant = cf_service.solve_quantization_noise(config, alloc, dist)
            for relay in (1, 2):
                nhat = quant.nhat[relay - 1]
                if not math.isfinite(nhat):
                    continue
                lhs, rhs = cf_service.feasibility_sides(config, alloc, quant, dist, relay)
                assert lhs <= rhs + 1e-6
                if nhat > 1e-5:
                    assert lhs == pytest.approx(rhs, abs=1e-6)
                    checked += 1
        assert checked > 0
