"""
Tests for the alternating DF/CF two-relay protocol.
"""
import math

import pytest

from src.models.network import NetworkConfig, PowerAllocation, StateDistribution
from src.models.quantization import CombinedParams
from src.services.combined_service import CombinedService
from src.services.df_service import DFService


@pytest.fixture
def combined_service():
    """Create combined protocol service fixture."""
    return CombinedService()


@pytest.fixture
def line():
    """Relays at 0.3 and 0.7."""
    return NetworkConfig.two_relay_line(0.3)


def gain(distance):
    return distance ** -4


class TestQuantizationFeasibility:
    """Broadcast rates and the quantization noise floor."""

    def test_broadcast_rate(self, combined_service):
        config = NetworkConfig.two_relay_line(0.5)
        params = CombinedParams(p1=0.5, p2=0.5, nu_s_s1=0.0, omega_2=3.0 / 160.0)
        bound = combined_service.quantization_feasibility(config, params)
        assert bound.rhat_destination == pytest.approx(1.0, abs=1e-12)
        assert bound.rhat_relay is None

    def test_floor_equals_conditional_variance(self, combined_service, line):
        omega = 0.3 ** 4 / 10.0
        params = CombinedParams(p1=0.5, p2=0.5, nu_s_s1=0.0, nu_s_s2=0.5, nu_s_11=0.5, nu_1_11=1.0, omega_2=omega)
        bound = combined_service.quantization_feasibility(line, params)
        assert bound.rhat_destination == pytest.approx(0.5, abs=1e-12)

        source = 10.0 * (0.5 + 0.5)
        at_relay = source * gain(0.7) + 10.0 * gain(0.4)
        at_destination = source + 10.0 * gain(0.7)
        cross = source * math.sqrt(gain(0.7)) + 10.0 * math.sqrt(gain(0.4) * gain(0.7))
        conditional = at_relay + 1.0 - cross ** 2 / (at_destination + 1.0)
        assert bound.nhat_lower == pytest.approx(conditional, rel=1e-9)

    def test_silent_broadcast_switches_off(self, combined_service, line):
        bound = combined_service.quantization_feasibility(line, CombinedParams(p1=0.5, p2=0.5, omega_2=0.0))
        assert bound.rhat_destination == 0.0
        assert math.isinf(bound.nhat_lower)

    def test_no_first_phase(self, combined_service, line):
        bound = combined_service.quantization_feasibility(line, CombinedParams(p1=0.0, p2=1.0))
        assert math.isinf(bound.nhat_lower)

    def test_relay_decoding_raises_floor(self, combined_service, line):
        base = CombinedParams(p1=0.4, p2=0.6, nu_s_s1=0.7, omega_2=0.8)
        decoding = base.model_copy(update={"decode_interference": True})
        plain = combined_service.quantization_feasibility(line, base)
        both = combined_service.quantization_feasibility(line, decoding)

        rhat_relay = 0.4 * math.log2(1.0 + 8.0 * gain(0.4) / (1.0 + 7.0 * gain(0.3)))
        assert both.rhat_relay == pytest.approx(rhat_relay, rel=1e-12)
        assert both.nhat_lower >= plain.nhat_lower

    def test_requires_two_relays(self, combined_service):
        with pytest.raises(ValueError, match="exactly 2 relays"):
            combined_service.quantization_feasibility(
                NetworkConfig.single_relay_line(0.5), CombinedParams(p1=0.5, p2=0.5)
            )


class TestCombinedRate:
    """R_DF + R_CF."""

    def test_first_phase_only(self, combined_service, line):
        params = CombinedParams(p1=1.0, p2=0.0, nu_s_s1=1.0, omega_2=1.0)
        result = combined_service.combined_rate(line, params)
        relay_cut = math.log2(1.0 + 10.0 * gain(0.3) / (1.0 + 10.0 * gain(0.4)))
        assert result.per_level == [pytest.approx(min(math.log2(11.0), relay_cut), abs=1e-12), 0.0]
        assert result.binding[0].term == "1"

    def test_first_phase_only_decoding_interference(self, combined_service, line):
        params = CombinedParams(p1=1.0, p2=0.0, nu_s_s1=1.0, omega_2=1.0, decode_interference=True)
        result = combined_service.combined_rate(line, params)
        assert result.total == pytest.approx(math.log2(11.0), abs=1e-12)
        assert result.binding[0].term == "d"

    def test_second_phase_only(self, combined_service, line):
        params = CombinedParams(p1=0.0, p2=1.0, nu_s_s2=0.6, nu_s_11=0.4)
        result = combined_service.combined_rate(line, params)
        assert result.per_level[0] == 0.0
        assert result.per_level[1] == pytest.approx(math.log2(1.0 + 6.0), abs=1e-12)

    def test_silent_cf_relay_matches_two_phase_df(self, combined_service):
        params = CombinedParams(p1=0.5, p2=0.5, nu_s_s1=0.5, nu_s_s2=0.5, nu_s_11=0.5, nu_1_11=1.0, omega_2=0.0)
        combined = combined_service.combined_rate(NetworkConfig.two_relay_line(0.2), params)

        alloc = PowerAllocation.from_fractions(1, 1, {(0, 0, 1): 0.5, (0, 1, 1): 0.5, (1, 1, 1): 1.0})
        schedule = StateDistribution(num_relays=1, pmf={"TL": 0.5, "TT": 0.5})
        df = DFService().df_rate(NetworkConfig.single_relay_line(0.2), alloc, schedule)
        assert combined.total == pytest.approx(df.total, abs=1e-9)

    def test_non_increasing_in_quantization_noise(self, combined_service, line):
        params = CombinedParams(p1=0.4, p2=0.6, nu_s_s1=1.0, nu_s_s2=0.6, nu_s_11=0.4, omega_2=1.0)
        floor = combined_service.quantization_feasibility(line, params).nhat_lower
        rates = [
            combined_service.combined_rate(line, params.model_copy(update={"nhat_2": floor * factor})).total
            for factor in (1.0, 2.0, 10.0, 1e3)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))

    def test_default_noise_is_the_floor(self, combined_service, line):
        params = CombinedParams(p1=0.4, p2=0.6, omega_2=0.5)
        result = combined_service.combined_rate(line, params)
        floor = combined_service.quantization_feasibility(line, params).nhat_lower
        assert result.details["nhat_2"] == pytest.approx(floor)

    def test_noise_below_floor_rejected(self, combined_service, line):
        params = CombinedParams(p1=0.4, p2=0.6, omega_2=1.0)
        floor = combined_service.quantization_feasibility(line, params).nhat_lower
        with pytest.raises(ValueError, match="below its lower bound"):
            combined_service.combined_rate(line, params.model_copy(update={"nhat_2": floor / 2.0}))


class TestCombinedParams:
    """Parameter validation."""

    def test_phase_shares_sum(self):
        with pytest.raises(ValueError, match="sum to 1"):
            CombinedParams(p1=0.5, p2=0.4)

    def test_second_phase_source_power(self):
        with pytest.raises(ValueError, match="more than 1"):
            CombinedParams(p1=0.5, p2=0.5, nu_s_s2=0.7, nu_s_11=0.5)
