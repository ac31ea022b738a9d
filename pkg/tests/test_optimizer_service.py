"""
Tests for the multistart optimizer and the schedule LP.
"""
import numpy as np
import pytest

from src.exceptions import InfeasibleSearchError
from src.models.search import ConstraintKind, ParameterBlock, SearchSpec
from src.services.optimizer_service import OptimizerService


@pytest.fixture
def optimizer_service():
    """Create optimizer service fixture."""
    return OptimizerService()


def bumpy(blocks, branch):
    x = blocks["x"]
    return float(-np.sum((x - 0.37) ** 2) + 0.05 * np.sum(np.cos(9.0 * x)))


class TestOptimizeRate:
    """Search behaviour."""

    def test_concave_toy(self, optimizer_service):
        spec = SearchSpec(blocks=[ParameterBlock(name="x", size=1)], budget=400)
        result = optimizer_service.optimize_rate(spec, lambda b, _: -float((b["x"][0] - 0.3) ** 2))
        assert result.params[0] == pytest.approx(0.3, abs=1e-4)
        assert result.rate == pytest.approx(0.0, abs=1e-8)

    def test_box_bounds_respected(self, optimizer_service):
        spec = SearchSpec(blocks=[ParameterBlock(name="x", size=1, lower=-1.0, upper=2.0)], budget=300)
        result = optimizer_service.optimize_rate(spec, lambda b, _: float(b["x"][0]))
        assert result.params[0] == pytest.approx(2.0, abs=1e-12)

    def test_deterministic(self, optimizer_service):
        spec = SearchSpec(blocks=[ParameterBlock(name="x", size=6)], budget=600, seed=11)
        first = optimizer_service.optimize_rate(spec, bumpy)
        second = optimizer_service.optimize_rate(spec, bumpy)
        assert first.rate == second.rate
        assert first.params == second.params
        assert first.evaluations == second.evaluations

    def test_monotone_in_budget(self, optimizer_service):
        rates = []
        for budget in (40, 80, 160, 320, 640):
            spec = SearchSpec(blocks=[ParameterBlock(name="x", size=3)], budget=budget, seed=3)
            rates.append(optimizer_service.optimize_rate(spec, bumpy).rate)
        assert all(b >= a for a, b in zip(rates, rates[1:]))

    def test_budget_is_a_hard_cap(self, optimizer_service):
        spec = SearchSpec(blocks=[ParameterBlock(name="x", size=2)], budget=25)
        calls = []

        def counted(blocks, branch):
            calls.append(1)
            return bumpy(blocks, branch)

        result = optimizer_service.optimize_rate(spec, counted)
        assert len(calls) == 25
        assert result.evaluations == 25

    def test_simplex_vertex_reachable(self, optimizer_service):
        spec = SearchSpec(blocks=[ParameterBlock(name="p", size=3, kind=ConstraintKind.SIMPLEX)], budget=800)
        result = optimizer_service.optimize_rate(spec, lambda b, _: float(b["p"] @ np.array([1.0, 2.0, 3.0])))
        assert result.rate == pytest.approx(3.0, abs=1e-6)
        assert sum(result.params) == pytest.approx(1.0, abs=1e-9)
        assert min(result.params) >= 0.0

    def test_sum_capped_feasible(self, optimizer_service):
        spec = SearchSpec(blocks=[ParameterBlock(name="nu", size=3, kind=ConstraintKind.SUM_CAPPED)], budget=400)
        result = optimizer_service.optimize_rate(spec, lambda b, _: float(np.sum(np.sqrt(b["nu"]))))
        assert sum(result.params) <= 1.0 + 1e-9
        assert result.rate == pytest.approx(np.sqrt(3.0), abs=1e-3)

    def test_infeasible_everywhere(self, optimizer_service):
        def reject(blocks, branch):
            raise ValueError("no schedule left")

        spec = SearchSpec(blocks=[ParameterBlock(name="x", size=1)], budget=50)
        with pytest.raises(InfeasibleSearchError, match="No feasible point"):
            optimizer_service.optimize_rate(spec, reject)

    def test_partially_infeasible(self, optimizer_service):
        def objective(blocks, branch):
            x = blocks["x"][0]
            if x > 0.6:
                raise ValueError("infeasible")
            return x

        spec = SearchSpec(blocks=[ParameterBlock(name="x", size=1)], budget=300)
        assert optimizer_service.optimize_rate(spec, objective).rate == pytest.approx(0.6, abs=1e-4)

    def test_best_branch_wins(self, optimizer_service):
        spec = SearchSpec(blocks=[ParameterBlock(name="x", size=1)], branches=[1.0, 3.0, 2.0], budget=100)
        result = optimizer_service.optimize_rate(spec, lambda b, branch: branch - float(b["x"][0]))
        assert result.branch == 3.0
        assert result.evaluations <= 300

    def test_branch_ties_keep_earlier(self, optimizer_service):
        spec = SearchSpec(branches=["first", "second"], budget=5)
        result = optimizer_service.optimize_rate(spec, lambda b, branch: 1.0)
        assert result.branch == "first"

    def test_warm_start_evaluated_first(self, optimizer_service):
        spec = SearchSpec(blocks=[ParameterBlock(name="x", size=2)], budget=1, warm_starts=[[0.9, 0.1]])
        result = optimizer_service.optimize_rate(spec, lambda b, _: 0.0)
        assert result.params == [0.9, 0.1]

    def test_warm_start_length_validated(self):
        with pytest.raises(ValueError, match="expected 2"):
            SearchSpec(blocks=[ParameterBlock(name="x", size=2)], warm_starts=[[0.5]])


class TestStartPoints:
    """Seeded start grid."""

    def test_full_grid_centre_first(self, optimizer_service):
        starts = optimizer_service.start_points(SearchSpec(blocks=[ParameterBlock(name="x", size=2)]))
        assert len(starts) == 9
        assert list(starts[0]) == [0.5, 0.5]

    def test_capped_random_grid(self, optimizer_service):
        spec = SearchSpec(blocks=[ParameterBlock(name="x", size=8)], seed=5)
        starts = optimizer_service.start_points(spec)
        assert len(starts) == 243
        assert all(set(np.round(s, 12)) <= {0.2, 0.5, 0.8} for s in starts)

    def test_seed_changes_grid(self, optimizer_service):
        first = optimizer_service.start_points(SearchSpec(blocks=[ParameterBlock(name="x", size=8)], seed=1))
        second = optimizer_service.start_points(SearchSpec(blocks=[ParameterBlock(name="x", size=8)], seed=2))
        assert any(not np.array_equal(a, b) for a, b in zip(first, second))

    def test_no_dimensions(self, optimizer_service):
        assert len(optimizer_service.start_points(SearchSpec())) == 1


class TestScheduleLP:
    """Linear program over the state pmf."""

    def test_balances_two_constraints(self, optimizer_service):
        value, pmf, binding = optimizer_service.solve_schedule_lp({
            (1, "relay"): np.array([1.0, 3.0]),
            (1, "d"): np.array([3.0, 1.0]),
        })
        assert value == pytest.approx(2.0, abs=1e-9)
        assert pmf == pytest.approx([0.5, 0.5], abs=1e-9)
        assert binding[1] in {"relay", "d"}

    def test_levels_add_up(self, optimizer_service):
        value, pmf, binding = optimizer_service.solve_schedule_lp({
            (1, "a"): np.array([2.0, 0.0]),
            (2, "b"): np.array([1.0, 1.0]),
        })
        assert value == pytest.approx(3.0, abs=1e-9)
        assert pmf == pytest.approx([1.0, 0.0], abs=1e-9)
        assert binding == {1: "a", 2: "b"}

    def test_empty(self, optimizer_service):
        with pytest.raises(ValueError, match="at least one constraint"):
            optimizer_service.solve_schedule_lp({})
