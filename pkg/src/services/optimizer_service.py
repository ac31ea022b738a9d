"""
Optimizer service - seeded multistart Nelder-Mead search and the schedule LP.
"""
import itertools
import logging
import math
from typing import Any, Callable, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from src.exceptions import InfeasibleSearchError, NumericalError
from src.models.search import OptimizationResult, SearchSpec

logger = logging.getLogger(__name__)

START_LEVELS = (0.2, 0.5, 0.8)
CENTRE_LEVEL = 1

Objective = Callable[[Dict[str, np.ndarray], Any], float]


class _BudgetExhausted(Exception):
    """Raised inside the counted objective once the evaluation budget is spent."""


class _Tracker:
    """Counts evaluations of one branch and keeps the best projected point."""

    def __init__(self, spec: SearchSpec, objective: Objective, branch: Any):
        self.spec = spec
        self.objective = objective
        self.branch = branch
        self.evaluations = 0
        self.best_value = -math.inf
        self.best_x: Optional[np.ndarray] = None

    def __call__(self, raw: np.ndarray) -> float:
        if self.evaluations >= self.spec.budget:
            raise _BudgetExhausted()
        self.evaluations += 1
        x = self.spec.project(np.asarray(raw, dtype=float))
        try:
            value = float(self.objective(self.spec.split(x), self.branch))
        except ValueError as e:
            logger.debug(f"Infeasible point rejected: {e}")
            value = -math.inf
        if math.isnan(value):
            value = -math.inf
        if value > self.best_value or (
            value == self.best_value and value > -math.inf and tuple(x) < tuple(self.best_x)
        ):
            self.best_value, self.best_x = value, x
        return value


class OptimizerService:
    """
    Derivative-free maximization over projected parameter blocks.

    Every branch gets the full evaluation budget. Within a branch the
    seeded start points are evaluated first, then Nelder-Mead refinements
    run from the best starts in rank order. A run with budget B evaluates
    exactly the first B points of a run with a larger budget.
    """

    def optimize_rate(self, spec: SearchSpec, objective: Objective) -> OptimizationResult:
        """
        Maximize objective(blocks, branch) over every branch of spec.

        Args:
            spec: Blocks, branches, budget and seed
            objective: Rate function of the named parameter blocks and the branch;
                raising ValueError marks a point infeasible

        Returns:
            OptimizationResult of the best branch (earlier branch on ties)

        Raises:
            InfeasibleSearchError: no branch produced a feasible point
        """
        best: Optional[OptimizationResult] = None
        total_evaluations = 0
        for index, branch in enumerate(spec.branches):
            result = self._search_branch(spec, objective, branch)
            total_evaluations += result.evaluations
            logger.debug(f"{spec.protocol} branch {index}: {result.rate:.6f} after {result.evaluations} evaluations")
            if best is None or result.rate > best.rate:
                best = result

        if best is None or not math.isfinite(best.rate):
            raise InfeasibleSearchError(f"No feasible point found for {spec.protocol}")
        best = best.model_copy(update={"evaluations": total_evaluations})
        logger.info(
            f"Optimized {spec.protocol}: rate {best.rate:.5f} bpcu, "
            f"{total_evaluations} evaluations over {len(spec.branches)} branches"
        )
        return best

    def start_points(self, spec: SearchSpec) -> List[np.ndarray]:
        """
        Seeded start points in raw coordinates, projected onto the blocks.

        Warm starts come first, then the centre of {0.2, 0.5, 0.8}^d, then
        the rest of the grid when it has at most max_starts points, or seeded
        random grid points otherwise.
        """
        d = spec.dimension
        starts = [spec.project(np.asarray(w, dtype=float)) for w in spec.warm_starts]
        if d == 0:
            return starts + [np.zeros(0)]

        levels = np.array(START_LEVELS)
        if len(START_LEVELS) ** d <= spec.max_starts:
            codes = [c for c in itertools.product(range(len(START_LEVELS)), repeat=d) if set(c) != {CENTRE_LEVEL}]
        else:
            rng = np.random.default_rng(spec.seed)
            codes = [tuple(row) for row in rng.integers(0, len(START_LEVELS), size=(spec.max_starts - 1, d))]
        codes = [(CENTRE_LEVEL,) * d] + codes

        for code in codes[:spec.max_starts]:
            unit = levels[list(code)]
            parts = []
            offset = 0
            for block in spec.blocks:
                parts.append(block.scale(unit[offset:offset + block.size]))
                offset += block.size
            starts.append(spec.project(np.concatenate(parts)))
        return starts

    def solve_schedule_lp(
        self,
        coefficients: Mapping[Tuple[int, Hashable], np.ndarray],
    ) -> Tuple[float, np.ndarray, Dict[int, Hashable]]:
        """
        Best state pmf when every constraint is linear in it.

        maximize sum_k t_k  s.t.  t_k <= sum_m p_m a[k, c, m] for every
        constraint c of level k, p in the probability simplex.

        Args:
            coefficients: {(level, constraint label): per-state values}

        Returns:
            (optimal value, pmf over states, binding constraint label per level)
        """
        if not coefficients:
            raise ValueError("Schedule LP needs at least one constraint")
        levels = sorted({level for level, _ in coefficients})
        num_states = len(next(iter(coefficients.values())))
        level_index = {level: i for i, level in enumerate(levels)}

        c = np.concatenate([np.zeros(num_states), -np.ones(len(levels))])
        a_ub = []
        for (level, _), row in coefficients.items():
            constraint = np.zeros(num_states + len(levels))
            constraint[:num_states] = -np.asarray(row, dtype=float)
            constraint[num_states + level_index[level]] = 1.0
            a_ub.append(constraint)
        a_eq = np.concatenate([np.ones(num_states), np.zeros(len(levels))])[None, :]
        bounds = [(0.0, 1.0)] * num_states + [(0.0, None)] * len(levels)

        res = optimize.linprog(
            c, A_ub=np.array(a_ub), b_ub=np.zeros(len(a_ub)), A_eq=a_eq, b_eq=[1.0],
            bounds=bounds, method="highs",
        )
        if not res.success:
            raise NumericalError(f"Schedule LP failed: {res.message}")

        pmf = np.clip(res.x[:num_states], 0.0, None)
        pmf = pmf / pmf.sum()
        binding = {}
        for level in levels:
            values = {label: float(pmf @ row) for (k, label), row in coefficients.items() if k == level}
            binding[level] = min(values, key=values.get)
        return float(-res.fun), pmf, binding

    def _search_branch(self, spec: SearchSpec, objective: Objective, branch: Any) -> OptimizationResult:
        tracker = _Tracker(spec, objective, branch)
        scored: List[Tuple[float, np.ndarray]] = []
        refinements = 0
        try:
            for start in self.start_points(spec):
                scored.append((tracker(start), start))
            if spec.dimension > 0:
                ranked = sorted(scored, key=lambda item: (-item[0], tuple(item[1])))
                for value, start in ranked:
                    if not math.isfinite(value):
                        break
                    self._refine(spec, tracker, start)
                    refinements += 1
                # polish the incumbent until refinements stop paying off
                while tracker.best_x is not None:
                    before = tracker.best_value
                    self._refine(spec, tracker, tracker.best_x)
                    refinements += 1
                    if tracker.best_value - before <= spec.tolerance * max(1.0, abs(before)):
                        break
        except _BudgetExhausted:
            pass

        return OptimizationResult(
            rate=tracker.best_value,
            params=[] if tracker.best_x is None else [float(v) for v in tracker.best_x],
            branch=branch,
            evaluations=tracker.evaluations,
            starts=len(scored),
            refinements=refinements,
        )

    @staticmethod
    def _refine(spec: SearchSpec, tracker: _Tracker, start: np.ndarray) -> None:
        optimize.minimize(
            lambda x: -tracker(x),
            np.asarray(start, dtype=float),
            method="Nelder-Mead",
            options={"maxfev": spec.refine_chunk, "xatol": 1e-10, "fatol": spec.tolerance},
        )
