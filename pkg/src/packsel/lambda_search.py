"""Bisection for the trade-off lambda that meets a damage-cost budget.

D(X_lambda) is non-increasing in lambda, so halving the bracket
``[lambda_min, lambda_max]`` on the sign of ``D(X_lambda) - T`` homes in on
the point where the damage curve crosses the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from packsel.catalog import CostMatrices
from packsel.errors import PackselError
from packsel.solver import SolveOutcome, solve_tikhonov


@dataclass(frozen=True)
class LambdaSearchConfig:
    """Budget and stopping rule.

    Give either ``budget`` (absolute T) or ``gamma`` (T = gamma * current
    damage cost).
    """

    budget: float | None = None
    gamma: float | None = None
    rho: float = 1e-3
    lambda_max: float = 1000.0

    def __post_init__(self):
        if (self.budget is None) == (self.gamma is None):
            raise PackselError("give exactly one of budget or gamma")
        if not self.rho > 0:
            raise PackselError("rho must be > 0")
        if not self.lambda_max > 0:
            raise PackselError("lambda_max must be > 0")
        if self.rho > self.lambda_max:
            raise PackselError("rho must not exceed lambda_max")
        if self.budget is not None and not self.budget >= 0:
            raise PackselError("budget must be >= 0")
        if self.gamma is not None and not self.gamma >= 0:
            raise PackselError("gamma must be >= 0")

    def resolve_budget(self, costs: CostMatrices) -> float:
        if self.budget is not None:
            return float(self.budget)
        return self.gamma * costs.t_damage_cur

    def max_iterations(self) -> int:
        return math.ceil(math.log2(self.lambda_max / self.rho)) + 1


@dataclass(frozen=True)
class LambdaSearchResult:
    """Outcome of :func:`determine_lambda`.

    ``lambda_`` / ``outcome`` is the largest-D solution seen that respects the
    budget.  ``lambda_low`` / ``outcome_low`` is the last point that did not
    (D >= T), or lambda = 0 if the lower end never moved; the equivalence
    checks use it as the upper damage level T*.
    """

    lambda_: float
    outcome: SolveOutcome
    iterations: int
    feasible: bool
    budget: float
    lambda_low: float
    outcome_low: SolveOutcome
    trace: tuple[tuple[float, float], ...] = ()


def determine_lambda(costs: CostMatrices, cfg: LambdaSearchConfig) -> LambdaSearchResult:
    T = cfg.resolve_budget(costs)
    lam_min, lam_max = 0.0, float(cfg.lambda_max)
    lam_mid = (lam_min + lam_max) / 2
    below = None  # last outcome with D < T (moved lambda_max)
    above = None  # last outcome with D >= T (moved lambda_min)
    trace = []
    iterations = 0
    while True:
        lam = lam_mid
        out = solve_tikhonov(costs, lam)
        iterations += 1
        if out.damage_cost < T:
            lam_max = lam_mid
            below = out
        else:
            lam_min = lam_mid
            above = out
        trace.append((lam_min, lam_max))
        lam_mid = (lam_min + lam_max) / 2
        if abs(lam_mid - lam) <= cfg.rho or out.damage_cost == T:
            break

    if out.damage_cost <= T:
        chosen = out
    elif below is not None:
        chosen = below
    else:
        # every probe exceeded the budget; check the bracket top itself
        chosen = solve_tikhonov(costs, cfg.lambda_max)
    feasible = chosen.damage_cost <= T
    if above is None:
        above = solve_tikhonov(costs, 0.0)
    return LambdaSearchResult(
        lambda_=chosen.lambda_,
        outcome=chosen,
        iterations=iterations,
        feasible=feasible,
        budget=T,
        lambda_low=above.lambda_,
        outcome_low=above,
        trace=tuple(trace),
    )
