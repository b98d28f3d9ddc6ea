"""Exhaustive oracles and analyses for the constrained / penalised problems.

The constrained problem (min S(X) s.t. D(X) <= T) is solved here only by
enumerating every feasible assignment, which is what makes it usable as an
independent check on the linear-time penalised solver and on the bisection
for lambda.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from packsel.catalog import CostMatrices, compute_delta_bound, exact_sum
from packsel.errors import (
    InstanceTooLargeError,
    NoFeasibleSolutionError,
    PropertyViolationError,
)
from packsel.lambda_search import LambdaSearchConfig, determine_lambda
from packsel.solver import Assignment, _check_lambda, evaluate, solve_tikhonov

MAX_ORACLE_PRODUCTS = 12
_CHUNK = 1 << 16
# relative slack of the vectorised screening pass; survivors are re-scored exactly
_SCREEN_RTOL = 1e-9


def _feasible_lists(costs: CostMatrices) -> list[np.ndarray]:
    if costs.m > MAX_ORACLE_PRODUCTS:
        raise InstanceTooLargeError(
            f"exhaustive search limited to {MAX_ORACLE_PRODUCTS} products, got {costs.m}"
        )
    return [np.flatnonzero(~costs.M[i]) for i in range(costs.m)]


def _enumerate(feasible: list[np.ndarray]):
    """Yield blocks of assignments (rows of chosen types) in lexicographic order."""
    radices = np.array([len(f) for f in feasible], dtype=np.int64)
    total = int(np.prod(radices)) if len(radices) else 1
    strides = np.ones(len(radices), dtype=np.int64)
    for i in range(len(radices) - 2, -1, -1):
        strides[i] = strides[i + 1] * radices[i + 1]
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        block = np.empty((len(codes), len(feasible)), dtype=np.intp)
        for i, f in enumerate(feasible):
            block[:, i] = f[(codes // strides[i]) % radices[i]]
        yield block


def _row_totals(values: np.ndarray, block: np.ndarray) -> np.ndarray:
    total = np.zeros(len(block))
    for i in range(block.shape[1]):
        total += values[i, block[:, i]]
    return total


def _scale(values: np.ndarray, M: np.ndarray) -> float:
    if values.size == 0:
        return 1.0
    return float(np.where(M, 0.0, np.abs(np.nan_to_num(values))).max(axis=1).sum()) + 1.0


def brute_force_tikhonov(costs: CostMatrices, lam: float) -> Assignment:
    """Exhaustive argmin of E(X); ties go to smaller D(X), then the lexicographically largest choice."""
    lam = _check_lambda(lam)
    feasible = _feasible_lists(costs)
    S, D = costs.S, costs.D
    tol = _SCREEN_RTOL * (_scale(S, costs.M) + lam * _scale(D, costs.M))

    best = np.inf
    for block in _enumerate(feasible):
        best = min(best, float((_row_totals(S, block) + lam * _row_totals(D, block)).min()))
    candidates = []
    for block in _enumerate(feasible):
        approx = _row_totals(S, block) + lam * _row_totals(D, block)
        candidates.extend(block[approx <= best + tol])

    def key(chosen):
        out = evaluate(costs, chosen, lam)
        return (out.objective, out.damage_cost, tuple(-c for c in chosen))

    return Assignment(min(candidates, key=key))


def brute_force_ivanov(costs: CostMatrices, T: float) -> Assignment:
    """Exhaustive min S(X) subject to D(X) <= T.

    Ties go to the smaller D(X), then the lexicographically smallest choice.
    """
    T = float(T)
    feasible = _feasible_lists(costs)
    S, D = costs.S, costs.D
    tol_d = _SCREEN_RTOL * (_scale(D, costs.M) + abs(T))
    tol_s = _SCREEN_RTOL * _scale(S, costs.M)

    best_sure = np.inf
    for block in _enumerate(feasible):
        d = _row_totals(D, block)
        sure = d <= T - tol_d
        if sure.any():
            best_sure = min(best_sure, float(_row_totals(S, block)[sure].min()))
    candidates = []
    for block in _enumerate(feasible):
        keep = _row_totals(D, block) <= T + tol_d
        if np.isfinite(best_sure):
            keep &= _row_totals(S, block) <= best_sure + tol_s
        candidates.extend(block[keep])

    scored = []
    for chosen in candidates:
        out = evaluate(costs, chosen)
        if out.damage_cost <= T:
            scored.append((out.ship_cost, out.damage_cost, tuple(chosen)))
    if not scored:
        raise NoFeasibleSolutionError(f"no assignment has damage cost <= {T}")
    return Assignment(min(scored)[2])


@dataclass(frozen=True, eq=False)
class BreakpointSet:
    """Sorted, distinct, positive lambdas where two feasible types of some product tie."""

    lambdas: np.ndarray

    def __post_init__(self):
        lambdas = np.array(self.lambdas, dtype=np.float64).ravel()
        if np.any(lambdas <= 0) or np.any(np.diff(lambdas) <= 0):
            raise ValueError("breakpoints must be positive and strictly increasing")
        lambdas.setflags(write=False)
        object.__setattr__(self, "lambdas", lambdas)

    def __len__(self):
        return len(self.lambdas)


def _pair_crossings(costs: CostMatrices):
    """Yield (rows, lambdas) of every feasible type pair's crossing, unfiltered by sign."""
    S, D, M = costs.S, costs.D, costs.M
    for j1, j2 in itertools.combinations(range(costs.n), 2):
        ok = ~M[:, j1] & ~M[:, j2] & (D[:, j1] != D[:, j2])
        rows = np.flatnonzero(ok)
        if rows.size:
            lam = (S[rows, j2] - S[rows, j1]) / (D[rows, j1] - D[rows, j2])
            yield rows, lam


def enumerate_breakpoints(costs: CostMatrices) -> BreakpointSet:
    found = [lam[lam > 0] for _, lam in _pair_crossings(costs)]
    lambdas = np.unique(np.concatenate(found)) if found else np.zeros(0)
    return BreakpointSet(lambdas[np.isfinite(lambdas)])


@dataclass(frozen=True)
class CurveSegment:
    lambda_lo: float
    lambda_hi: float
    ship_cost: float
    damage_cost: float
    objective_mid: float
    assignment: Assignment


def sweep_cost_curve(costs: CostMatrices, breakpoints: BreakpointSet | None = None) -> list[CurveSegment]:
    """Piecewise-constant S(X_lambda), D(X_lambda) sampled once per breakpoint interval.

    Raises PropertyViolationError if D ever increases or S ever decreases.
    """
    if breakpoints is None:
        breakpoints = enumerate_breakpoints(costs)
    edges = [0.0, *breakpoints.lambdas.tolist()]
    segments = []
    for k, lo in enumerate(edges):
        hi = edges[k + 1] if k + 1 < len(edges) else np.inf
        mid = (lo + hi) / 2 if np.isfinite(hi) else (2 * lo if lo > 0 else 1.0)
        out = solve_tikhonov(costs, mid)
        segments.append(
            CurveSegment(lo, hi, out.ship_cost, out.damage_cost, out.objective, out.assignment)
        )
    for a, b in zip(segments, segments[1:]):
        if b.damage_cost > a.damage_cost or b.ship_cost < a.ship_cost:
            raise PropertyViolationError(
                f"cost curve not monotone between lambda {a.lambda_lo} and {b.lambda_lo}"
            )
    return segments


def max_damage_jump(costs: CostMatrices, segments: list[CurveSegment]) -> float:
    """Largest observed drop of D between consecutive segments.

    Summed from the per-product changes rather than by subtracting rounded
    totals, so a jump caused by one product switching is exact.
    """
    rows = np.arange(costs.m)
    jumps = [
        exact_sum(costs.D[rows, a.assignment.chosen] - costs.D[rows, b.assignment.chosen])
        for a, b in zip(segments, segments[1:])
    ]
    return max(jumps, default=0.0)


@dataclass(frozen=True)
class EquivalenceReport:
    budget: float
    lambda_found: float
    ship_ivanov: float
    damage_ivanov: float
    ship_tikhonov: float
    damage_tikhonov: float
    delta_bound: float
    t_star: float
    verdict: bool
    iterations: int = 0
    ivanov_feasible_at_budget: bool = True

    CSV_HEADER = "T,lambda_found,D_ivanov,S_ivanov,D_tikhonov,S_tikhonov,delta_bound,t_star,verdict"

    def csv_row(self) -> str:
        vals = (
            self.budget,
            self.lambda_found,
            self.damage_ivanov,
            self.ship_ivanov,
            self.damage_tikhonov,
            self.ship_tikhonov,
            self.delta_bound,
            self.t_star,
        )
        return ",".join(repr(float(v)) for v in vals) + ("," + str(self.verdict).lower())


def verify_equivalence(
    costs: CostMatrices, T: float, rho: float = 1e-3, lambda_max: float = 1000.0
) -> EquivalenceReport:
    """Check that the bisected lambda reproduces the constrained optimum at a nearby budget.

    T* is the damage cost on the upper-damage side of the final bracket; it
    should fall in [T, T + delta) and the constrained optimum at T* should
    have exactly the same S and D as the penalised solution.
    """
    res = determine_lambda(costs, LambdaSearchConfig(budget=T, rho=rho, lambda_max=lambda_max))
    tik = res.outcome_low
    # with slack budgets lambda = 0 already fits and T itself serves as T*
    t_star = max(float(T), tik.damage_cost)
    ivanov = evaluate(costs, brute_force_ivanov(costs, t_star))
    delta = compute_delta_bound(costs)
    try:
        brute_force_ivanov(costs, T)
        feasible_at_T = True
    except NoFeasibleSolutionError:
        feasible_at_T = False
    same = ivanov.ship_cost == tik.ship_cost and ivanov.damage_cost == tik.damage_cost
    # delta == 0 means a flat damage curve, where T* == T is the only option
    in_window = T <= t_star and (t_star < T + delta or t_star == T)
    verdict = same and (in_window or not feasible_at_T)
    return EquivalenceReport(
        budget=float(T),
        lambda_found=res.lambda_low,
        ship_ivanov=ivanov.ship_cost,
        damage_ivanov=ivanov.damage_cost,
        ship_tikhonov=tik.ship_cost,
        damage_tikhonov=tik.damage_cost,
        delta_bound=delta,
        t_star=t_star,
        verdict=bool(verdict),
        iterations=res.iterations,
        ivanov_feasible_at_budget=feasible_at_T,
    )


@dataclass(frozen=True)
class NonCollinearityReport:
    collinear: tuple[tuple[int, int, int, int], ...]
    duplicate_points: tuple[tuple[int, int, int], ...]
    shared_crossings: tuple[tuple[int, int, float], ...]

    @property
    def ok(self) -> bool:
        return not (self.collinear or self.duplicate_points or self.shared_crossings)


def check_noncollinearity(costs: CostMatrices, rtol: float = 1e-9) -> NonCollinearityReport:
    """Flag instances where exact-equality arguments about the cost curves can break.

    Reports, per product, feasible (D, S) points that coincide or any three
    that are collinear, and pairs of products whose type pairs tie at the
    same lambda >= 0.
    """
    S, D, M = costs.S, costs.D, costs.M
    duplicates = []
    for j1, j2 in itertools.combinations(range(costs.n), 2):
        same = ~M[:, j1] & ~M[:, j2] & (S[:, j1] == S[:, j2]) & (D[:, j1] == D[:, j2])
        duplicates.extend((int(i), j1, j2) for i in np.flatnonzero(same))

    collinear = []
    for j1, j2, j3 in itertools.combinations(range(costs.n), 3):
        ok = ~M[:, j1] & ~M[:, j2] & ~M[:, j3]
        dx2, dy2 = D[:, j2] - D[:, j1], S[:, j2] - S[:, j1]
        dx3, dy3 = D[:, j3] - D[:, j1], S[:, j3] - S[:, j1]
        with np.errstate(invalid="ignore"):
            cross = dx2 * dy3 - dy2 * dx3
            size = np.abs(dx2 * dy3) + np.abs(dy2 * dx3)
            flat = ok & (np.abs(cross) <= rtol * size)
        collinear.extend((int(i), j1, j2, j3) for i in np.flatnonzero(flat))

    pairs = [(lam[k], int(r)) for rows, lam in _pair_crossings(costs) for k, r in enumerate(rows) if lam[k] >= 0]
    pairs.sort()
    shared = []
    for (l1, r1), (l2, r2) in zip(pairs, pairs[1:]):
        if r1 != r2 and abs(l2 - l1) <= rtol * max(abs(l1), abs(l2), 1e-300):
            shared.append((min(r1, r2), max(r1, r2), float(l1)))
    return NonCollinearityReport(tuple(collinear), tuple(duplicates), tuple(shared))
