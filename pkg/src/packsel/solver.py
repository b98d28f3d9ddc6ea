"""Linear-time solver for min S(X) + lambda * D(X).

The objective has no coupling between products, so each product picks its
own cheapest feasible type.  Exact ties are broken toward the smaller damage
cost and then toward the more robust type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from packsel.catalog import CostMatrices, exact_sum
from packsel.errors import (
    DimensionMismatchError,
    InfeasibleAssignmentError,
    InfeasibleProductError,
    NegativeLambdaError,
)


@dataclass(frozen=True, eq=False)
class Assignment:
    """One chosen package type (0-based) per product."""

    chosen: np.ndarray

    def __post_init__(self):
        chosen = np.array(self.chosen, dtype=np.intp)
        chosen.setflags(write=False)
        object.__setattr__(self, "chosen", chosen)

    def __eq__(self, other):
        return isinstance(other, Assignment) and np.array_equal(self.chosen, other.chosen)

    def __len__(self):
        return len(self.chosen)

    def to_matrix(self, n: int) -> np.ndarray:
        """The 0/1 matrix X with one 1 per row."""
        X = np.zeros((len(self.chosen), n), dtype=np.int8)
        X[np.arange(len(self.chosen)), self.chosen] = 1
        return X


@dataclass(frozen=True)
class SolveOutcome:
    assignment: Assignment
    ship_cost: float
    damage_cost: float
    objective: float
    lambda_: float


def _check_lambda(lam) -> float:
    lam = float(lam)
    if not lam >= 0:
        raise NegativeLambdaError(f"lambda must be >= 0, got {lam}")
    return lam


def argmin_with_ties(score: np.ndarray, D: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Row-wise argmin of ``score`` over unmasked cells with the documented tie rule."""
    score = np.where(M, np.inf, score)
    best = score.min(axis=1, keepdims=True)
    tied = score == best
    # fast path: exactly one minimiser per row
    if np.all(tied.sum(axis=1) == 1):
        return tied.argmax(axis=1)
    d_tied = np.where(tied, D, np.inf)
    tied &= D == d_tied.min(axis=1, keepdims=True)
    n = score.shape[1]
    return n - 1 - tied[:, ::-1].argmax(axis=1)


def solve_tikhonov(costs: CostMatrices, lam: float) -> SolveOutcome:
    """Optimal assignment for trade-off ``lam`` in O(mn)."""
    lam = _check_lambda(lam)
    dead = np.flatnonzero(costs.M.all(axis=1))
    if dead.size:
        raise InfeasibleProductError(dead)
    with np.errstate(invalid="ignore"):
        score = costs.S + lam * costs.D
    chosen = argmin_with_ties(score, costs.D, costs.M)
    return _aggregate(costs, chosen, lam)


def _aggregate(costs: CostMatrices, chosen: np.ndarray, lam: float) -> SolveOutcome:
    rows = np.arange(costs.m)
    ship = exact_sum(costs.S[rows, chosen])
    damage = exact_sum(costs.D[rows, chosen])
    return SolveOutcome(Assignment(chosen), ship, damage, ship + lam * damage, lam)


def evaluate(costs: CostMatrices, assignment, lam: float = 0.0) -> SolveOutcome:
    """S(X), D(X) and E(X) of a given feasible assignment."""
    lam = _check_lambda(lam)
    chosen = assignment.chosen if isinstance(assignment, Assignment) else np.asarray(assignment)
    chosen = np.asarray(chosen, dtype=np.intp)
    if chosen.shape != (costs.m,):
        raise DimensionMismatchError(f"assignment length {chosen.shape} != m={costs.m}")
    if np.any((chosen < 0) | (chosen >= costs.n)):
        raise InfeasibleAssignmentError("type index out of range")
    bad = np.flatnonzero(costs.M[np.arange(costs.m), chosen])
    if bad.size:
        raise InfeasibleAssignmentError(f"masked type chosen for product rows {bad[:10].tolist()}")
    return _aggregate(costs, chosen, lam)


def recommend_new_product(unit_ship_costs, unit_damage_costs, mask_row, lam: float) -> int:
    """Best type for a product without sales history.

    Sales velocity scales a product's S and D row alike, so it drops out of
    the per-product argmin; per-unit costs suffice.
    """
    lam = _check_lambda(lam)
    S = np.asarray(unit_ship_costs, dtype=np.float64)[None, :]
    D = np.asarray(unit_damage_costs, dtype=np.float64)[None, :]
    M = np.asarray(mask_row, dtype=bool)[None, :] | np.isinf(S)
    if S.shape != D.shape or S.shape != M.shape:
        raise DimensionMismatchError("cost and mask rows must have equal length")
    if M.all():
        raise InfeasibleProductError([0])
    with np.errstate(invalid="ignore"):
        score = S + lam * D
    return int(argmin_with_ties(score, D, M)[0])
