"""The penalised solution at a lambda is also the cheapest way to stay within a damage budget.

Run: python3 demos/equivalence.py
"""

from packsel import (
    brute_force_ivanov,
    enumerate_breakpoints,
    evaluate,
    solve_tikhonov,
    sweep_cost_curve,
    verify_equivalence,
)
from packsel.catalog import compute_delta_bound
from packsel.synthetic import random_cost_matrices

costs = random_cost_matrices(seed=7, m=6, n=4)
bps = enumerate_breakpoints(costs)
print(f"{len(bps)} breakpoints; S and D of the optimum are constant between them")
for seg in sweep_cost_curve(costs, bps):
    print(f"  lambda in [{seg.lambda_lo:8.4f}, {seg.lambda_hi:8.4f}): S {seg.ship_cost:7.3f}  D {seg.damage_cost:7.3f}")

# Any penalised optimum solves the budgeted problem with T set to its own damage.
x = solve_tikhonov(costs, 0.8)
best = evaluate(costs, brute_force_ivanov(costs, x.damage_cost))
print(f"lambda 0.8: S {x.ship_cost:.3f}, D {x.damage_cost:.3f}; exhaustive budgeted optimum: "
      f"S {best.ship_cost:.3f}, D {best.damage_cost:.3f}")

# For an arbitrary budget, bisection lands on the budgeted optimum at a T* slightly above T.
T = 0.5 * (solve_tikhonov(costs, 0.0).damage_cost + solve_tikhonov(costs, 100.0).damage_cost)
rep = verify_equivalence(costs, T)
print(f"T {rep.budget:.3f} -> T* {rep.t_star:.3f} (delta bound {compute_delta_bound(costs):.3f}), "
      f"verdict {rep.verdict}")
