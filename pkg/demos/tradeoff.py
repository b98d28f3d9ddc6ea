"""From damage probabilities to package recommendations, and finding lambda for a budget.

Run: python3 demos/tradeoff.py
"""

import numpy as np

from packsel import (
    LambdaSearchConfig,
    MaskRuleSet,
    PackageCatalog,
    build_cost_matrices,
    determine_lambda,
    evaluate,
    recommend_new_product,
    solve_tikhonov,
)
from packsel.synthetic import GeneratorConfig, generate_products, ground_truth_model

cfg = GeneratorConfig(seed=3, m=5000, n=8)
products = generate_products(cfg)
catalog = PackageCatalog.default(cfg.n)
probs = ground_truth_model(cfg).predict_matrix(np.stack([p.features for p in products]))
costs = build_cost_matrices(products, catalog, probs, MaskRuleSet())
current = evaluate(costs, costs.current)
print(f"current assignment: ship {current.ship_cost:.0f}, damage {current.damage_cost:.0f}, "
      f"{int(costs.M.sum())} masked cells")

# Larger lambda buys less damage with more shipping spend.
for lam in (0.0, 0.1, 0.5, 2.0, 10.0):
    out = solve_tikhonov(costs, lam)
    print(f"lambda {lam:>5}: ship {out.ship_cost:10.0f}  damage {out.damage_cost:10.0f}")

# Keep damage at today's level (gamma = 1) and spend as little as possible on shipping.
res = determine_lambda(costs, LambdaSearchConfig(gamma=1.0))
print(f"gamma = 1: lambda {res.lambda_:.5f} after {res.iterations} bisection steps, "
      f"ship {res.outcome.ship_cost:.0f} ({res.outcome.ship_cost / current.ship_cost:.1%} of today), "
      f"damage {res.outcome.damage_cost:.0f}")

# A new product has no sales history; per-unit costs give the same answer at any velocity.
p = products[0]
k = recommend_new_product(p.ship_cost, probs[0] * p.damage_cost, costs.M[0], res.lambda_)
print(f"new product like {p.product_id} -> {catalog.names[k]}")
