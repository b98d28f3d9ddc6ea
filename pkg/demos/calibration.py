"""Class weighting distorts probabilities; three calibration maps undo it.

Run: python3 demos/calibration.py
"""

import numpy as np

from packsel import TrainConfig, apply_weight_correction, fit_isotonic, fit_platt, log_loss, train
from packsel.calibration import reliability_report
from packsel.synthetic import GeneratorConfig, generate_products, generate_shipments

cfg = GeneratorConfig(seed=2, m=3000, n=5, feature_dim=3, shipments_per_product=20,
                      base_damage_rates=(0.08, 0.05, 0.03, 0.02, 0.01))
shipments, _ = generate_shipments(generate_products(cfg), cfg)
order = np.random.default_rng(0).permutation(len(shipments))
fit_rows, cal_rows, test_rows = np.array_split(order, 3)
fit_part, cal_part, test_part = (shipments.take(r) for r in (fit_rows, cal_rows, test_rows))

tau = 0.007  # damaged shipments weigh 1 - tau, undamaged ones tau
model = train(fit_part, cfg.n, TrainConfig(tau=tau))


def raw(t):
    return model.predict_matrix(t.features)[np.arange(len(t)), t.package_index]


raw_cal, raw_test = raw(cal_part), raw(test_part)
maps = {
    "uncalibrated": raw_test,
    "isotonic": fit_isotonic(raw_cal, cal_part.labels)(raw_test),
    "platt": fit_platt(raw_cal, cal_part.labels)(raw_test),
    "weight correction": apply_weight_correction(raw_test, tau),
}
print(f"held-out damage rate {test_part.labels.mean():.4f}")
for name, p in maps.items():
    rel = reliability_report(p, test_part.labels, test_part.package_index).as_dict()
    print(f"{name:>18}: mean p {p.mean():.4f}  log-loss {log_loss(p, test_part.labels):.4f}  "
          f"worst per-type reliability gap {max(rel.values()):.4f}")
