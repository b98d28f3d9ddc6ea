"""Seeded generators for products, shipments and cost matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from packsel.catalog import CostMatrices, ProductRecord
from packsel.damage_model import MonotoneLogisticModel, ShipmentTable
from packsel.errors import PackselError


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for synthetic data.

    ``base_damage_rates`` are the damage probabilities of a product with
    all-zero features, least robust type first; they must not increase.
    Cost ranges bound the per-step increase between neighbouring types, so
    more robust types always cost strictly more to ship.
    """

    seed: int = 0
    m: int = 100
    n: int = 8
    feature_dim: int = 4
    base_damage_rates: tuple[float, ...] | None = None
    weight_scale: float = 0.5
    material_step: tuple[float, float] = (0.05, 0.5)
    transport_step: tuple[float, float] = (0.05, 0.8)
    damage_cost: tuple[float, float] = (5.0, 50.0)
    sales_velocity: tuple[float, float] = (1.0, 100.0)
    fragile_prob: float = 0.1
    liquid_prob: float = 0.1
    hazardous_prob: float = 0.05
    oversize_prob: float = 0.0
    shipments_per_product: int = 20

    def __post_init__(self):
        if self.n < 2 or self.m < 0 or self.feature_dim < 0:
            raise PackselError("need n >= 2, m >= 0, feature_dim >= 0")
        rates = self.rates()
        if len(rates) != self.n:
            raise PackselError("base_damage_rates must have n entries")
        if np.any(np.diff(rates) > 0) or np.any((rates <= 0) | (rates >= 1)):
            raise PackselError("base damage rates must lie in (0, 1) and not increase")
        for lo, hi in (self.material_step, self.transport_step, self.damage_cost, self.sales_velocity):
            if not 0 < lo <= hi:
                raise PackselError("generator ranges must be positive")

    def rates(self) -> np.ndarray:
        if self.base_damage_rates is not None:
            return np.asarray(self.base_damage_rates, dtype=np.float64)
        return np.geomspace(0.3, 0.01, self.n)


def _logit(p):
    return np.log(p) - np.log1p(-p)


def ground_truth_model(cfg: GeneratorConfig) -> MonotoneLogisticModel:
    """Monotone logistic model that generates the synthetic damage labels."""
    rng = np.random.default_rng([cfg.seed, 2])
    beta = _logit(cfg.rates())
    return MonotoneLogisticModel(
        w=rng.normal(0.0, cfg.weight_scale, cfg.feature_dim),
        eps=-np.diff(beta),
        beta_n=beta[-1],
        mean=np.zeros(cfg.feature_dim),
        scale=np.ones(cfg.feature_dim),
    )


def generate_products(cfg: GeneratorConfig) -> list[ProductRecord]:
    rng = np.random.default_rng([cfg.seed, 1])
    m, n = cfg.m, cfg.n
    feats = rng.normal(size=(m, cfg.feature_dim))
    fragile = rng.random(m) < cfg.fragile_prob
    liquid = rng.random(m) < cfg.liquid_prob
    hazardous = rng.random(m) < cfg.hazardous_prob
    current = rng.integers(0, n, size=m)
    velocity = rng.uniform(*cfg.sales_velocity, size=m)
    damage = rng.uniform(*cfg.damage_cost, size=m)
    material = np.cumsum(rng.uniform(*cfg.material_step, size=(m, n)), axis=1)
    transport = np.cumsum(rng.uniform(*cfg.transport_step, size=(m, n)), axis=1)
    # oversize: the product does not fit the smallest containers of the least robust types
    fits_from = np.where(rng.random(m) < cfg.oversize_prob, rng.integers(1, n, size=m), 0)
    transport[np.arange(n)[None, :] < fits_from[:, None]] = np.inf
    current = np.maximum(current, fits_from)
    return [
        ProductRecord(
            product_id=f"P{i:06d}",
            features=feats[i],
            current_type=int(current[i]),
            sales_velocity=float(velocity[i]),
            damage_cost=float(damage[i]),
            material=material[i],
            transport=transport[i],
            fragile=bool(fragile[i]),
            liquid=bool(liquid[i]),
            hazardous=bool(hazardous[i]),
        )
        for i in range(m)
    ]


def generate_shipments(
    products: list[ProductRecord], cfg: GeneratorConfig
) -> tuple[ShipmentTable, MonotoneLogisticModel]:
    """Shipments at uniformly random types with labels drawn from the ground-truth model."""
    truth = ground_truth_model(cfg)
    rng = np.random.default_rng([cfg.seed, 3])
    per = cfg.shipments_per_product
    if not products or per == 0:
        empty = ShipmentTable(np.zeros(0, object), np.zeros((0, cfg.feature_dim)), [], [])
        return empty, truth
    rows = np.repeat(np.arange(len(products)), per)
    feats = np.stack([p.features for p in products])[rows]
    types = rng.integers(0, cfg.n, size=len(rows))
    p = truth.predict_matrix(feats)[np.arange(len(rows)), types]
    labels = (rng.random(len(rows)) < p).astype(np.int8)
    ids = np.array([products[i].product_id for i in rows], dtype=object)
    return ShipmentTable(ids, feats, types, labels), truth


def random_cost_matrices(
    seed: int, m: int, n: int, mask_fraction: float = 0.2, scale: float = 10.0
) -> CostMatrices:
    """Random trade-off instance: S rises and D falls with the type index.

    Each cell is masked with probability ``mask_fraction``; a fully masked row
    gets one random type re-opened.  The current assignment is a random
    feasible type.
    """
    rng = np.random.default_rng(seed)
    S = np.sort(rng.uniform(0, scale, size=(m, n)), axis=1)
    D = np.sort(rng.uniform(0, scale, size=(m, n)), axis=1)[:, ::-1]
    M = rng.random((m, n)) < mask_fraction
    for i in np.flatnonzero(M.all(axis=1)):
        M[i, rng.integers(n)] = False
    current = np.array([rng.choice(np.flatnonzero(~M[i])) for i in range(m)], dtype=np.intp)
    return CostMatrices.from_arrays(S, np.ascontiguousarray(D), M, current)
