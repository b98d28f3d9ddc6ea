"""Package catalog, product records and the S / D / M cost matrices.

Package types are indexed from 0 (least robust) to ``n - 1`` (most robust).
File formats use 1-based indices; conversion happens in :mod:`packsel.io`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from packsel.errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    InfeasibleProductError,
    PackselError,
)

DEFAULT_TYPE_NAMES = ("NAP", "PL", "PS", "JM", "CP", "T", "V", "C")


def exact_sum(values) -> float:
    """Correctly rounded float sum, independent of chunking or worker count."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


@dataclass(frozen=True)
class PackageCatalog:
    """Ordered package types, least robust first."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(str(s) for s in self.names)
        if len(names) < 2:
            raise PackselError("a catalog needs at least two package types")
        if len(set(names)) != len(names):
            raise PackselError(f"duplicate package type names in {names}")
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise IndexOutOfRangeError(f"unknown package type {name!r}") from None

    def indices(self, names: Sequence[str]) -> list[int]:
        """Indices of the given names, silently skipping names not in the catalog."""
        return [self.names.index(s) for s in names if s in self.names]

    @classmethod
    def default(cls, n: int = 8) -> "PackageCatalog":
        if n == len(DEFAULT_TYPE_NAMES):
            return cls(DEFAULT_TYPE_NAMES)
        return cls(tuple(f"T{k}" for k in range(1, n + 1)))


@dataclass
class ProductRecord:
    """Per-product inputs to the cost model.

    ``material`` and ``transport`` hold one cost per package type; ``inf``
    marks a type the product does not fit into.
    """

    product_id: str
    features: np.ndarray
    current_type: int
    sales_velocity: float
    damage_cost: float
    material: np.ndarray
    transport: np.ndarray
    fragile: bool = False
    liquid: bool = False
    hazardous: bool = False

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.material = np.asarray(self.material, dtype=np.float64)
        self.transport = np.asarray(self.transport, dtype=np.float64)
        if self.material.shape != self.transport.shape or self.material.ndim != 1:
            raise DimensionMismatchError(
                f"product {self.product_id}: material/transport costs must be equal-length vectors"
            )
        ship = self.ship_cost
        if np.any(np.isnan(ship)) or np.any(ship < 0):
            raise PackselError(f"product {self.product_id}: shipping costs must be >= 0")
        if self.sales_velocity < 0 or self.damage_cost < 0:
            raise PackselError(f"product {self.product_id}: negative velocity or damage cost")
        if not 0 <= self.current_type < len(ship):
            raise IndexOutOfRangeError(
                f"product {self.product_id}: current type {self.current_type} out of range"
            )

    @property
    def ship_cost(self) -> np.ndarray:
        return self.material + self.transport


@dataclass(frozen=True)
class MaskRuleSet:
    """Business rules that forbid <product, type> pairs.

    Types the product cannot fit into (infinite shipping cost) are always
    masked; the remaining four rule families can be switched off.

    Attributes:
        restrict_flags: liquid / fragile / hazardous products may not use the
            listed types unless they already ship in that exact type.
        protect_high_damage: forbid less robust types than the current one for
            selling products whose current damage rate exceeds
            ``high_damage_factor`` times the mean current rate.
        restrict_low_damage: forbid more robust and more expensive types for
            products whose current damage rate is below ``low_damage_factor``
            times the mean current rate.
        category_ban: forbid ``category_banned_types`` for products with a
            positive value in any of ``category_ban_features`` (0-based
            feature columns, typically category one-hots).
    """

    restrict_flags: bool = True
    liquid_types: tuple[str, ...] = ("JM", "PS", "PL", "NAP")
    fragile_types: tuple[str, ...] = ("T", "CP", "JM", "PS", "PL", "NAP")
    hazardous_types: tuple[str, ...] = ("PS", "PL", "NAP")
    protect_high_damage: bool = True
    high_damage_factor: float = 2.0
    restrict_low_damage: bool = True
    low_damage_factor: float = 0.25
    category_ban: bool = True
    category_ban_features: tuple[int, ...] = ()
    category_banned_types: tuple[str, ...] = ("NAP",)

    @classmethod
    def disabled(cls) -> "MaskRuleSet":
        return cls(
            restrict_flags=False,
            protect_high_damage=False,
            restrict_low_damage=False,
            category_ban=False,
        )

    @classmethod
    def from_config(
        cls, cfg: Mapping[str, str], feature_names: Sequence[str] = ()
    ) -> "MaskRuleSet":
        """Build from a flat ``key = value`` mapping (see :func:`packsel.io.read_kv_config`)."""
        kwargs = {}
        bools = ("restrict_flags", "protect_high_damage", "restrict_low_damage", "category_ban")
        floats = ("high_damage_factor", "low_damage_factor")
        names = ("liquid_types", "fragile_types", "hazardous_types", "category_banned_types")
        for key, raw in cfg.items():
            if key in bools:
                kwargs[key] = _parse_bool(raw)
            elif key in floats:
                kwargs[key] = float(raw)
            elif key in names:
                kwargs[key] = tuple(s.strip() for s in raw.split(",") if s.strip())
            elif key == "category_ban_features":
                cols = []
                for tok in (s.strip() for s in raw.split(",")):
                    if not tok:
                        continue
                    if tok in feature_names:
                        cols.append(list(feature_names).index(tok))
                    else:
                        cols.append(int(tok) - 1)
                kwargs[key] = tuple(cols)
            else:
                raise PackselError(f"unknown mask rule key {key!r}")
        return cls(**kwargs)


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise PackselError(f"not a boolean: {raw!r}")


@dataclass(frozen=True, eq=False)
class CostMatrices:
    """Net shipment cost S, net damage cost D and infeasibility mask M.

    Masked cells of S whose input cost was infinite hold ``nan``; feasibility
    is read from ``M`` only.
    """

    S: np.ndarray
    D: np.ndarray
    M: np.ndarray
    t_damage_cur: float = 0.0
    current: np.ndarray | None = None
    product_ids: tuple[str, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        S = np.array(self.S, dtype=np.float64)
        D = np.array(self.D, dtype=np.float64)
        M = np.array(self.M, dtype=bool)
        if S.ndim != 2 or S.shape != D.shape or S.shape != M.shape:
            raise DimensionMismatchError(
                f"S {S.shape}, D {D.shape} and M {M.shape} must be equal 2-D shapes"
            )
        if S.shape[1] < 1:
            raise DimensionMismatchError("need at least one package type")
        infinite = np.isinf(S)
        if np.any(infinite & ~M):
            raise PackselError("infinite shipping cost on an unmasked cell")
        if not np.all(np.isfinite(D)):
            raise PackselError("damage costs must be finite")
        S[infinite] = np.nan
        if np.any(np.isnan(S) & ~M):
            raise PackselError("nan shipping cost on an unmasked cell")
        dead = np.flatnonzero(M.all(axis=1))
        if dead.size:
            raise InfeasibleProductError(dead)
        current = self.current
        if current is not None:
            current = np.array(current, dtype=np.intp)
            if current.shape != (S.shape[0],):
                raise DimensionMismatchError("current assignment length differs from m")
            if np.any((current < 0) | (current >= S.shape[1])):
                raise IndexOutOfRangeError("current type index out of range")
            current.setflags(write=False)
        for arr in (S, D, M):
            arr.setflags(write=False)
        if self.product_ids is not None:
            ids = tuple(self.product_ids)
            if len(ids) != S.shape[0]:
                raise DimensionMismatchError("product_ids length differs from m")
            object.__setattr__(self, "product_ids", ids)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "current", current)
        object.__setattr__(self, "t_damage_cur", float(self.t_damage_cur))

    @property
    def m(self) -> int:
        return self.S.shape[0]

    @property
    def n(self) -> int:
        return self.S.shape[1]

    @classmethod
    def from_arrays(cls, S, D, M=None, current=None, product_ids=None) -> "CostMatrices":
        """Build directly from arrays; ``t_damage_cur`` is derived from ``current`` if given."""
        D = np.asarray(D, dtype=np.float64)
        if M is None:
            M = np.isinf(np.asarray(S, dtype=np.float64))
        t_cur = 0.0
        if current is not None:
            cur = np.asarray(current, dtype=np.intp)
            t_cur = exact_sum(D[np.arange(D.shape[0]), cur])
        return cls(S, D, M, t_cur, current, product_ids)

    def with_values(self, S=None, D=None) -> "CostMatrices":
        S = self.S if S is None else S
        D = self.D if D is None else D
        return CostMatrices.from_arrays(
            np.where(np.isnan(S), np.inf, S), D, self.M, self.current, self.product_ids
        )


def _current_rates(records: Sequence[ProductRecord], probs: np.ndarray) -> np.ndarray:
    cur = np.array([r.current_type for r in records], dtype=np.intp)
    return probs[np.arange(len(records)), cur]


def build_mask(
    records: Sequence[ProductRecord],
    catalog: PackageCatalog,
    rules: MaskRuleSet,
    probs: np.ndarray | None = None,
) -> np.ndarray:
    """Evaluate the mask rules; ``M[i, j]`` is True iff some enabled rule fires.

    ``probs`` (m x n damage probabilities) is needed by the two damage-rate
    rules and ignored otherwise.
    """
    m, n = len(records), catalog.n
    M = np.zeros((m, n), dtype=bool)
    if m == 0:
        return M
    for r in records:
        if r.ship_cost.shape != (n,):
            raise DimensionMismatchError(
                f"product {r.product_id} has {r.ship_cost.shape[0]} ship costs, catalog has {n}"
            )
    ship = np.stack([r.ship_cost for r in records])
    cur = np.array([r.current_type for r in records], dtype=np.intp)
    rows = np.arange(m)

    M |= np.isinf(ship)

    if rules.restrict_flags:
        for flag, types in (
            ("liquid", rules.liquid_types),
            ("fragile", rules.fragile_types),
            ("hazardous", rules.hazardous_types),
        ):
            cols = catalog.indices(types)
            if not cols:
                continue
            flagged = np.array([getattr(r, flag) for r in records], dtype=bool)
            block = np.zeros((m, n), dtype=bool)
            block[np.ix_(flagged, cols)] = True
            block[rows, cur] = False
            M |= block

    needs_rates = rules.protect_high_damage or rules.restrict_low_damage
    if needs_rates and probs is not None:
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (m, n):
            raise DimensionMismatchError(f"probs shape {probs.shape} != {(m, n)}")
        rate = _current_rates(records, probs)
        mean_rate = rate.mean()
        cols = np.arange(n)[None, :]
        if rules.protect_high_damage:
            velocity = np.array([r.sales_velocity for r in records])
            high = (rate > rules.high_damage_factor * mean_rate) & (velocity > 0)
            M |= high[:, None] & (cols < cur[:, None])
        if rules.restrict_low_damage:
            low = rate < rules.low_damage_factor * mean_rate
            with np.errstate(invalid="ignore"):
                dearer = ship > ship[rows, cur][:, None]
            M |= low[:, None] & (cols > cur[:, None]) & dearer

    if rules.category_ban and rules.category_ban_features:
        cols = catalog.indices(rules.category_banned_types)
        feats = np.stack([r.features for r in records])
        in_category = (feats[:, list(rules.category_ban_features)] > 0).any(axis=1)
        M[np.ix_(in_category, cols)] = True

    dead = np.flatnonzero(M.all(axis=1))
    if dead.size:
        raise InfeasibleProductError(dead)
    return M


def build_cost_matrices(
    records: Sequence[ProductRecord],
    catalog: PackageCatalog,
    probs,
    rules: MaskRuleSet | None = None,
) -> CostMatrices:
    """S = shipping cost x velocity, D = damage probability x velocity x damage cost."""
    probs = np.asarray(probs, dtype=np.float64)
    m, n = len(records), catalog.n
    if probs.shape != (m, n):
        raise DimensionMismatchError(f"probs shape {probs.shape} != {(m, n)}")
    if np.any(~np.isfinite(probs)) or np.any((probs < 0) | (probs > 1)):
        raise PackselError("damage probabilities must lie in [0, 1]")
    rules = MaskRuleSet.disabled() if rules is None else rules
    M = build_mask(records, catalog, rules, probs)
    if m == 0:
        return CostMatrices(np.zeros((0, n)), np.zeros((0, n)), M, 0.0, np.zeros(0, int), ())
    ship = np.stack([r.ship_cost for r in records])
    velocity = np.array([r.sales_velocity for r in records], dtype=np.float64)
    damage = np.array([r.damage_cost for r in records], dtype=np.float64)
    with np.errstate(invalid="ignore"):
        S = ship * velocity[:, None]
    # inf * 0 velocity stays infeasible
    S[np.isinf(ship)] = np.inf
    D = probs * (velocity * damage)[:, None]
    cur = np.array([r.current_type for r in records], dtype=np.intp)
    return CostMatrices.from_arrays(S, D, M, cur, tuple(r.product_id for r in records))


def compute_delta_bound(costs: CostMatrices) -> float:
    """Largest per-product spread of D over feasible types; bounds any jump of D(X_lambda)."""
    if costs.m == 0:
        return 0.0
    feasible = ~costs.M
    hi = np.where(feasible, costs.D, -np.inf).max(axis=1)
    lo = np.where(feasible, costs.D, np.inf).min(axis=1)
    return float((hi - lo).max())
