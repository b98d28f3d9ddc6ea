import numpy as np
import pytest

from packsel.catalog import (
    CostMatrices,
    MaskRuleSet,
    PackageCatalog,
    ProductRecord,
    build_cost_matrices,
    build_mask,
    compute_delta_bound,
)
from packsel.errors import DimensionMismatchError, InfeasibleProductError, PackselError

CAT = PackageCatalog.default()


def record(current="C", **kw):
    base = dict(
        product_id="p", features=np.zeros(2), current_type=CAT.index(current),
        sales_velocity=1.0, damage_cost=1.0, material=np.arange(1.0, 9.0), transport=np.zeros(8),
    )
    base.update(kw)
    return ProductRecord(**base)


def flags_only():
    return MaskRuleSet(protect_high_damage=False, restrict_low_damage=False, category_ban=False)


def test_catalog_names_and_default():
    assert CAT.n == 8
    assert CAT.names == ("NAP", "PL", "PS", "JM", "CP", "T", "V", "C")
    assert PackageCatalog.default(3).names == ("T1", "T2", "T3")
    with pytest.raises(PackselError):
        PackageCatalog(("A",))
    with pytest.raises(PackselError):
        PackageCatalog(("A", "A"))


def test_single_cell_formulas():
    r = ProductRecord("x", np.zeros(1), 0, 1.0, 4.0, np.array([1.0, 5.0]), np.array([2.0, 0.0]))
    costs = build_cost_matrices([r], PackageCatalog.default(2), [[0.5, 0.2]])
    assert costs.S[0, 0] == 3.0
    r10 = ProductRecord("x", np.zeros(1), 0, 10.0, 4.0, np.array([1.0, 5.0]), np.array([2.0, 0.0]))
    assert build_cost_matrices([r10], PackageCatalog.default(2), [[0.5, 0.2]]).D[0, 0] == 20.0


def test_two_by_two_matrices(two_by_two_records):
    records, cat, probs = two_by_two_records
    costs = build_cost_matrices(records, cat, probs)
    # recomputed by hand from (material + transport) * velocity and p * velocity * C
    np.testing.assert_array_equal(costs.S, [[3.0, 6.0], [1.5, 2.5]])
    np.testing.assert_array_equal(costs.D, [[6.0, 2.0], [1.0, 0.5]])
    assert not costs.M.any()
    assert costs.t_damage_cur == 6.5
    assert costs.product_ids == ("A", "B")


def test_liquid_in_c_masks_inferior_types():
    M = build_mask([record("C", liquid=True)], CAT, flags_only())
    np.testing.assert_array_equal(M[0].astype(int), [1, 1, 1, 1, 0, 0, 0, 0])


def test_fragile_current_type_exempt():
    M = build_mask([record("PS", fragile=True)], CAT, flags_only())
    assert not M[0, CAT.index("PS")]
    np.testing.assert_array_equal(M[0].astype(int), [1, 1, 0, 1, 1, 1, 0, 0])


def test_no_flags_rules_disabled_all_zero():
    assert not build_mask([record()], CAT, MaskRuleSet.disabled()).any()


def test_oversize_always_masked():
    t = np.zeros(8)
    t[:2] = np.inf
    M = build_mask([record(transport=t)], CAT, MaskRuleSet.disabled())
    np.testing.assert_array_equal(M[0].astype(int), [1, 1, 0, 0, 0, 0, 0, 0])


def test_high_damage_forbids_less_robust():
    recs = [record("JM", product_id=f"p{i}") for i in range(4)]
    probs = np.full((4, 8), 0.01)
    probs[0] = 0.5
    rules = MaskRuleSet(restrict_flags=False, restrict_low_damage=False, category_ban=False)
    M = build_mask(recs, CAT, rules, probs)
    np.testing.assert_array_equal(M[0].astype(int), [1, 1, 1, 0, 0, 0, 0, 0])
    assert not M[1:].any()


def test_low_damage_forbids_dearer_robust_types():
    recs = [record("JM", product_id=f"p{i}") for i in range(4)]
    probs = np.full((4, 8), 0.2)
    probs[0] = 0.001
    rules = MaskRuleSet(restrict_flags=False, protect_high_damage=False, category_ban=False)
    M = build_mask(recs, CAT, rules, probs)
    np.testing.assert_array_equal(M[0].astype(int), [0, 0, 0, 0, 1, 1, 1, 1])
    assert not M[1:].any()


def test_category_ban_on_feature_column():
    rules = MaskRuleSet(restrict_flags=False, protect_high_damage=False, restrict_low_damage=False,
                        category_ban_features=(1,))
    recs = [record(features=np.array([0.0, 1.0])), record(features=np.array([1.0, 0.0]))]
    M = build_mask(recs, CAT, rules)
    assert M[0, 0] and M[0, 1:].sum() == 0
    assert not M[1].any()


def test_rules_from_config_names_and_ints():
    rules = MaskRuleSet.from_config(
        {"restrict_flags": "no", "category_ban_features": "cat_a, 3", "high_damage_factor": "3"},
        feature_names=["w", "cat_a", "cat_b"],
    )
    assert rules.category_ban_features == (1, 2)
    assert rules.high_damage_factor == 3.0 and not rules.restrict_flags
    with pytest.raises(PackselError):
        MaskRuleSet.from_config({"bogus": "1"})


def test_all_masked_row_raises():
    t = np.full(8, np.inf)
    with pytest.raises(InfeasibleProductError):
        build_mask([record(transport=t)], CAT, MaskRuleSet.disabled())


def test_probs_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        build_cost_matrices([record()], CAT, np.zeros((1, 7)))


def test_infinite_cost_stored_as_sentinel():
    costs = CostMatrices.from_arrays([[np.inf, 1.0]], [[1.0, 0.5]])
    assert costs.M[0, 0] and np.isnan(costs.S[0, 0])
    with pytest.raises(PackselError):
        CostMatrices([[np.inf, 1.0]], [[1.0, 0.5]], [[False, False]])
    with pytest.raises(ValueError):
        costs.S[0, 1] = 3.0


def test_t_damage_cur_matches_current_assignment():
    rng = np.random.default_rng(5)
    D = rng.uniform(0, 1, (50, 4))
    cur = rng.integers(0, 4, 50)
    costs = CostMatrices.from_arrays(rng.uniform(0, 1, (50, 4)), D, current=cur)
    import math

    assert costs.t_damage_cur == math.fsum(D[np.arange(50), cur])


@pytest.mark.parametrize(
    "D, M, expected",
    [
        ([[5.0, 2.0, 9.0]], [[0, 0, 1]], 3.0),
        ([[0.0, 3.0], [1.0, 8.0]], [[0, 0], [0, 0]], 7.0),
        ([[4.0, 1.0], [2.0, 6.0]], [[0, 1], [1, 0]], 0.0),
    ],
)
def test_delta_bound(D, M, expected):
    costs = CostMatrices(np.ones_like(np.array(D)), D, np.array(M, bool))
    assert compute_delta_bound(costs) == expected
