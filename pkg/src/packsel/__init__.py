"""Package-type recommendation: monotone damage model, calibration and cost trade-off solver."""

from packsel.catalog import (
    CostMatrices,
    MaskRuleSet,
    PackageCatalog,
    ProductRecord,
    build_cost_matrices,
    build_mask,
    compute_delta_bound,
)
from packsel.calibration import (
    CalibrationMap,
    apply_weight_correction,
    fit_isotonic,
    fit_platt,
    log_loss,
    reliability_report,
)
from packsel.damage_model import (
    MonotoneLogisticModel,
    ShipmentRecord,
    ShipmentTable,
    TrainConfig,
    augment_dataset,
    check_rank_monotonicity,
    encode_package_feature,
    predict_probability,
    train,
)
from packsel.equivalence import (
    brute_force_ivanov,
    brute_force_tikhonov,
    check_noncollinearity,
    enumerate_breakpoints,
    sweep_cost_curve,
    verify_equivalence,
)
from packsel.lambda_search import LambdaSearchConfig, determine_lambda
from packsel.solver import Assignment, SolveOutcome, evaluate, recommend_new_product, solve_tikhonov

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "CalibrationMap",
    "CostMatrices",
    "LambdaSearchConfig",
    "MaskRuleSet",
    "MonotoneLogisticModel",
    "PackageCatalog",
    "ProductRecord",
    "ShipmentRecord",
    "ShipmentTable",
    "SolveOutcome",
    "TrainConfig",
    "apply_weight_correction",
    "augment_dataset",
    "brute_force_ivanov",
    "brute_force_tikhonov",
    "build_cost_matrices",
    "build_mask",
    "check_noncollinearity",
    "check_rank_monotonicity",
    "compute_delta_bound",
    "determine_lambda",
    "encode_package_feature",
    "enumerate_breakpoints",
    "evaluate",
    "fit_isotonic",
    "fit_platt",
    "log_loss",
    "predict_probability",
    "recommend_new_product",
    "reliability_report",
    "solve_tikhonov",
    "sweep_cost_curve",
    "train",
    "verify_equivalence",
]
