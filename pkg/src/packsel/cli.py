"""Command-line entry point: ``packsel <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 budget unreachable or
equivalence verdict false.  Data goes to files or stdout, diagnostics to
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from packsel import io
from packsel.calibration import (
    CalibrationMap,
    fit_isotonic,
    fit_platt,
    log_loss,
    reliability_report,
    weight_correction_map,
)
from packsel.catalog import MaskRuleSet, PackageCatalog, build_cost_matrices
from packsel.damage_model import MonotoneLogisticModel, TrainConfig, train
from packsel.equivalence import EquivalenceReport, sweep_cost_curve, verify_equivalence
from packsel.errors import PackselError
from packsel.lambda_search import LambdaSearchConfig, determine_lambda
from packsel.solver import evaluate, recommend_new_product, solve_tikhonov
from packsel.synthetic import GeneratorConfig, generate_products, generate_shipments

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(args, header, values, payload=None):
    if args.json:
        print(json.dumps(payload if payload is not None else dict(zip(header, values))))
    else:
        print(",".join(header))
        print(",".join(_fmt(v) for v in values))


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _catalog(args, n):
    if getattr(args, "types", None):
        cat = PackageCatalog(tuple(s.strip() for s in args.types.split(",")))
        if cat.n != n:
            raise PackselError(f"--types lists {cat.n} types, data has {n}")
        return cat
    return PackageCatalog.default(n)


def _load_costs(args):
    records, feature_names, n = io.read_products_csv(args.products)
    ids, P = io.read_probs_csv(args.probs)
    P = io.align_probs(records, ids, P)
    catalog = _catalog(args, n)
    rules = MaskRuleSet.disabled()
    if args.mask_rules:
        rules = MaskRuleSet.from_config(io.read_kv_config(args.mask_rules), feature_names)
    return records, catalog, P, build_cost_matrices(records, catalog, P, rules)


def _budget_cfg(args):
    if (args.gamma is None) == (args.budget is None):
        raise UsageError("give exactly one of --gamma or --budget")
    return LambdaSearchConfig(
        budget=args.budget, gamma=args.gamma, rho=args.rho, lambda_max=args.lambda_max
    )


# -- subcommands --------------------------------------------------------------


def cmd_gen_synthetic(args):
    cfg = GeneratorConfig(
        seed=args.seed,
        m=args.m,
        n=args.n,
        feature_dim=args.feature_dim,
        shipments_per_product=args.shipments_per_product,
        oversize_prob=args.oversize_prob,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    products = generate_products(cfg)
    shipments, truth = generate_shipments(products, cfg)
    io.write_products_csv(out / "products.csv", products, cfg.n)
    io.write_shipments_csv(out / "shipments.csv", shipments)
    (out / "truth_model.txt").write_text(truth.to_text(), encoding="utf-8")
    Z = np.stack([p.features for p in products]) if products else np.zeros((0, cfg.feature_dim))
    io.write_probs_csv(out / "truth_probs.csv", [p.product_id for p in products], truth.predict_matrix(Z))
    _emit(args, ["products", "shipments", "out_dir"], [len(products), len(shipments), str(out)])
    return EXIT_OK


def cmd_train(args):
    table, _ = io.read_shipments_csv(args.shipments)
    n = args.n_types or int(table.package_index.max()) + 1
    cfg = TrainConfig(
        tau=args.tau, max_epochs=args.max_epochs, degree=args.degree, augment=args.augment
    )
    model = train(table, n, cfg)
    Path(args.out).write_text(model.to_text(), encoding="utf-8")
    _emit(
        args,
        ["rows", "loss", "converged", "model"],
        [len(table), float(model.loss), model.converged, args.out],
    )
    return EXIT_OK


def cmd_calibrate(args):
    model = MonotoneLogisticModel.from_text(Path(args.model).read_text(encoding="utf-8"))
    table, _ = io.read_shipments_csv(args.shipments)
    raw = model.predict_matrix(table.features)[np.arange(len(table)), table.package_index]
    if args.method == "isotonic":
        cal = fit_isotonic(raw, table.labels)
    elif args.method == "platt":
        cal = fit_platt(raw, table.labels)
    elif args.method == "weight_correction":
        cal = weight_correction_map(args.tau)
    else:
        cal = CalibrationMap("identity")
    Path(args.out).write_text(cal.to_text(), encoding="utf-8")
    p_cal = cal(raw)
    if args.report:
        report = reliability_report(
            p_cal, table.labels, table.package_index, args.quantiles, model.n_types
        )
        io.write_reliability_csv(args.report, report)
    _emit(
        args,
        ["method", "log_loss_raw", "log_loss_calibrated"],
        [args.method, log_loss(raw, table.labels), log_loss(p_cal, table.labels)],
    )
    return EXIT_OK


def cmd_predict(args):
    model = MonotoneLogisticModel.from_text(Path(args.model).read_text(encoding="utf-8"))
    records, _, n = io.read_products_csv(args.products)
    if n != model.n_types:
        raise PackselError(f"model has {model.n_types} types, products have {n}")
    Z = np.stack([r.features for r in records]) if records else np.zeros((0, model.n_features))
    P = model.predict_matrix(Z)
    if args.calibration:
        cal = CalibrationMap.from_text(Path(args.calibration).read_text(encoding="utf-8"))
        P = cal(P)
    io.write_probs_csv(args.out or sys.stdout, [r.product_id for r in records], P)
    return EXIT_OK


def _write_recs(args, costs, outcome):
    if args.json:
        rows = io.recommendation_rows(costs, outcome)
        print(json.dumps({"header": list(io.RECOMMENDATION_HEADER), "rows": rows[:-1], "totals": rows[-1]}))
    else:
        io.write_recommendations_csv(args.out or sys.stdout, costs, outcome)


def cmd_solve(args):
    _, _, _, costs = _load_costs(args)
    outcome = solve_tikhonov(costs, args.lambda_)
    _write_recs(args, costs, outcome)
    return EXIT_OK


def cmd_evaluate(args):
    _, _, _, costs = _load_costs(args)
    ids, chosen, _ = io.read_recommendations_csv(args.recommendations)
    if list(ids) != list(costs.product_ids):
        raise PackselError("recommendation rows do not match the products file")
    out = evaluate(costs, chosen, args.lambda_)
    _emit(
        args,
        ["ship_cost", "damage_cost", "objective"],
        [out.ship_cost, out.damage_cost, out.objective],
    )
    return EXIT_OK


def cmd_search_lambda(args):
    cfg = _budget_cfg(args)
    _, _, _, costs = _load_costs(args)
    res = determine_lambda(costs, cfg)
    if args.out:
        io.write_recommendations_csv(args.out, costs, res.outcome)
    _emit(
        args,
        ["lambda", "iterations", "ship_cost", "damage_cost", "feasible"],
        [res.lambda_, res.iterations, res.outcome.ship_cost, res.outcome.damage_cost, res.feasible],
    )
    if not res.feasible:
        print(f"damage budget {res.budget!r} unreachable with lambda <= {cfg.lambda_max}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_sweep(args):
    _, _, _, costs = _load_costs(args)
    segments = sweep_cost_curve(costs)
    header = ["lambda_lo", "lambda_hi", "ship_cost", "damage_cost", "objective_mid"]
    rows = [[s.lambda_lo, s.lambda_hi, s.ship_cost, s.damage_cost, s.objective_mid] for s in segments]
    if args.json:
        print(json.dumps({"header": header, "rows": rows}))
    else:
        io.write_rows(args.out or sys.stdout, header, [[_fmt(float(v)) for v in r] for r in rows])
    return EXIT_OK


def cmd_verify(args):
    cfg = _budget_cfg(args)
    _, _, _, costs = _load_costs(args)
    report = verify_equivalence(costs, cfg.resolve_budget(costs), cfg.rho, cfg.lambda_max)
    if args.json:
        payload = {k: getattr(report, k) for k in report.__dataclass_fields__}
        print(json.dumps(payload))
    else:
        print(EquivalenceReport.CSV_HEADER)
        print(report.csv_row())
    return EXIT_OK if report.verdict else EXIT_INFEASIBLE


def cmd_recommend_new(args):
    records, catalog, P, costs = _load_costs(args)
    rows = []
    for i, r in enumerate(records):
        unit_damage = P[i] * r.damage_cost
        k = recommend_new_product(r.ship_cost, unit_damage, costs.M[i], args.lambda_)
        rows.append([r.product_id, k + 1, catalog.names[k]])
    header = ["product_id", "recommended_type", "type_name"]
    if args.json:
        print(json.dumps({"header": header, "rows": rows}))
    else:
        io.write_rows(args.out or sys.stdout, header, rows)
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_cost_inputs(p):
    p.add_argument("--products", required=True, help="products CSV")
    p.add_argument("--probs", required=True, help="damage probabilities CSV (from predict)")
    p.add_argument("--mask-rules", help="key = value file configuring the mask rules")
    p.add_argument("--types", help="comma-separated type names, least robust first")


def _add_budget(p):
    p.add_argument("--gamma", type=float, help="budget as a multiple of the current damage cost")
    p.add_argument("--budget", type=float, help="absolute damage-cost budget")
    p.add_argument("--rho", type=float, default=1e-3)
    p.add_argument("--lambda-max", type=float, default=1000.0)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file supplying option defaults")
    common.add_argument("--json", action="store_true", help="emit reports as one JSON object")
    common.add_argument("--threads", type=int, default=1, help="worker cap (output never depends on it)")

    parser = _Parser(prog="packsel", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synthetic", parents=[common], help="write a seeded synthetic data set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--feature-dim", type=int, default=4)
    p.add_argument("--shipments-per-product", type=int, default=20)
    p.add_argument("--oversize-prob", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("train", parents=[common], help="fit the monotone damage model")
    p.add_argument("--shipments", required=True)
    p.add_argument("--n-types", type=int)
    p.add_argument("--tau", type=float, default=0.007)
    p.add_argument("--degree", type=int, default=1, choices=(1, 2))
    p.add_argument("--max-epochs", type=int, default=5000)
    p.add_argument("--augment", action="store_true", help="add implied shipments before fitting")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", parents=[common], help="fit a calibration map on held-out shipments")
    p.add_argument("--model", required=True)
    p.add_argument("--shipments", required=True)
    p.add_argument("--method", default="isotonic",
                   choices=("isotonic", "platt", "weight_correction", "identity"))
    p.add_argument("--tau", type=float, default=0.007)
    p.add_argument("--quantiles", type=int, default=20)
    p.add_argument("--report", help="write the per-type reliability CSV here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", parents=[common], help="damage probability per product and type")
    p.add_argument("--model", required=True)
    p.add_argument("--products", required=True)
    p.add_argument("--calibration")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("solve", parents=[common], help="recommend types at a fixed lambda")
    _add_cost_inputs(p)
    p.add_argument("--lambda", dest="lambda_", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", parents=[common], help="totals of a recommendation CSV")
    _add_cost_inputs(p)
    p.add_argument("--recommendations", required=True)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("search-lambda", parents=[common], help="bisect lambda for a damage budget")
    _add_cost_inputs(p)
    _add_budget(p)
    p.add_argument("--out", help="also write the recommendation CSV here")
    p.set_defaults(func=cmd_search_lambda)

    p = sub.add_parser("sweep", parents=[common], help="piecewise-constant cost curve over lambda")
    _add_cost_inputs(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", parents=[common], help="check the bisected lambda against brute force")
    _add_cost_inputs(p)
    _add_budget(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("recommend-new", parents=[common], help="velocity-free recommendation")
    _add_cost_inputs(p)
    p.add_argument("--lambda", dest="lambda_", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_recommend_new)
    parser.subcommands = sub.choices
    return parser


def _config_defaults(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    cfg = io.read_kv_config(known.config)
    out = {}
    for key, value in cfg.items():
        key = key.replace("-", "_")
        out["lambda_" if key == "lambda" else key] = value
    return out


def _apply_config(parser, defaults):
    for sub in parser.subcommands.values():
        actions = {a.dest: a for a in sub._actions}
        values = {}
        for key, raw in defaults.items():
            action = actions.get(key)
            if action is None:
                continue
            if isinstance(action, argparse._StoreTrueAction):
                values[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                values[key] = action.type(raw) if action.type else raw
            action.required = False
        sub.set_defaults(**values)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        defaults = _config_defaults(argv)
        if defaults:
            _apply_config(parser, defaults)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (PackselError, OSError) as exc:
        print(f"packsel: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())
