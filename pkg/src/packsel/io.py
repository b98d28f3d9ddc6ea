"""CSV and ``key = value`` file formats.

Package types are 1-based in every file and 0-based in memory.  Floats are
written with ``repr`` so that a write / read round trip is bit-exact.
"""

from __future__ import annotations

import csv
import io as _io
import math
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from packsel.catalog import CostMatrices, ProductRecord, exact_sum
from packsel.calibration import ReliabilityReport
from packsel.damage_model import ShipmentTable
from packsel.errors import DimensionMismatchError, PackselError
from packsel.solver import SolveOutcome

PRODUCT_FIXED = ("fragile", "liquid", "hazardous", "current_type", "sales_velocity", "damage_cost")
RECOMMENDATION_HEADER = (
    "product_id", "current_type", "recommended_type", "S_cur", "S_new", "D_cur", "D_new",
)
TOTAL_LABEL = "TOTAL"


def parse_kv(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise PackselError(f"line {lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def read_kv_config(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text(encoding="utf-8"))


def _num(x: float) -> str:
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return "inf"
    return repr(x)


def _float(tok: str, where: str, allow_inf: bool = False) -> float:
    try:
        x = float(tok)
    except ValueError:
        raise PackselError(f"{where}: not a number: {tok!r}") from None
    if math.isnan(x) or (math.isinf(x) and not allow_inf):
        raise PackselError(f"{where}: value {tok!r} not allowed here")
    return x


def _open_out(dest):
    if dest is None or hasattr(dest, "write"):
        return dest, False
    return open(dest, "w", encoding="utf-8", newline=""), True


def _writer(fh: TextIO):
    return csv.writer(fh, lineterminator="\n")


def _read_rows(source) -> tuple[list[str], list[list[str]]]:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    rows = [r for r in csv.reader(_io.StringIO(text)) if r]
    if not rows:
        raise PackselError("empty CSV (header required)")
    return [h.strip() for h in rows[0]], rows[1:]


# -- products -----------------------------------------------------------------


def write_products_csv(dest, records: Sequence[ProductRecord], n: int | None = None,
                       feature_names: Sequence[str] | None = None):
    if n is None:
        n = len(records[0].ship_cost) if records else 0
    F = len(records[0].features) if records else len(feature_names or ())
    feature_names = list(feature_names or (f"feature_{k}" for k in range(1, F + 1)))
    fh, close = _open_out(dest)
    try:
        w = _writer(fh)
        w.writerow(["product_id", *feature_names, *PRODUCT_FIXED,
                    *(f"ship_cost_type{k}" for k in range(1, n + 1))])
        for r in records:
            w.writerow([
                r.product_id,
                *(_num(v) for v in r.features),
                int(r.fragile), int(r.liquid), int(r.hazardous),
                r.current_type + 1,
                _num(r.sales_velocity), _num(r.damage_cost),
                *(_num(v) for v in r.ship_cost),
            ])
    finally:
        if close:
            fh.close()


def read_products_csv(source) -> tuple[list[ProductRecord], list[str], int]:
    """Returns records, feature column names and the number of package types."""
    header, rows = _read_rows(source)
    if not header or header[0] != "product_id":
        raise PackselError("products CSV must start with product_id")
    try:
        first_fixed = header.index("fragile")
    except ValueError:
        raise PackselError("products CSV lacks the fragile column") from None
    if tuple(header[first_fixed:first_fixed + len(PRODUCT_FIXED)]) != PRODUCT_FIXED:
        raise PackselError(f"expected columns {PRODUCT_FIXED} after the features")
    feature_names = header[1:first_fixed]
    cost_cols = header[first_fixed + len(PRODUCT_FIXED):]
    n = len(cost_cols)
    if n < 2 or cost_cols != [f"ship_cost_type{k}" for k in range(1, n + 1)]:
        raise PackselError("expected ship_cost_type1..ship_cost_typeN columns, N >= 2")
    records = []
    for lineno, row in enumerate(rows, 2):
        where = f"products line {lineno}"
        if len(row) != len(header):
            raise DimensionMismatchError(f"{where}: {len(row)} fields, header has {len(header)}")
        F = len(feature_names)
        fixed = row[1 + F:1 + F + len(PRODUCT_FIXED)]
        ship = np.array([_float(t, where, allow_inf=True) for t in row[1 + F + len(PRODUCT_FIXED):]])
        records.append(ProductRecord(
            product_id=row[0],
            features=np.array([_float(t, where) for t in row[1:1 + F]]),
            fragile=_flag(fixed[0], where),
            liquid=_flag(fixed[1], where),
            hazardous=_flag(fixed[2], where),
            current_type=int(fixed[3]) - 1,
            sales_velocity=_float(fixed[4], where),
            damage_cost=_float(fixed[5], where),
            material=ship,
            transport=np.zeros(n),
        ))
    return records, feature_names, n


def _flag(tok: str, where: str) -> bool:
    tok = tok.strip().lower()
    if tok in ("1", "true"):
        return True
    if tok in ("0", "false", ""):
        return False
    raise PackselError(f"{where}: bad flag {tok!r}")


# -- shipments ----------------------------------------------------------------


def write_shipments_csv(dest, table: ShipmentTable, feature_names: Sequence[str] | None = None):
    F = table.features.shape[1]
    feature_names = list(feature_names or (f"feature_{k}" for k in range(1, F + 1)))
    fh, close = _open_out(dest)
    try:
        w = _writer(fh)
        w.writerow(["product_id", *feature_names, "package_index", "label"])
        for pid, f, k, y in zip(table.product_ids, table.features, table.package_index, table.labels):
            w.writerow([pid, *(_num(v) for v in f), int(k) + 1, int(y)])
    finally:
        if close:
            fh.close()


def read_shipments_csv(source) -> tuple[ShipmentTable, list[str]]:
    header, rows = _read_rows(source)
    if header[0] != "product_id" or header[-2:] != ["package_index", "label"]:
        raise PackselError("shipments CSV must be product_id,features...,package_index,label")
    feature_names = header[1:-2]
    F = len(feature_names)
    ids, feats, types, labels = [], [], [], []
    for lineno, row in enumerate(rows, 2):
        where = f"shipments line {lineno}"
        if len(row) != len(header):
            raise DimensionMismatchError(f"{where}: {len(row)} fields, header has {len(header)}")
        ids.append(row[0])
        feats.append([_float(t, where) for t in row[1:1 + F]])
        types.append(int(row[-2]) - 1)
        labels.append(int(row[-1]))
    table = ShipmentTable(
        np.array(ids, dtype=object), np.array(feats, dtype=np.float64).reshape(len(ids), F),
        np.array(types, dtype=np.intp), np.array(labels),
    )
    return table, feature_names


# -- probabilities ------------------------------------------------------------


def write_probs_csv(dest, product_ids: Sequence[str], probs: np.ndarray):
    probs = np.asarray(probs)
    fh, close = _open_out(dest)
    try:
        w = _writer(fh)
        w.writerow(["product_id", *(f"p_type{k}" for k in range(1, probs.shape[1] + 1))])
        for pid, row in zip(product_ids, probs):
            w.writerow([pid, *(_num(v) for v in row)])
    finally:
        if close:
            fh.close()


def read_probs_csv(source) -> tuple[list[str], np.ndarray]:
    header, rows = _read_rows(source)
    n = len(header) - 1
    if header[0] != "product_id" or header[1:] != [f"p_type{k}" for k in range(1, n + 1)]:
        raise PackselError("probabilities CSV must be product_id,p_type1..p_typeN")
    ids = [r[0] for r in rows]
    P = np.array([[_float(t, "probabilities") for t in r[1:]] for r in rows], dtype=np.float64)
    return ids, P.reshape(len(ids), n)


def align_probs(records: Sequence[ProductRecord], ids: Sequence[str], P: np.ndarray) -> np.ndarray:
    """Reorder probability rows to match ``records``."""
    pos = {pid: k for k, pid in enumerate(ids)}
    try:
        return P[[pos[r.product_id] for r in records]]
    except KeyError as exc:
        raise PackselError(f"no damage probabilities for product {exc.args[0]}") from None


# -- recommendations ----------------------------------------------------------


def recommendation_rows(costs: CostMatrices, outcome: SolveOutcome) -> list[list[str]]:
    if costs.current is None:
        raise PackselError("recommendation output needs the current assignment")
    rows_idx = np.arange(costs.m)
    cur, new = costs.current, outcome.assignment.chosen
    s_cur, s_new = costs.S[rows_idx, cur], costs.S[rows_idx, new]
    d_cur, d_new = costs.D[rows_idx, cur], costs.D[rows_idx, new]
    ids = costs.product_ids or tuple(str(i) for i in range(costs.m))
    rows = [
        [ids[i], str(cur[i] + 1), str(new[i] + 1),
         _num(s_cur[i]), _num(s_new[i]), _num(d_cur[i]), _num(d_new[i])]
        for i in range(costs.m)
    ]
    rows.append([TOTAL_LABEL, "", "", _num(exact_sum(s_cur)), _num(outcome.ship_cost),
                 _num(costs.t_damage_cur), _num(outcome.damage_cost)])
    return rows


def write_recommendations_csv(dest, costs: CostMatrices, outcome: SolveOutcome):
    fh, close = _open_out(dest)
    try:
        w = _writer(fh)
        w.writerow(RECOMMENDATION_HEADER)
        w.writerows(recommendation_rows(costs, outcome))
    finally:
        if close:
            fh.close()


def read_recommendations_csv(source) -> tuple[list[str], np.ndarray, dict[str, float]]:
    """Returns product ids, 0-based recommended types and the footer totals."""
    header, rows = _read_rows(source)
    if tuple(header) != RECOMMENDATION_HEADER:
        raise PackselError("not a recommendation CSV")
    ids, chosen, totals = [], [], {}
    for row in rows:
        if row[0] == TOTAL_LABEL:
            totals = {k: float(v) for k, v in zip(header[3:], row[3:])}
            continue
        ids.append(row[0])
        chosen.append(int(row[2]) - 1)
    return ids, np.array(chosen, dtype=np.intp), totals


def write_reliability_csv(dest, report: ReliabilityReport):
    fh, close = _open_out(dest)
    try:
        w = _writer(fh)
        w.writerow(["package_type", "weighted_abs_diff", "n_shipments"])
        for r in report.rows:
            w.writerow([r.package_type + 1, _num(r.weighted_abs_diff), r.n_shipments])
    finally:
        if close:
            fh.close()


def write_rows(dest, header: Iterable[str], rows: Iterable[Iterable]):
    fh, close = _open_out(dest)
    try:
        w = _writer(fh)
        w.writerow(list(header))
        w.writerows(rows)
    finally:
        if close:
            fh.close()
