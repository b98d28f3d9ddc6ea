"""Post-hoc calibration of raw damage probabilities and calibration diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from packsel.errors import (
    DomainError,
    EmptyInputError,
    LengthMismatchError,
    PackselError,
    SingleClassDataError,
)
from packsel.optim import projected_gradient

CAL_FORMAT = "packsel-calibration"
CAL_VERSION = 1
_CLIP = 1e-12

METHODS = ("isotonic", "platt", "weight_correction", "identity")


def _logit(p):
    p = np.clip(np.asarray(p, dtype=np.float64), _CLIP, 1 - _CLIP)
    return np.log(p) - np.log1p(-p)


def _sigmoid(s):
    return np.exp(-np.logaddexp(0.0, -np.asarray(s, dtype=np.float64)))


@dataclass(frozen=True, eq=False)
class CalibrationMap:
    """Monotone map from raw to calibrated probability.

    isotonic: left-continuous step function through ``knots_x`` / ``knots_y``,
    flat beyond the first and last knot.  platt: ``sigmoid(a * logit(p) + b)``.
    weight_correction: logit shift by ``-log((1 - tau) / tau)``.
    """

    method: str
    knots_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    knots_y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    a: float = 1.0
    b: float = 0.0
    tau: float = 0.5

    def __post_init__(self):
        if self.method not in METHODS:
            raise PackselError(f"unknown calibration method {self.method!r}")
        kx = np.asarray(self.knots_x, dtype=np.float64)
        ky = np.asarray(self.knots_y, dtype=np.float64)
        if self.method == "isotonic":
            if len(kx) == 0 or kx.shape != ky.shape:
                raise PackselError("isotonic map needs equal-length, non-empty knots")
            if np.any(np.diff(kx) <= 0) or np.any(np.diff(ky) < 0):
                raise PackselError("isotonic knots must increase strictly in x and weakly in y")
        object.__setattr__(self, "knots_x", kx)
        object.__setattr__(self, "knots_y", ky)

    def __call__(self, raw):
        raw = np.asarray(raw, dtype=np.float64)
        if self.method == "identity":
            return raw.copy()
        if self.method == "isotonic":
            pos = np.searchsorted(self.knots_x, raw, side="right") - 1
            return self.knots_y[np.clip(pos, 0, len(self.knots_y) - 1)]
        if self.method == "platt":
            return _sigmoid(self.a * _logit(raw) + self.b)
        return _sigmoid(_logit(raw) - math.log((1 - self.tau) / self.tau))

    def to_text(self) -> str:
        def vec(a):
            return " ".join(repr(float(v)) for v in a)

        lines = [f"format = {CAL_FORMAT}", f"version = {CAL_VERSION}", f"method = {self.method}"]
        if self.method == "isotonic":
            lines += [f"knots_x = {vec(self.knots_x)}", f"knots_y = {vec(self.knots_y)}"]
        elif self.method == "platt":
            lines += [f"a = {self.a!r}", f"b = {self.b!r}"]
        elif self.method == "weight_correction":
            lines += [f"tau = {self.tau!r}"]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CalibrationMap":
        kv = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                key, _, value = line.partition("=")
                kv[key.strip()] = value.strip()
        if kv.get("format") != CAL_FORMAT or int(kv.get("version", -1)) != CAL_VERSION:
            raise PackselError("not a packsel calibration file (or unsupported version)")
        method = kv["method"]
        if method == "isotonic":
            return cls(
                method,
                knots_x=[float(t) for t in kv["knots_x"].split()],
                knots_y=[float(t) for t in kv["knots_y"].split()],
            )
        if method == "platt":
            return cls(method, a=float(kv["a"]), b=float(kv["b"]))
        if method == "weight_correction":
            return cls(method, tau=float(kv["tau"]))
        return cls(method)


def _check_pair(raw, labels):
    raw = np.asarray(raw, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if raw.shape != labels.shape:
        raise LengthMismatchError(f"{raw.shape[0]} scores vs {labels.shape[0]} labels")
    if raw.size == 0:
        raise EmptyInputError("calibration needs at least one observation")
    return raw, labels


def pava(y, w=None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit to the sequence ``y``."""
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    # each block: [weighted mean, total weight, length]
    means, weights, sizes = [], [], []
    for yi, wi in zip(y, w):
        means.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            wt = weights[-2] + weights[-1]
            mu = (means[-2] * weights[-2] + means[-1] * weights[-1]) / wt
            size = sizes[-2] + sizes[-1]
            del means[-1], weights[-1], sizes[-1]
            means[-1], weights[-1], sizes[-1] = mu, wt, size
    return np.repeat(means, sizes)


def fit_isotonic(raw, labels) -> CalibrationMap:
    """Isotonic (pool-adjacent-violators) calibration.

    Tied raw scores are pooled first, so the fit is a function of the score.
    """
    raw, labels = _check_pair(raw, labels)
    xs, inverse, counts = np.unique(raw, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=labels)
    fitted = pava(sums / counts, counts)
    # keep one knot per constant block (its left end)
    start = np.concatenate([[True], np.diff(fitted) > 0])
    return CalibrationMap("isotonic", knots_x=xs[start], knots_y=np.clip(fitted[start], 0, 1))


def fit_platt(raw, labels, max_iter: int = 2000) -> CalibrationMap:
    """Platt scaling on the logit of the raw probability, fitted by unweighted log-loss."""
    raw, labels = _check_pair(raw, labels)
    if np.unique(labels).size < 2:
        raise SingleClassDataError("Platt scaling needs both classes")
    s = _logit(raw)
    if np.ptp(s) == 0:
        # slope is unidentifiable; a constant map at the base rate
        base = labels.mean()
        return CalibrationMap("platt", a=0.0, b=float(_logit(base)))
    X = np.column_stack([s, np.ones_like(s)])

    def fun(theta):
        z = X @ theta
        per_row = np.logaddexp(0.0, np.where(labels == 1, -z, z))
        return float(per_row.mean()), X.T @ (_sigmoid(z) - labels) / len(labels)

    res = projected_gradient(fun, np.array([1.0, 0.0]), max_iter=max_iter, ftol=1e-15, gtol=1e-10)
    return CalibrationMap("platt", a=float(res.x[0]), b=float(res.x[1]))


def apply_weight_correction(raw, tau: float):
    """Undo class weighting (1 - tau on damaged, tau on undamaged) by shifting the logit."""
    if not 0 < tau < 1:
        raise DomainError("tau must lie strictly between 0 and 1")
    raw_arr = np.asarray(raw, dtype=np.float64)
    if np.any((raw_arr <= 0) | (raw_arr >= 1)):
        raise DomainError("raw probability must lie strictly between 0 and 1")
    logit = np.log(raw_arr) - np.log1p(-raw_arr)
    out = _sigmoid(logit - math.log((1 - tau) / tau))
    return float(out) if np.ndim(raw) == 0 else out


def weight_correction_map(tau: float) -> CalibrationMap:
    if not 0 < tau < 1:
        raise DomainError("tau must lie strictly between 0 and 1")
    return CalibrationMap("weight_correction", tau=tau)


def log_loss(p_cal, labels) -> float:
    """Mean per-shipment log-loss with probabilities clipped to [1e-12, 1 - 1e-12]."""
    p = np.asarray(p_cal, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise LengthMismatchError(f"{p.shape[0]} probabilities vs {y.shape[0]} labels")
    if p.size == 0:
        raise EmptyInputError("log-loss of nothing")
    p = np.clip(p, _CLIP, 1 - _CLIP)
    return float(np.mean(-y * np.log(p) - (1 - y) * np.log1p(-p)))


@dataclass(frozen=True)
class ReliabilityRow:
    package_type: int
    weighted_abs_diff: float
    n_shipments: int


@dataclass(frozen=True)
class ReliabilityReport:
    rows: tuple[ReliabilityRow, ...]
    empty_groups: tuple[int, ...] = ()

    def as_dict(self) -> dict[int, float]:
        return {r.package_type: r.weighted_abs_diff for r in self.rows}


def _merge_tied(buckets, p):
    """Join neighbouring buckets that share a p value at their boundary."""
    merged = []
    for b in buckets:
        if not b.size:
            continue
        if merged and p[merged[-1][-1]] == p[b[0]]:
            merged[-1] = np.concatenate([merged[-1], b])
        else:
            merged.append(b)
    return merged


def reliability_report(p_cal, labels, group, quantiles: int = 20, n_groups: int | None = None):
    """Per group: count-weighted mean of |damage rate - mean p_cal| over equal-count buckets.

    Shipments are ranked by ``p_cal`` with ties broken by input position, and
    split into ``quantiles`` buckets whose sizes differ by at most one.
    Buckets that would split a run of equal ``p_cal`` values are joined, so
    the result never depends on how tied shipments are ordered.
    Groups in ``range(n_groups)`` with no shipments are listed in
    ``empty_groups``.
    """
    p = np.asarray(p_cal, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    g = np.asarray(group).ravel()
    if not (p.shape == y.shape == g.shape):
        raise LengthMismatchError("p_cal, labels and group must align")
    if quantiles < 1:
        raise PackselError("quantiles must be >= 1")
    present = sorted(set(g.tolist()))
    rows = []
    for key in present:
        idx = np.flatnonzero(g == key)
        order = idx[np.argsort(p[idx], kind="stable")]
        total = 0.0
        for bucket in _merge_tied(np.array_split(order, quantiles), p):
            diff = abs(math.fsum(y[bucket]) / bucket.size - math.fsum(p[bucket]) / bucket.size)
            total += bucket.size / idx.size * diff
        rows.append(ReliabilityRow(key, total, int(idx.size)))
    empty = ()
    if n_groups is not None:
        empty = tuple(k for k in range(n_groups) if k not in set(present))
    return ReliabilityReport(tuple(rows), empty)
