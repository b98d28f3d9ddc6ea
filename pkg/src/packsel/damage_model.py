"""Rank-monotone logistic model of transit-damage probability.

The score of product features ``z`` shipped in type ``k`` (0 = least robust) is

    f(z, k) = w . x(z) + beta_last + sum(eps[k:])

with every ``eps`` >= 0, so the package offset can only fall as robustness
rises and predicted damage is non-increasing in ``k`` for every product.
Equivalently the design row is ``[x(z), p_k]`` with the cumulative encoding
``p_k`` from :func:`encode_package_feature`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from packsel.errors import (
    ConvergenceWarning,
    DimensionMismatchError,
    IndexOutOfRangeError,
    LengthMismatchError,
    NonFiniteFeatureError,
    PackselError,
    SingleClassDataError,
)
from packsel.optim import projected_gradient

MODEL_FORMAT = "packsel-monotone-logistic"
MODEL_VERSION = 1


@dataclass
class ShipmentRecord:
    product_id: str
    features: np.ndarray
    package_index: int
    label: int


@dataclass(eq=False)
class ShipmentTable:
    """Column-oriented shipments; ``package_index`` is 0-based."""

    product_ids: np.ndarray
    features: np.ndarray
    package_index: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.product_ids = np.asarray(self.product_ids, dtype=object)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(len(self.product_ids), -1)
        self.package_index = np.asarray(self.package_index, dtype=np.intp)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        N = len(self.product_ids)
        if not (self.features.shape[0] == len(self.package_index) == len(self.labels) == N):
            raise LengthMismatchError("shipment columns have different lengths")
        if np.any((self.labels != 0) & (self.labels != 1)):
            raise PackselError("labels must be 0 or 1")

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_records(cls, records: Sequence[ShipmentRecord]) -> "ShipmentTable":
        if not records:
            return cls(np.zeros(0, dtype=object), np.zeros((0, 0)), np.zeros(0), np.zeros(0))
        return cls(
            np.array([r.product_id for r in records], dtype=object),
            np.stack([np.asarray(r.features, dtype=np.float64) for r in records]),
            np.array([r.package_index for r in records]),
            np.array([r.label for r in records]),
        )

    def to_records(self) -> list[ShipmentRecord]:
        return [
            ShipmentRecord(str(p), f.copy(), int(k), int(y))
            for p, f, k, y in zip(self.product_ids, self.features, self.package_index, self.labels)
        ]

    def take(self, idx) -> "ShipmentTable":
        return ShipmentTable(
            self.product_ids[idx], self.features[idx], self.package_index[idx], self.labels[idx]
        )


def encode_package_feature(k: int, n: int) -> np.ndarray:
    """Cumulative encoding of type ``k`` (0-based): ``k`` zeros followed by ``n - k`` ones."""
    if not 0 <= k < n:
        raise IndexOutOfRangeError(f"package index {k} outside 0..{n - 1}")
    p = np.ones(n)
    p[:k] = 0.0
    return p


def _package_design(types: np.ndarray, n: int) -> np.ndarray:
    return (np.arange(n)[None, :] >= np.asarray(types)[:, None]).astype(np.float64)


def augment_dataset(data: ShipmentTable, n: int) -> ShipmentTable:
    """Add implied shipments: damages at less robust types, non-damages at more robust ones.

    Originals come first in input order, followed by the synthetic rows of
    each original in turn (types ascending).
    """
    if len(data) and (data.package_index.min() < 0 or data.package_index.max() >= n):
        raise IndexOutOfRangeError("package index outside the catalog")
    src, types = [], []
    for row, (k, y) in enumerate(zip(data.package_index, data.labels)):
        extra = range(0, k) if y == 1 else range(k + 1, n)
        src.extend([row] * len(extra))
        types.extend(extra)
    src = np.array(src, dtype=np.intp)
    extra = data.take(src)
    return ShipmentTable(
        np.concatenate([data.product_ids, extra.product_ids]),
        np.concatenate([data.features, extra.features]),
        np.concatenate([data.package_index, np.array(types, dtype=np.intp)]),
        np.concatenate([data.labels, extra.labels]),
    )


def expand_features(x: np.ndarray, degree: int) -> np.ndarray:
    """Optional degree-2 polynomial expansion (squares and pairwise products)."""
    if degree == 1:
        return x
    if degree != 2:
        raise PackselError(f"unsupported expansion degree {degree}")
    iu, ju = np.triu_indices(x.shape[1])
    return np.hstack([x, x[:, iu] * x[:, ju]])


@dataclass(eq=False)
class MonotoneLogisticModel:
    """Trained parameters plus the feature preprocessing they were fitted on."""

    w: np.ndarray
    eps: np.ndarray
    beta_n: float
    mean: np.ndarray
    scale: np.ndarray
    degree: int = 1
    converged: bool = True
    loss: float = float("nan")

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.eps = np.asarray(self.eps, dtype=np.float64)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        self.beta_n = float(self.beta_n)

    @property
    def n_types(self) -> int:
        return len(self.eps) + 1

    @property
    def n_features(self) -> int:
        return len(self.mean)

    def betas(self) -> np.ndarray:
        """Per-type offsets, ``betas[k] = beta_n + sum(eps[k:])``."""
        tail = np.concatenate([np.cumsum(self.eps[::-1])[::-1], [0.0]])
        return self.beta_n + tail

    def transform(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if Z.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"model expects {self.n_features} features, got {Z.shape[1]}"
            )
        return expand_features((Z - self.mean) / self.scale, self.degree)

    def product_score(self, Z) -> np.ndarray:
        return self.transform(Z) @ self.w

    def decision_function(self, Z, k) -> np.ndarray:
        k = np.asarray(k)
        if np.any((k < 0) | (k >= self.n_types)):
            raise IndexOutOfRangeError("package index out of range")
        return self.product_score(Z) + self.betas()[k]

    def predict_matrix(self, Z) -> np.ndarray:
        """Damage probability for every row of ``Z`` and every type (rows x n)."""
        scores = self.product_score(Z)[:, None] + self.betas()[None, :]
        return _sigmoid(scores)

    def parameters(self) -> np.ndarray:
        return np.concatenate([self.w, self.eps, [self.beta_n]])

    def to_text(self) -> str:
        def vec(a):
            return " ".join(repr(float(v)) for v in a)

        lines = [
            f"format = {MODEL_FORMAT}",
            f"version = {MODEL_VERSION}",
            f"n_types = {self.n_types}",
            f"degree = {self.degree}",
            f"mean = {vec(self.mean)}",
            f"scale = {vec(self.scale)}",
            f"w = {vec(self.w)}",
            f"eps = {vec(self.eps)}",
            f"beta_n = {self.beta_n!r}",
            f"converged = {str(self.converged).lower()}",
            f"loss = {float(self.loss)!r}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MonotoneLogisticModel":
        kv = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                key, _, value = line.partition("=")
                kv[key.strip()] = value.strip()
        if kv.get("format") != MODEL_FORMAT or int(kv.get("version", -1)) != MODEL_VERSION:
            raise PackselError("not a packsel model file (or unsupported version)")

        def vec(key):
            return np.array([float(t) for t in kv[key].split()], dtype=np.float64)

        model = cls(
            w=vec("w"),
            eps=vec("eps"),
            beta_n=float(kv["beta_n"]),
            mean=vec("mean"),
            scale=vec("scale"),
            degree=int(kv["degree"]),
            converged=kv.get("converged", "true") == "true",
            loss=float(kv.get("loss", "nan")),
        )
        if model.n_types != int(kv["n_types"]):
            raise PackselError("n_types does not match eps length")
        return model


def _sigmoid(s):
    return np.exp(-np.logaddexp(0.0, -s))


@dataclass(frozen=True)
class TrainConfig:
    """Training options.

    ``tau`` weights class 0 and ``1 - tau`` weights class 1 in the loss.
    """

    tau: float = 0.007
    max_epochs: int = 5000
    tol: float = 1e-12
    gtol: float = 1e-8
    degree: int = 1
    augment: bool = False

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise PackselError("tau must lie strictly between 0 and 1")
        if self.max_epochs < 1:
            raise PackselError("max_epochs must be >= 1")


def class_weights(labels: np.ndarray, tau: float) -> np.ndarray:
    return np.where(labels == 1, 1.0 - tau, tau)


def weighted_loss_and_grad(theta, X, y, weights):
    """Mean class-weighted cross-entropy of linear scores ``X @ theta`` and its gradient."""
    s = X @ theta
    # -log sigmoid(s) for y=1, -log(1 - sigmoid(s)) for y=0
    per_row = np.logaddexp(0.0, np.where(y == 1, -s, s))
    N = len(y)
    loss = float(weights @ per_row) / N
    resid = weights * (_sigmoid(s) - y)
    return loss, X.T @ resid / N


def design_matrix(x_expanded: np.ndarray, types: np.ndarray, n: int) -> np.ndarray:
    """Rows ``[x, p_k]`` matching the parameter layout ``[w, eps, beta_n]``."""
    return np.hstack([x_expanded, _package_design(types, n)])


def train(data: ShipmentTable, n: int, cfg: TrainConfig = TrainConfig()) -> MonotoneLogisticModel:
    """Fit by projected first-order descent; ``eps`` is clipped at 0 after every step.

    Set ``cfg.augment`` to apply :func:`augment_dataset` first.
    """
    if cfg.augment:
        data = augment_dataset(data, n)
    if len(data) == 0 or np.unique(data.labels).size < 2:
        raise SingleClassDataError("training data needs both damaged and undamaged shipments")
    if not np.all(np.isfinite(data.features)):
        raise NonFiniteFeatureError("features contain nan or inf")
    if data.package_index.min() < 0 or data.package_index.max() >= n:
        raise IndexOutOfRangeError("package index outside the catalog")

    mean = data.features.mean(axis=0)
    scale = data.features.std(axis=0)
    scale[scale == 0] = 1.0
    x = expand_features((data.features - mean) / scale, cfg.degree)
    X = design_matrix(x, data.package_index, n)
    y = data.labels.astype(np.float64)
    weights = class_weights(data.labels, cfg.tau)

    n_w = x.shape[1]
    lower = np.full(X.shape[1], -np.inf)
    lower[n_w : n_w + n - 1] = 0.0

    res = projected_gradient(
        lambda th: weighted_loss_and_grad(th, X, y, weights),
        np.zeros(X.shape[1]),
        lower,
        max_iter=cfg.max_epochs,
        ftol=cfg.tol,
        gtol=cfg.gtol,
    )
    if not res.converged:
        warnings.warn(
            f"training stopped after {res.iterations} epochs without meeting tolerance",
            ConvergenceWarning,
            stacklevel=2,
        )
    theta = res.x
    return MonotoneLogisticModel(
        w=theta[:n_w],
        eps=theta[n_w : n_w + n - 1],
        beta_n=theta[-1],
        mean=mean,
        scale=scale,
        degree=cfg.degree,
        converged=res.converged,
        loss=res.fun,
    )


def predict_probability(model: MonotoneLogisticModel, z, k: int) -> float:
    """p(damage | z, type k), k 0-based."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise DimensionMismatchError("expected a single feature vector")
    return float(_sigmoid(model.decision_function(z[None, :], k))[0])


@dataclass(frozen=True)
class MonotonicityReport:
    ok: bool
    worst_violation: float
    n_checked: int = 0
    violations: tuple = field(default=(), repr=False)


def check_rank_monotonicity(model: MonotoneLogisticModel, samples) -> MonotonicityReport:
    """True iff predicted damage never rises with robustness for any sample.

    ``worst_violation`` is the largest increase p(k+1) - p(k) found (0 if none).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        return MonotonicityReport(True, 0.0, 0)
    P = model.predict_matrix(samples.reshape(-1, model.n_features))
    rise = np.diff(P, axis=1)
    worst = float(max(rise.max(), 0.0))
    bad = np.argwhere(rise > 0)
    return MonotonicityReport(
        worst == 0.0, worst, len(P), tuple((int(i), int(k)) for i, k in bad[:20])
    )
