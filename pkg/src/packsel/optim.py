"""Deterministic projected first-order minimiser shared by model fitting routines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    projected_grad_norm: float


def projected_gradient(
    fun,
    x0,
    lower=None,
    *,
    max_iter: int = 5000,
    ftol: float = 1e-12,
    gtol: float = 1e-7,
    memory: int = 10,
) -> MinimizeResult:
    """Spectral (Barzilai-Borwein) projected gradient with nonmonotone backtracking.

    ``fun(x)`` returns ``(value, gradient)``.  ``lower`` gives per-coordinate
    lower bounds (``-inf`` for free coordinates); iterates are projected onto
    them after every step, so bound feasibility is exact.  The best iterate
    seen is returned.
    """
    x = np.array(x0, dtype=np.float64)
    lower = np.full_like(x, -np.inf) if lower is None else np.asarray(lower, dtype=np.float64)

    def project(v):
        return np.maximum(v, lower)

    x = project(x)
    f, g = fun(x)
    history = [f]
    best_x, best_f = x.copy(), f
    pg = float(np.max(np.abs(project(x - g) - x), initial=0.0))
    step = 1.0 / max(pg, 1.0)
    converged = pg <= gtol
    it = 0
    while not converged and it < max_iter:
        it += 1
        d = project(x - step * g) - x
        gd = float(g @ d)
        f_ref = max(history[-memory:])
        t = 1.0
        while True:
            x_new = x + t * d
            f_new, g_new = fun(x_new)
            if f_new <= f_ref + 1e-4 * t * gd:
                break
            t *= 0.5
            if t < 1e-16:
                break
        if t < 1e-16:
            # no descent possible along d at machine precision
            converged = True
            break
        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 1e10
        step = min(max(step, 1e-10), 1e10)
        delta = abs(f - f_new)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if f < best_f:
            best_x, best_f = x.copy(), f
        pg = float(np.max(np.abs(project(x - g) - x), initial=0.0))
        converged = pg <= gtol or delta <= ftol * max(1.0, abs(f))
    if f <= best_f:
        best_x, best_f = x, f
    return MinimizeResult(best_x, best_f, it, converged, pg)
