"""Phase-one simplex for ``A w = b, w >= 0`` on a dense tableau.

Bland's rule on both the entering and leaving choice, so the method cannot
cycle. When the system is infeasible the phase-one duals give a Farkas vector
``y`` with ``A^T y <= 0`` and ``b^T y > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls


@dataclass
class LPResult:
    feasible: bool
    x: np.ndarray | None
    farkas: np.ndarray | None
    iterations: int
    method: str = "simplex"
    residual: float = float("nan")


class CyclingError(RuntimeError):
    pass


def phase_one(A, b, tol: float = 1e-11, max_iter: int | None = None) -> LPResult:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    r, N = A.shape
    scale = np.max(np.abs(np.column_stack([A, b])), axis=1)
    scale[scale == 0] = 1.0
    sign = np.where(b < 0, -1.0, 1.0)
    rowmul = sign / scale
    As = A * rowmul[:, None]
    bs = b * rowmul

    T = np.zeros((r + 1, N + r + 1))
    T[:r, :N] = As
    T[:r, N : N + r] = np.eye(r)
    T[:r, -1] = bs
    T[r, :N] = -As.sum(axis=0)
    T[r, -1] = -bs.sum()
    basis = np.arange(N, N + r)
    max_iter = max_iter or 50 * (N + r)

    it = 0
    while True:
        cost = T[r, : N + r]
        cand = np.flatnonzero(cost < -tol)
        if cand.size == 0:
            break
        if it >= max_iter:
            raise CyclingError(f"no convergence after {it} pivots")
        j = cand[0]
        col = T[:r, j]
        pos = np.flatnonzero(col > tol)
        if pos.size == 0:
            # unbounded ray cannot occur in phase one (objective bounded below)
            raise CyclingError("unbounded direction in phase one")
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        i = ties[np.argmin(basis[ties])]
        T[i] /= T[i, j]
        others = np.arange(r + 1) != i
        T[others] -= np.outer(T[others, j], T[i])
        basis[i] = j
        it += 1

    objective = -T[r, -1]
    if objective > 1e3 * tol * max(1.0, np.abs(bs).max()):
        y_scaled = 1.0 - T[r, N : N + r]
        return LPResult(False, None, y_scaled * rowmul, it)
    x = np.zeros(N)
    real = basis < N
    x[basis[real]] = np.maximum(T[:r, -1][real], 0.0)
    x = _polish(A, b, x)
    return LPResult(True, x, None, it, residual=float(np.abs(A @ x - b).max()))


def _polish(A, b, x):
    """Re-solve the active columns by least squares; keep only if still >= 0."""
    support = np.flatnonzero(x > 0)
    if support.size == 0:
        return x
    w, *_ = np.linalg.lstsq(A[:, support], b, rcond=None)
    if np.all(w >= 0) and np.abs(A[:, support] @ w - b).max() <= np.abs(A @ x - b).max():
        out = np.zeros_like(x)
        out[support] = w
        return out
    return x


def nnls_fallback(A, b, sum_row: int | None = None) -> LPResult:
    """Nonnegative least squares on the row-equilibrated system."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.max(np.abs(np.column_stack([A, b])), axis=1)
    scale[scale == 0] = 1.0
    x, _ = nnls(A / scale[:, None], b / scale, maxiter=50 * A.shape[1])
    x = np.where(x > 1e-15, x, 0.0)
    x = _polish(A, b, x)
    return LPResult(True, x, None, 0, "nnls", float(np.abs(A @ x - b).max()))


def feasible_point(A, b, tol: float = 1e-11) -> LPResult:
    """Phase-one simplex with the NNLS fallback when pivoting does not finish."""
    try:
        return phase_one(A, b, tol)
    except CyclingError:
        return nnls_fallback(A, b)
