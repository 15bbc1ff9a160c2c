"""Low-degree advantage: exact values, bounds and a brute-force evaluator.

The advantage of degree k on m samples is the largest normalized mean gap

    max_f (E_{P^m}[f] - E_{Q^m}[f]) / sqrt(Var_{Q^m}[f])

over polynomials f of total degree <= k in the m*n sample coordinates.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .distributions import gaussian_moment
from .measures import DiscreteMeasure
from .orthopoly import build_basis, diagonal_coeff_sq

log = logging.getLogger(__name__)

MAX_MONOMIALS = 2000
PINV_RTOL = 1e-10


@dataclass(frozen=True)
class AdvantageReport:
    k: int
    m: int
    value: float
    kind: str = "exact"
    components: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("exact", "upper_bound", "monte_carlo_lower"):
            raise ValueError(f"unknown report kind {self.kind!r}")
        if not self.value >= 0:
            raise ValueError("advantage must be non-negative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def radial_moment_oracle(scale_moment: Callable[[int], float] = gaussian_moment, n: int = 1):
    """Moments of s = lam * ||g|| (symmetrized), g ~ N(0, I_n).

    Odd moments vanish; E[s^(2l)] = E[lam^(2l)] * prod_{i<l} (n + 2i). For
    n = 1 this is the law of lam * g.
    """

    def oracle(ell: int) -> float:
        if ell % 2:
            return 0.0
        half = ell // 2
        chi = 1.0
        for i in range(half):
            chi *= n + 2 * i
        return scale_moment(ell) * chi

    return oracle


def lda_single_pointmass(
    alpha: float,
    k: int,
    scale_moment: Callable[[int], float] = gaussian_moment,
    n: int = 1,
) -> AdvantageReport:
    """Exact single-sample advantage of (1 - alpha) Q + alpha delta_0 against Q.

    Rotation averaging makes the optimal test radial, so the n-dimensional
    problem reduces to the 1-D symmetric law of lam * ||g|| and the value is
    alpha * sqrt(K_k(0) - 1) for that law's Christoffel sum at 0.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    basis = build_basis(radial_moment_oracle(scale_moment, n), k, name=f"radial(n={n})")
    at0 = basis.evaluate(0.0)[1:]
    comps = [float((alpha * v) ** 2) for v in at0]
    return AdvantageReport(k, 1, alpha * math.sqrt(float(np.sum(at0**2))), "exact", comps)


def lift_bound(delta: float, m: int) -> float:
    """sqrt((1 + delta^2)^m - 1)."""
    if delta < 0 or m < 1:
        raise ValueError("need delta >= 0 and m >= 1")
    return math.sqrt(math.expm1(m * math.log1p(delta * delta)))


def theorem_bound(alpha: float, k: int, m: int, C: float) -> float:
    """sqrt((1 + C^2 alpha^2 k)^m - 1); ``C`` has no default on purpose."""
    if min(alpha, k, m, C) < 0:
        raise ValueError("all arguments must be non-negative")
    return math.sqrt(math.expm1(m * math.log1p(C * C * alpha * alpha * k)))


def mean_var_ratio_max(k: int) -> float:
    """Max of |E q| / sqrt(Var q) over q(lam, g) of degree <= k with q(0, 0) = 0.

    Equals sqrt of the sum of a_{i1}^2 a_{i2}^2 over even (i1, i2) != (0, 0)
    with i1 + i2 <= k, where a_i^2 is the squared constant term of h_i.
    """
    if not 0 <= k <= 30:
        raise ValueError("k must lie in [0, 30]")
    total = 0.0
    for i1 in range(0, k + 1, 2):
        for i2 in range(0, k - i1 + 1, 2):
            if i1 or i2:
                total += diagonal_coeff_sq(i1) * diagonal_coeff_sq(i2)
    return math.sqrt(total)


def monomial_exponents(nvars: int, k: int) -> list[tuple[int, ...]]:
    """Exponent vectors of all monomials of total degree 1..k in ``nvars`` variables."""
    out = []
    for deg in range(1, k + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), deg):
            e = [0] * nvars
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    return out


def _product_measure(mu: DiscreteMeasure, m: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.array(list(itertools.product(range(mu.size), repeat=m)), dtype=int)
    points = mu.support[idx].reshape(idx.shape[0], m * mu.dim)
    weights = np.prod(mu.weights[idx], axis=1)
    return points, weights


def _features(points: np.ndarray, exps: np.ndarray) -> np.ndarray:
    return np.prod(points[:, None, :] ** exps[None, :, :], axis=2)


def lda_bruteforce(P: DiscreteMeasure, Q: DiscreteMeasure, k: int, m: int) -> AdvantageReport:
    """Exact advantage for finitely supported P, Q by a generalized Rayleigh quotient.

    Builds every monomial of degree 1..k on (R^n)^m, forms the mean gap d and
    the Q-covariance G over the product supports and returns sqrt(d^T G^+ d).
    Directions with Q-variance below ``PINV_RTOL`` times the largest are
    dropped; any part of d along them is reported in the log, not counted.
    """
    if P.dim != Q.dim:
        raise ValueError("P and Q live in different dimensions")
    nvars = m * Q.dim
    n_mono = math.comb(nvars + k, k) - 1
    if n_mono > MAX_MONOMIALS:
        raise ValueError(f"{n_mono} monomials exceed the guard of {MAX_MONOMIALS}")
    if k == 0:
        return AdvantageReport(k, m, 0.0)
    exps = np.array(monomial_exponents(nvars, k), dtype=int)
    qp, qw = _product_measure(Q, m)
    pp, pw = _product_measure(P, m)
    fq = _features(qp, exps)
    mean_q = qw @ fq
    gap = pw @ _features(pp, exps) - mean_q
    # G = A^T A with A the weighted, centered features; working with the SVD
    # of A instead of an eigendecomposition of G avoids squaring its condition
    A = np.sqrt(qw)[:, None] * (fq - mean_q)

    var = np.einsum("ij,ij->j", A, A)
    live = var > PINV_RTOL * max(var.max(), 0.0)
    if not np.any(live) or var.max() <= 0:
        raise ValueError("Q is a point mass: covariance is fully degenerate")
    s = 1.0 / np.sqrt(var[live])
    _, sv, vt = np.linalg.svd(A[:, live] * s, full_matrices=False)
    dv = gap[live] * s
    keep = sv**2 > PINV_RTOL * sv[0] ** 2
    proj = vt[keep] @ dv
    contrib = (proj / sv[keep]) ** 2
    value2 = float(np.sum(contrib))
    lost = float(np.linalg.norm(dv - vt[keep].T @ proj)) + float(np.linalg.norm(gap[~live]))
    if lost > 1e-9:
        log.warning("mean gap has %.3e along Q-degenerate directions (ignored)", lost)
    return AdvantageReport(k, m, math.sqrt(max(value2, 0.0)), "exact", [float(v) for v in contrib])
