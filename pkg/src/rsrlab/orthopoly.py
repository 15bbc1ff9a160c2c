"""Normalized Hermite polynomials and orthonormal bases built from moments.

Bases come from a Cholesky factorization of the Hankel moment matrix
``H[i, j] = E[x^(i+j)]``: with ``H = L L^T`` the rows of ``L^{-1}`` are the
monomial coefficients of the orthonormal polynomials. The Hankel matrix is
equilibrated by its diagonal before factoring, which keeps product-normal
bases accurate to about 1e-11 in the Gram matrix up to degree 20.

Fixed numerical limits: degrees above ``MAX_DEGREE`` are rejected (double
precision factorials), and a Cholesky pivot of the equilibrated matrix below
``PIVOT_TOL`` is treated as a singular Hankel matrix.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .distributions import gaussian_moment

MAX_DEGREE = 60
PIVOT_TOL = 1e-12
GRAM_TOL = 1e-9


class BasisError(ValueError):
    """Hankel matrix is not (numerically) positive definite."""

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


@dataclass(frozen=True)
class PolynomialCoeffs:
    """Dense monomial coefficients, index = exponent."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficient")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:1]
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def __getitem__(self, exponent: int) -> float:
        return float(self.coeffs[exponent]) if exponent < self.coeffs.size else 0.0


def _check_degree(m: int) -> None:
    if not 0 <= m <= MAX_DEGREE:
        raise ValueError(f"degree must lie in [0, {MAX_DEGREE}], got {m}")


def hermite_normalized(m: int) -> PolynomialCoeffs:
    """h_m = He_m / sqrt(m!) via h_{j+1} = (x h_j - sqrt(j) h_{j-1}) / sqrt(j+1)."""
    _check_degree(m)
    prev = np.zeros(m + 2)
    cur = np.zeros(m + 2)
    cur[0] = 1.0
    for j in range(m):
        nxt = np.zeros(m + 2)
        nxt[1:] = cur[:-1]
        nxt -= math.sqrt(j) * prev
        nxt /= math.sqrt(j + 1)
        prev, cur = cur, nxt
    return PolynomialCoeffs(cur[: m + 1])


def hermite_closed_form(m: int) -> PolynomialCoeffs:
    """Explicit coefficients (-1)^j sqrt(m!) / (2^j j! (m-2j)!) at exponent m - 2j."""
    _check_degree(m)
    c = np.zeros(m + 1)
    root = math.sqrt(math.factorial(m))
    for j in range(m // 2 + 1):
        c[m - 2 * j] = (-1) ** j * root / (2**j * math.factorial(j) * math.factorial(m - 2 * j))
    return PolynomialCoeffs(c)


def diagonal_coeff_sq(i: int) -> float:
    """Square of the constant coefficient of h_i: i! / (2^i ((i/2)!)^2)."""
    if i % 2:
        raise ValueError("degree must be even")
    _check_degree(i)
    half = math.factorial(i // 2)
    return float(Fraction(math.factorial(i), 2**i * half * half))


@dataclass(frozen=True)
class OrthonormalBasis:
    """Orthonormal polynomials p_0..p_k; row j of ``transform`` gives p_j."""

    max_degree: int
    transform: np.ndarray
    moment_source: str = ""
    gram_error: float = 0.0

    def polynomial(self, j: int) -> PolynomialCoeffs:
        return PolynomialCoeffs(self.transform[j, : j + 1])

    def evaluate(self, x) -> np.ndarray:
        """Values p_j(x) for j = 0..k; shape (k+1,) or (k+1, len(x))."""
        x = np.asarray(x, dtype=float)
        powers = x[..., None] ** np.arange(self.max_degree + 1)
        return np.moveaxis(powers @ self.transform.T, -1, 0)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x^{i}" for i in range(self.max_degree + 1)])
        for row in self.transform:
            w.writerow([f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def hankel(moment_oracle: Callable[[int], float], k: int) -> np.ndarray:
    mom = np.array([float(moment_oracle(ell)) for ell in range(2 * k + 1)])
    idx = np.add.outer(np.arange(k + 1), np.arange(k + 1))
    return mom[idx]


def _cholesky(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > PIVOT_TOL:
            raise BasisError(f"Hankel matrix not positive definite at degree {j} (pivot {pivot:.3e})", pivot=j)
        L[j, j] = math.sqrt(pivot)
        L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def build_basis(moment_oracle: Callable[[int], float], k: int, name: str = "") -> OrthonormalBasis:
    """Orthonormal polynomials of degree <= k for the measure with the given moments."""
    _check_degree(k)
    H = hankel(moment_oracle, k)
    d = np.diag(H)
    if np.any(d <= 0):
        j = int(np.flatnonzero(d <= 0)[0])
        raise BasisError(f"non-positive even moment at degree {j}", pivot=j)
    s = 1.0 / np.sqrt(d)
    L = _cholesky(H * np.outer(s, s))
    T = np.linalg.solve(L, np.eye(k + 1)) * s[None, :]
    T = np.tril(T)
    err = float(np.abs(T @ H @ T.T - np.eye(k + 1)).max())
    if err > GRAM_TOL:
        raise BasisError(f"Gram matrix deviates from identity by {err:.3e} at k={k}")
    return OrthonormalBasis(k, T, name, err)


def christoffel_sum(basis: OrthonormalBasis, x0: float) -> float:
    """K_k(x0) = sum_j p_j(x0)^2."""
    return float(np.sum(basis.evaluate(x0) ** 2))


def gaussian_oracle(ell: int) -> float:
    return gaussian_moment(ell)


def product_normal_oracle(ell: int) -> float:
    """Moments of lam * g with lam, g independent N(0, 1): c_ell^2."""
    c = gaussian_moment(ell)
    return c * c
