"""Constructive moment matching for the planted distribution.

The planted law puts mass ``alpha`` on the signal line (``X_n ~ mu1``) and
otherwise draws ``(lam, z) ~ mu2`` with Gaussian noise of scale ``lam`` off
the line. All mixed moments E[x_1^l1 x_n^l2] with l1 + l2 <= k agree with Q
exactly when E_mu2[lam^l1 z^l2] hits the target vector built by
``target_vector``. ``solve_mu2`` finds such a ``mu2`` on a finite grid by LP
feasibility. The remaining tools measure how interior the target is:
halfspace (Tukey) depth, random-polytope membership and polynomial
anti-concentration under the reference law nu of ``(lam, lam * g)``.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distributions import Estimate, PlantedSpec, gaussian_moment
from .measures import DiscreteMeasure
from .rng import block_ranges, stream
from .simplex import feasible_point

log = logging.getLogger(__name__)

LAMBDA_RANGE = 6.0
Z_RANGE = 12.0
DEFAULT_NODES = (41, 81)


class InfeasibleError(RuntimeError):
    """Target is outside the convex hull of the grid features."""

    def __init__(self, message: str, certificate: MomentVector | None = None):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class MomentIndexSet:
    """Even pairs (l1, l2) with 0 < l1 + l2 <= k, by total degree then l1 descending."""

    k: int
    indices: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")
        idx = tuple(
            (l1, deg - l1) for deg in range(2, self.k + 1, 2) for l1 in range(deg, -1, -2)
        )
        object.__setattr__(self, "indices", idx)

    @property
    def D(self) -> int:
        return len(self.indices)

    def position(self, pair) -> int:
        return self.indices.index(tuple(pair))

    @property
    def exponents(self) -> np.ndarray:
        return np.array(self.indices, dtype=int).reshape(-1, 2)


@dataclass(frozen=True)
class MomentVector:
    index_set: MomentIndexSet
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.shape != (self.index_set.D,):
            raise ValueError("moment vector length does not match the index set")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite moment value")
        object.__setattr__(self, "values", v)

    def __getitem__(self, pair) -> float:
        return float(self.values[self.index_set.position(pair)])

    def to_json(self) -> str:
        return json.dumps(
            {"k": self.index_set.k, "indices": [list(p) for p in self.index_set.indices],
             "values": [float(v) for v in self.values]}
        )

    @classmethod
    def from_json(cls, text: str) -> MomentVector:
        obj = json.loads(text)
        return cls(MomentIndexSet(obj["k"]), np.array(obj["values"]))


def phi_features(lam, z, idx: MomentIndexSet) -> np.ndarray:
    """Feature map lam^l1 z^l2 over the index set; shape (D,) or (N, D)."""
    lam = np.asarray(lam, dtype=float)
    z = np.asarray(z, dtype=float)
    e = idx.exponents
    return lam[..., None] ** e[:, 0] * z[..., None] ** e[:, 1]


def nu_moment(a: int, b: int) -> float:
    """E_nu[lam^a z^b] = c_b c_{a+b} for z = lam * g."""
    return gaussian_moment(b) * gaussian_moment(a + b)


def nu_mean(idx: MomentIndexSet) -> MomentVector:
    return MomentVector(idx, np.array([nu_moment(l1, l2) for l1, l2 in idx.indices]))


def sample_nu(rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    lam = rng.standard_normal(size)
    return lam, lam * rng.standard_normal(size)


def nu_feature_sampler(idx: MomentIndexSet) -> Callable[[np.random.Generator, int], np.ndarray]:
    def draw(rng, size):
        return phi_features(*sample_nu(rng, size), idx)

    return draw


def two_point_mu1(t: float) -> DiscreteMeasure:
    """Symmetric law (delta_t + delta_-t) / 2 on the signal coordinate."""
    return DiscreteMeasure(np.array([-abs(t), abs(t)]), np.array([0.5, 0.5]))


def target_vector(k: int, alpha: float, mu1: DiscreteMeasure | None = None) -> MomentVector:
    """Moments E_mu2[lam^l1 z^l2] that make P match Q up to degree k."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    mu1 = mu1 or DiscreteMeasure.point_mass([0.0])
    idx = MomentIndexSet(k)
    vals = []
    for l1, l2 in idx.indices:
        c2 = gaussian_moment(l2)
        if l1 == 0:
            vals.append((c2 * c2 - alpha * mu1.moment((l2,))) / (1.0 - alpha))
        else:
            vals.append(c2 * gaussian_moment(l1 + l2) / (1.0 - alpha))
    return MomentVector(idx, np.array(vals))


def default_grid(n_lambda: int = DEFAULT_NODES[0], n_z: int = DEFAULT_NODES[1],
                 lam_range: float = LAMBDA_RANGE, z_range: float = Z_RANGE) -> np.ndarray:
    """Tensor grid of Gauss-Legendre nodes on [-lam_range, lam_range] x [-z_range, z_range]."""
    lam = np.polynomial.legendre.leggauss(n_lambda)[0] * lam_range
    z = np.polynomial.legendre.leggauss(n_z)[0] * z_range
    L, Z = np.meshgrid(lam, z, indexing="ij")
    return np.column_stack([L.ravel(), Z.ravel()])


def check_symmetric(grid: np.ndarray, atol: float = 1e-12) -> None:
    """Raise unless the grid is closed under (lam, z) -> (-lam, z) and (lam, -z)."""
    pts = np.round(np.asarray(grid, dtype=float) / atol) * atol
    have = {tuple(p) for p in pts}
    for flip in ((-1.0, 1.0), (1.0, -1.0)):
        if any(tuple(np.round(p * flip / atol) * atol) not in have for p in pts):
            raise ValueError("grid is not symmetric under coordinate sign flips")


def solve_mu2(grid, theta: MomentVector, residual_tol: float = 1e-8) -> DiscreteMeasure:
    """Weights on grid points whose feature mean equals ``theta``.

    Raises ``InfeasibleError`` carrying a separating direction ``beta`` with
    <beta, Phi(g)> < <beta, theta> for every grid point g.
    """
    grid = np.asarray(grid, dtype=float)
    idx = theta.index_set
    if grid.shape[0] < idx.D + 1:
        raise ValueError("grid needs at least D + 1 points")
    check_symmetric(grid)
    feats = phi_features(grid[:, 0], grid[:, 1], idx)
    A = np.vstack([feats.T, np.ones(grid.shape[0])])
    b = np.append(theta.values, 1.0)
    res = feasible_point(A, b)
    if not res.feasible:
        y = res.farkas
        beta = y[:-1]
        raise InfeasibleError("target outside the grid's moment hull", MomentVector(idx, beta))
    w = res.x
    resid = float(np.abs(feats.T @ w - theta.values).max())
    if resid > residual_tol or abs(w.sum() - 1.0) > 1e-10:
        raise InfeasibleError(f"best weights leave residual {resid:.3e} > {residual_tol:.1e}")
    keep = w > 0
    return DiscreteMeasure(grid[keep], w[keep] / w[keep].sum())


def residual(mu2: DiscreteMeasure, theta: MomentVector) -> float:
    f = phi_features(mu2.support[:, 0], mu2.support[:, 1], theta.index_set)
    return float(np.abs(mu2.weights @ f - theta.values).max())


def symmetrize(mu2: DiscreteMeasure, axes: str = "both") -> DiscreteMeasure:
    """Average a measure on (lam, z) over sign flips of the chosen coordinates."""
    flips = {"z": [(1, 1), (1, -1)], "lambda": [(1, 1), (-1, 1)],
             "both": [(1, 1), (1, -1), (-1, 1), (-1, -1)]}[axes]
    pts = np.vstack([mu2.support * np.array(f) for f in flips])
    wts = np.tile(mu2.weights, len(flips)) / len(flips)
    return DiscreteMeasure.from_unnormalized(pts, wts)


@dataclass
class AlphaSearch:
    alpha: float
    probes: list = field(default_factory=list)
    monotone: bool = True
    diagnostics: str = ""


def _feasible(k, alpha, grid, mu1, residual_tol) -> bool:
    try:
        solve_mu2(grid, target_vector(k, alpha, mu1), residual_tol)
        return True
    except InfeasibleError:
        return False


def max_alpha(k: int, grid=None, mu1: DiscreteMeasure | None = None, bisect_tol: float = 1e-4,
              residual_tol: float = 1e-8, n_probes: int = 10) -> AlphaSearch:
    """Largest alpha in [0, 1/2] with a feasible mu2, by bisection."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if not _feasible(k, bisect_tol, grid, mu1, residual_tol):
        msg = f"infeasible already at alpha={bisect_tol}"
        log.info(msg)
        return AlphaSearch(0.0, diagnostics=msg)
    if _feasible(k, 0.5, grid, mu1, residual_tol):
        lo = 0.5
    else:
        lo, hi = bisect_tol, 0.5
        while hi - lo > bisect_tol:
            mid = 0.5 * (lo + hi)
            if _feasible(k, mid, grid, mu1, residual_tol):
                lo = mid
            else:
                hi = mid
    probes = [(float(a), _feasible(k, float(a), grid, mu1, residual_tol))
              for a in np.linspace(bisect_tol, 0.5, n_probes)]
    monotone = all(ok == (a <= lo) for a, ok in probes)
    if not monotone:
        log.warning("feasibility is not monotone along alpha for k=%d", k)
    return AlphaSearch(lo, probes, monotone)


def _smoothed_descent(Y: np.ndarray, u: np.ndarray, steps: int) -> tuple[np.ndarray, float]:
    """Anneal mean(sigmoid(Y u / s)) on the sphere; return the best exact direction seen."""
    N = Y.shape[0]
    best_u, best = u, np.count_nonzero(Y @ u >= 0) / N
    step = 0.3
    for t in np.geomspace(0.3, 0.003, steps):
        proj = Y @ u
        s = t * max(float(np.median(np.abs(proj))), 1e-12)

        def smooth(v):
            return float(np.mean(0.5 * (1.0 + np.tanh(0.5 * np.clip((Y @ v) / s, -60, 60)))))

        sig = 0.5 * (1.0 + np.tanh(0.5 * np.clip(proj / s, -60, 60)))
        grad = (sig * (1.0 - sig)) @ Y / (s * N)
        grad -= (grad @ u) * u
        gn = np.linalg.norm(grad)
        if gn < 1e-15:
            continue
        f0 = smooth(u)
        for _ in range(20):
            v = u - step * grad / gn
            v /= np.linalg.norm(v)
            if smooth(v) < f0:
                u = v
                step = min(1.0, step * 1.5)
                break
            step *= 0.5
        exact = np.count_nonzero(Y @ u >= 0) / N
        if exact < best:
            best_u, best = u, exact
    return best_u, best


def tukey_depth(samples, theta, n_directions: int = 1000, seed: int = 0,
                level: float = 1e-3, n_starts: int = 16, descent_steps: int = 60) -> tuple[float, float]:
    """Empirical halfspace depth of ``theta``: (lower confidence bound, upper estimate).

    Depth is affine invariant, so the search runs on whitened features:
    uniform random directions, then a temperature-annealed descent on a
    sigmoid-smoothed depth from the best ``n_starts`` of them. ``upper`` is
    the smallest exact empirical fraction seen; ``lower`` subtracts the
    Hoeffding margin sqrt(log(1/level) / (2N)).
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    theta = np.atleast_1d(np.asarray(getattr(theta, "values", theta), dtype=float))
    N = X.shape[0]
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    evals, evecs = np.linalg.eigh(cov)
    good = evals > 1e-12 * max(evals.max(), 1e-300)
    # directions with zero feature variance only add trivially deep halfspaces
    Y = (X - theta) @ (evecs[:, good] / np.sqrt(evals[good]))
    d = Y.shape[1]
    rng = stream(seed, 0x7D)

    def depth_of(U):
        out = np.empty(U.shape[1])
        for s in range(0, U.shape[1], 64):
            out[s : s + 64] = np.count_nonzero(Y @ U[:, s : s + 64] >= 0, axis=0) / N
        return out

    if d == 0:
        upper = 1.0
    else:
        U = rng.standard_normal((d, n_directions))
        U /= np.linalg.norm(U, axis=0)
        f = depth_of(U)
        upper = float(f.min())
        if d > 1:
            starts = U[:, np.argsort(f, kind="stable")[:n_starts]]
            for i in range(starts.shape[1]):
                upper = min(upper, _smoothed_descent(Y, starts[:, i], descent_steps)[1])
    margin = math.sqrt(math.log(1.0 / level) / (2.0 * N))
    return max(0.0, upper - margin), upper


def in_hull_lp(points: np.ndarray, theta) -> bool:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    A = np.vstack([pts.T, np.ones(pts.shape[0])])
    b = np.append(np.atleast_1d(np.asarray(theta, dtype=float)), 1.0)
    res = feasible_point(A, b)
    return bool(res.feasible and res.residual <= 1e-7 * max(1.0, np.abs(b).max()))


def in_hull_exhaustive(points: np.ndarray, theta, tol: float = 1e-9) -> bool:
    """Membership via every affinely independent subset of <= D + 1 points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    D = pts.shape[1]
    scale = max(1.0, np.abs(pts).max(), np.abs(theta).max())
    for size in range(1, D + 2):
        for sub in itertools.combinations(range(pts.shape[0]), size):
            M = np.vstack([pts[list(sub)].T, np.ones(size)])
            if np.linalg.matrix_rank(M, tol=1e-10 * scale) < size:
                continue
            w, *_ = np.linalg.lstsq(M, np.append(theta, 1.0), rcond=None)
            if np.all(w >= -tol) and np.abs(M @ w - np.append(theta, 1.0)).max() <= tol * scale:
                return True
    return False


def caratheodory_test(theta, feature_sampler, D: int, depth_estimate: float, trials: int,
                      seed: int, m: int | None = None) -> float:
    """Fraction of trials in which theta lies in the hull of m i.i.d. feature draws.

    ``m`` defaults to ceil((3D + 1) / depth_estimate).
    """
    if not depth_estimate > 0:
        raise ValueError("depth_estimate must be positive")
    m = m or math.ceil((3 * D + 1) / depth_estimate)
    theta = np.atleast_1d(np.asarray(getattr(theta, "values", theta), dtype=float))
    hits = 0
    for t in range(trials):
        pts = np.asarray(feature_sampler(stream(seed, 0xCA, t), m), dtype=float).reshape(m, D)
        hits += in_hull_lp(pts, theta)
    return hits / trials


def caratheodory_draws(feature_sampler, D: int, m: int, trials: int, seed: int):
    """The draws caratheodory_test uses, for comparison against other hull checks."""
    for t in range(trials):
        yield np.asarray(feature_sampler(stream(seed, 0xCA, t), m), dtype=float).reshape(m, D)


def _poly_moments(beta: MomentVector) -> tuple[float, float]:
    """Exact mean and variance of p_beta = <beta, Phi> under nu."""
    e = beta.index_set.exponents
    b = beta.values
    mean = float(sum(bi * nu_moment(*ei) for bi, ei in zip(b, e)))
    second = 0.0
    for (bi, ei), (bj, ej) in itertools.product(zip(b, e), repeat=2):
        second += bi * bj * nu_moment(ei[0] + ej[0], ei[1] + ej[1])
    return mean, second - mean * mean


@dataclass(frozen=True)
class TailReport:
    estimate: float
    se: float
    mean: float
    variance: float
    bound_lemma: float
    bound_carbery_wright: float


def _nu_poly_values(beta: MomentVector, trials: int, seed: int, tag: int):
    for b, lo, hi in block_ranges(trials, 1 << 18):
        lam, z = sample_nu(stream(seed, tag, b), hi - lo)
        yield phi_features(lam, z, beta.index_set) @ beta.values


def anticonc_tail(beta: MomentVector, delta: float, t: float | None = None, trials: int = 100_000,
                  seed: int = 0, C: float = 1.0) -> TailReport:
    """Pr_nu[|p_beta - t| <= delta |E p_beta|] with the two theoretical envelopes.

    ``t`` defaults to E p_beta. Envelopes: C k (sqrt(k) delta)^(1/2k) and the
    Carbery-Wright form C k delta^(1/k), both for the caller's C.
    """
    if trials < 100_000:
        raise ValueError("trials must be at least 1e5")
    mean, var = _poly_moments(beta)
    if abs(mean) < 1e-12:
        raise ValueError("|E p_beta| is below 1e-12; the bound is vacuous")
    t = mean if t is None else t
    hits = sum(int(np.count_nonzero(np.abs(v - t) <= delta * abs(mean)))
               for v in _nu_poly_values(beta, trials, seed, 0xAC))
    p = hits / trials
    k = beta.index_set.k
    return TailReport(p, math.sqrt(max(p * (1 - p), 1 / trials) / trials), mean, var,
                      C * k * (math.sqrt(k) * delta) ** (1 / (2 * k)), C * k * delta ** (1 / k))


def band_probability(beta: MomentVector, delta: float, trials: int, seed: int) -> Estimate:
    """Pr_nu[|p - E p| <= delta sqrt(Var p)], an empirical eta_k(delta) for this p."""
    mean, var = _poly_moments(beta)
    sd = math.sqrt(var)
    hits = sum(int(np.count_nonzero(np.abs(v - mean) <= delta * sd))
               for v in _nu_poly_values(beta, trials, seed, 0xBA))
    p = hits / trials
    return Estimate(p, math.sqrt(max(p * (1 - p), 1 / trials) / trials), trials)


def onesided_tail(beta: MomentVector, delta: float, trials: int, seed: int) -> Estimate:
    """Pr_nu[p >= E p + delta sqrt(Var p)]."""
    mean, var = _poly_moments(beta)
    sd = math.sqrt(var)
    hits = sum(int(np.count_nonzero(v >= mean + delta * sd))
               for v in _nu_poly_values(beta, trials, seed, 0x15))
    p = hits / trials
    return Estimate(p, math.sqrt(max(p * (1 - p), 1 / trials) / trials), trials)


def onesided_bound(delta1: float, eta_delta: float, divisor: float = 16.0) -> float:
    """delta1^2 / divisor - eta; divisor 16 is the weaker of the two stated forms (8 and 16)."""
    return delta1 * delta1 / divisor - eta_delta


def assemble_planted(k: int, grid=None, mu1: DiscreteMeasure | None = None, alpha: float = 1e-4,
                     n: int = 2, residual_tol: float = 1e-8,
                     signal_direction=None) -> PlantedSpec:
    """Planted spec whose mixed moments match Q up to degree k.

    The LP vertex is symmetrized over sign flips of (lam, z) so that odd
    moments vanish as well; the symmetrized measure has the same even
    moments and therefore the same residual.
    """
    grid = default_grid() if grid is None else grid
    mu1 = mu1 or DiscreteMeasure.point_mass([0.0])
    theta = target_vector(k, alpha, mu1)
    mu2 = symmetrize(solve_mu2(grid, theta, residual_tol))
    return PlantedSpec("general", alpha, n, mu1=symmetrize_1d(mu1), mu2=mu2,
                       signal_direction=signal_direction)


def symmetrize_1d(mu: DiscreteMeasure) -> DiscreteMeasure:
    pts = np.vstack([mu.support, -mu.support])
    return DiscreteMeasure.from_unnormalized(pts, np.tile(mu.weights, 2) / 2)


def _gauss_he(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return x, w / w.sum()


def planted_surrogates(spec: PlantedSpec, k: int) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Discrete stand-ins on (x_1, x_n) for P and Q, exact in moments up to degree 2k + 1.

    The Gaussian factors are replaced by (k + 1)-node Gauss-Hermite rules, so
    both surrogates reproduce every mixed moment the degree-k advantage sees.
    """
    if spec.variant != "general":
        raise ValueError("surrogates are defined for the general variant")
    xs, ws = _gauss_he(k + 1)
    lam, g1, g2 = np.meshgrid(xs, xs, xs, indexing="ij")
    wq = (ws[:, None, None] * ws[None, :, None] * ws[None, None, :]).ravel()
    q_pts = np.column_stack([(lam * g1).ravel(), (lam * g2).ravel()])
    Q = DiscreteMeasure.from_unnormalized(q_pts, wq)

    a = spec.alpha
    z1 = spec.mu1.support[:, 0]
    pts = [np.column_stack([np.zeros_like(z1), z1])]
    wts = [a * spec.mu1.weights]
    for (l, z), w in zip(spec.mu2.support, spec.mu2.weights):
        pts.append(np.column_stack([l * xs, np.full_like(xs, z)]))
        wts.append((1 - a) * w * ws)
    P = DiscreteMeasure.from_unnormalized(np.vstack(pts), np.concatenate(wts))
    return P, Q

