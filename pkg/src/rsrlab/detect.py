"""Noise channels and the two tuple-scanning subspace detectors.

Both detectors look for d + 1 samples that are nearly linearly dependent.
The relative-noise detector normalizes every sample and flags a tuple whose
smallest singular value is at most 1/2; the additive-noise detector works on
raw samples inside a random subsample and compares against a threshold that
scales like alpha (1 - p) sqrt(n).

Tuples are scanned in lexicographic order and the scan stops at the first
hit, so the reported witness is deterministic.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from .distributions import (PLANTED, RERANDOMIZED, SampleBatch, ScaleMixtureSpec,
                            sample_null)
from .rng import stream

PLANTED_VERDICT, NULL_VERDICT = "PLANTED", "NULL"
STRATEGIES = ("none", "random_direction", "evade", "spoof")

# artifact defaults for the unspecified constants
SAMPLE_CONSTANT = 10.0
C_THRESHOLD = 64.0


@dataclass(frozen=True)
class NoiseModel:
    p: float = 0.0
    budget_kind: str = "relative"
    budget: float = 0.0
    strategy: str = "none"

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError("p must lie in [0, 1)")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.budget_kind not in ("relative", "additive"):
            raise ValueError(f"unknown budget kind {self.budget_kind!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass(frozen=True)
class DetectionVerdict:
    verdict: str
    witness: tuple = ()
    sigma: float = float("nan")
    subspace: np.ndarray | None = None
    tuple_count_scanned: int = 0
    elapsed_ns: int = 0

    @property
    def planted(self) -> bool:
        return self.verdict == PLANTED_VERDICT

    def to_json(self) -> str:
        return json.dumps({
            "verdict": self.verdict,
            "witness": [int(i) for i in self.witness],
            "sigma": None if math.isnan(self.sigma) else float(self.sigma),
            "tuple_count_scanned": int(self.tuple_count_scanned),
            "elapsed_ns": int(self.elapsed_ns),
        })


def random_subspace(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random n x d orthonormal basis."""
    if d == 0:
        return np.zeros((n, 0))
    q, r = np.linalg.qr(rng.standard_normal((n, d)))
    return q * np.sign(np.diag(r))


def _cap(z: np.ndarray, budget: np.ndarray) -> np.ndarray:
    """Scale rows of z to norm <= budget, guarding against rounding above it."""
    norm = np.linalg.norm(z, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(norm > budget, budget / norm, 1.0)
    z = z * f[:, None]
    over = np.linalg.norm(z, axis=1) > budget
    while np.any(over):
        z[over] *= 1.0 - 2.0**-50
        over = np.linalg.norm(z, axis=1) > budget
    return z


def _full_budget(u: np.ndarray, budget: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(u, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return _cap(u / norm * budget[:, None], budget)


def apply_noise(batch: SampleBatch, model: NoiseModel, planted_subspace: np.ndarray | None = None,
                seed: int = 0, scale_law: str = "normal") -> SampleBatch:
    """Rerandomize each row with probability p, then perturb within the budget.

    Strategies (the adversary sees provenance and ``planted_subspace``):
    ``random_direction`` pushes every row a full budget along a uniform
    direction; ``evade`` pushes planted rows a full budget orthogonally to
    the subspace; ``spoof`` moves non-planted rows toward their projection
    onto the subspace, as far as the budget allows.
    """
    if model.strategy in ("evade", "spoof") and planted_subspace is None:
        raise ValueError(f"strategy {model.strategy!r} needs a subspace")
    rng = stream(seed, 0xA0)
    m, n = batch.data.shape
    x = batch.data.copy()
    prov = batch.provenance.copy()
    redraw = rng.random(m) < model.p
    if np.any(redraw):
        fresh = sample_null(ScaleMixtureSpec(n, scale_law), int(redraw.sum()), seed, batch_id=0xA1)
        x[redraw] = fresh.data
        prov[redraw] = RERANDOMIZED

    if model.budget_kind == "relative":
        budget = model.budget * np.linalg.norm(x, axis=1)
    else:
        budget = np.full(m, model.budget)
    z = np.zeros_like(x)
    if model.strategy == "random_direction":
        z = _full_budget(rng.standard_normal((m, n)), budget)
    elif model.strategy == "evade":
        B = np.asarray(planted_subspace, dtype=float).reshape(n, -1)
        rows = prov == PLANTED
        u = rng.standard_normal((m, n))
        u -= (u @ B) @ B.T
        z[rows] = _full_budget(u[rows], budget[rows])
    elif model.strategy == "spoof":
        B = np.asarray(planted_subspace, dtype=float).reshape(n, -1)
        rows = prov != PLANTED
        toward = (x @ B) @ B.T - x
        z[rows] = _cap(toward[rows], budget[rows])
    perturbed = batch.perturbed | (np.linalg.norm(z, axis=1) > 0)
    return SampleBatch(x + z, prov, perturbed, batch.seed_record + f"+noise:{seed}")


def sigma_min_tuple(columns) -> float:
    """Smallest singular value of an n x (d+1) matrix via its Gram matrix."""
    A = np.asarray(columns, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    ev = np.linalg.eigvalsh(A.T @ A)
    return math.sqrt(max(float(ev[0]), 0.0))


def _scan(rows: np.ndarray, d: int, threshold: float):
    """First (lexicographic) (d+1)-subset of rows with sigma_{d+1} <= threshold.

    Returns (witness, sigma, scanned).
    """
    m = rows.shape[0]
    G = rows @ rows.T
    if d == 0:
        sig = np.sqrt(np.maximum(np.diag(G), 0.0))
        hit = np.flatnonzero(sig <= threshold)
        if hit.size:
            return (int(hit[0]),), float(sig[hit[0]]), int(hit[0]) + 1
        return None, float("nan"), m
    if d == 1:
        scanned = 0
        diag = np.diag(G)
        for i in range(m - 1):
            a, b, c = diag[i], diag[i + 1 :], G[i, i + 1 :]
            half = 0.5 * (a + b)
            lam = half - np.sqrt((0.5 * (a - b)) ** 2 + c * c)
            sig = np.sqrt(np.maximum(lam, 0.0))
            hit = np.flatnonzero(sig <= threshold)
            if hit.size:
                j = int(hit[0])
                return (i, i + 1 + j), float(sig[j]), scanned + j + 1
            scanned += m - 1 - i
        return None, float("nan"), scanned
    scanned = 0
    for T in itertools.combinations(range(m), d + 1):
        scanned += 1
        ev = np.linalg.eigvalsh(G[np.ix_(T, T)])
        s = math.sqrt(max(float(ev[0]), 0.0))
        if s <= threshold:
            return T, s, scanned
    return None, float("nan"), scanned


def recover_subspace(columns, d: int) -> np.ndarray:
    """Top-d left singular vectors of an n x (d+1) matrix via its Gram matrix."""
    A = np.asarray(columns, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if d < 1 or d >= A.shape[1]:
        raise ValueError("need 1 <= d < number of columns")
    ev, V = np.linalg.eigh(A.T @ A)
    order = np.argsort(ev)[::-1][:d]
    U = A @ V[:, order]
    # re-orthonormalize: divides by singular values and cleans rounding
    q, r = np.linalg.qr(U)
    return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


def largest_principal_angle(U: np.ndarray, V: np.ndarray) -> float:
    return float(np.max(subspace_angles(U, V)))


def _rows(batch) -> np.ndarray:
    return np.asarray(getattr(batch, "data", batch), dtype=float)


def detect_relative(batch, d: int, threshold: float = 0.5, want_subspace: bool = True) -> DetectionVerdict:
    """Normalize samples and flag any d+1 of them with sigma_{d+1} <= threshold.

    A zero sample is PLANTED evidence on its own when d = 0 (it lies in every
    subspace) and is skipped otherwise.
    """
    t0 = time.perf_counter_ns()
    X = _rows(batch)
    m = X.shape[0]
    if m < d + 1:
        raise ValueError(f"need at least d + 1 = {d + 1} samples, got {m}")
    norms = np.linalg.norm(X, axis=1)
    zero = norms == 0
    if d == 0 and np.any(zero):
        i = int(np.flatnonzero(zero)[0])
        return DetectionVerdict(PLANTED_VERDICT, (i,), 0.0, None, i + 1, time.perf_counter_ns() - t0)
    keep = np.flatnonzero(~zero)
    A = X[keep] / norms[keep, None]
    witness, sigma, scanned = _scan(A, d, threshold) if keep.size >= d + 1 else (None, float("nan"), 0)
    elapsed = time.perf_counter_ns() - t0
    if witness is None:
        return DetectionVerdict(NULL_VERDICT, (), float("nan"), None, scanned, elapsed)
    T = tuple(int(keep[i]) for i in witness)
    sub = recover_subspace(A[list(witness)].T, d) if (want_subspace and d >= 1) else None
    return DetectionVerdict(PLANTED_VERDICT, T, sigma, sub, scanned, elapsed)


def relative_sample_size(d: int, alpha: float, p: float, C: float = SAMPLE_CONSTANT) -> int:
    """ceil(C (d+1) / (alpha (1-p)))."""
    return math.ceil(C * (d + 1) / (alpha * (1 - p)))


def subsample_size(d: int, alpha: float, p: float, delta: float) -> int:
    """|J| = ceil(2 log(4/delta) (d+1) / (alpha (1-p)))."""
    return math.ceil(2 * math.log(4 / delta) * (d + 1) / (alpha * (1 - p)))


def additive_threshold(alpha: float, p: float, n: int, delta: float, c: float = C_THRESHOLD) -> float:
    """tau = alpha (1-p) sqrt(n) / (c log^2(4/delta))."""
    return alpha * (1 - p) * math.sqrt(n) / (c * math.log(4 / delta) ** 2)


def additive_budget(alpha: float, p: float, n: int, d: int, delta: float, C: float = C_THRESHOLD) -> float:
    """Largest perturbation eta = alpha (1-p) sqrt(n) / (C (d+1) log^2(4/delta)) covered by the guarantee."""
    return alpha * (1 - p) * math.sqrt(n) / (C * (d + 1) * math.log(4 / delta) ** 2)


def detect_additive(batch, d: int, alpha: float, p: float, delta: float, tau: float | None = None,
                    c_threshold: float = C_THRESHOLD, seed: int = 0,
                    want_subspace: bool = True) -> DetectionVerdict:
    """Scan (d+1)-tuples of raw samples inside a random subsample J."""
    t0 = time.perf_counter_ns()
    X = _rows(batch)
    m, n = X.shape
    size = subsample_size(d, alpha, p, delta)
    if m < size:
        raise ValueError(f"need at least |J| = {size} samples, got {m}")
    if tau is None:
        tau = additive_threshold(alpha, p, n, delta, c_threshold)
    J = np.sort(stream(seed, 0xAD).choice(m, size=size, replace=False))
    witness, sigma, scanned = _scan(X[J], d, tau)
    elapsed = time.perf_counter_ns() - t0
    if witness is None:
        return DetectionVerdict(NULL_VERDICT, (), float("nan"), None, scanned, elapsed)
    T = tuple(int(J[i]) for i in witness)
    sub = recover_subspace(X[list(T)].T, d) if (want_subspace and d >= 1) else None
    return DetectionVerdict(PLANTED_VERDICT, T, sigma, sub, scanned, elapsed)


def incoherence(batch) -> float:
    """max_{i != j} |<a_i, a_j>| over normalized samples."""
    X = _rows(batch)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero sample has no direction")
    A = X / norms[:, None]
    G = np.abs(A @ A.T)
    np.fill_diagonal(G, 0.0)
    return float(G.max()) if X.shape[0] > 1 else 0.0


def incoherence_bound(c: float, m: int, n: int, eps: float) -> float:
    """(c sqrt(log m) / sqrt(n) + 2 eps + eps^2) / (1 - eps)^2."""
    return (c * math.sqrt(math.log(m)) / math.sqrt(n) + 2 * eps + eps * eps) / (1 - eps) ** 2
