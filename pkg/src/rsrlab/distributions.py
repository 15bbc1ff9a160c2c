"""Null and planted samplers for the Gaussian scale mixture, plus exact moments.

The null distribution Q draws a scale ``lam ~ N(0, 1)`` and then
``X | lam ~ N(0, lam^2 I_n)``; equivalently ``X = lam * g`` with ``g`` a
standard Gaussian vector independent of ``lam``.

Planted variants:

* ``point_mass``: with probability ``alpha`` the row is 0, else a null row.
* ``general``: with probability ``alpha`` the row is ``z * v`` with
  ``z ~ mu1``; otherwise ``(lam, z) ~ mu2`` and the row has ``z`` along ``v``
  and ``N(0, lam^2)`` noise on the orthogonal complement.
* ``subspace``: with probability ``alpha`` the row is ``B (lam * g_d)`` for an
  ``n x d`` orthonormal ``B``, else a null row. Used by the detection
  experiments, where the planted mass must span a d-dimensional subspace.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .measures import DiscreteMeasure
from .rng import block_ranges, stream

PLANTED, NULL, RERANDOMIZED = "planted", "null", "rerandomized"
PROVENANCE_TAGS = (PLANTED, NULL, RERANDOMIZED)

_EXACT_MOMENT_CAP = 30


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def gaussian_moment(ell: int) -> float:
    """E[g^ell] for g ~ N(0, 1): (ell - 1)!! for even ell, 0 for odd ell."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    if ell % 2:
        return 0.0
    if ell <= _EXACT_MOMENT_CAP:
        return float(double_factorial(ell - 1))
    return float(np.prod(np.arange(ell - 1, 0, -2, dtype=float)))


@dataclass(frozen=True)
class ScaleLaw:
    """Law of the scale variable: a moment oracle plus a sampler."""

    name: str
    moment: Callable[[int], float]
    sample: Callable[[np.random.Generator, int], np.ndarray]


def _sample_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.standard_normal(size)


NORMAL_SCALE = ScaleLaw("normal", gaussian_moment, _sample_normal)

# symmetric, mostly unit scale with a rare large scale; all moments finite
_TWO_SCALE = DiscreteMeasure(np.array([-5.0, -1.0, 1.0, 5.0]), np.array([0.05, 0.45, 0.45, 0.05]))
TWO_SCALE = ScaleLaw(
    "two_scale",
    lambda ell: _TWO_SCALE.moment((ell,)),
    lambda rng, size: _TWO_SCALE.sample(rng, size)[:, 0],
)

SCALE_LAWS = {law.name: law for law in (NORMAL_SCALE, TWO_SCALE)}


def q_mixed_moment(ell1: int, ell2: int, scale_law: ScaleLaw = NORMAL_SCALE) -> float:
    """E_Q[x_1^ell1 x_n^ell2] = c_ell1 * c_ell2 * E[lam^(ell1 + ell2)]."""
    if ell1 < 0 or ell2 < 0:
        raise ValueError("exponents must be non-negative")
    if ell1 % 2 or ell2 % 2:
        return 0.0
    return gaussian_moment(ell1) * gaussian_moment(ell2) * scale_law.moment(ell1 + ell2)


def q_moment(exponents, scale_law: ScaleLaw = NORMAL_SCALE) -> float:
    """E_Q[prod_i x_i^{e_i}] for any exponent vector (rotation-free coordinates)."""
    exponents = [int(e) for e in exponents]
    if any(e % 2 for e in exponents):
        return 0.0
    out = scale_law.moment(sum(exponents))
    for e in exponents:
        out *= gaussian_moment(e)
    return out


@dataclass(frozen=True)
class ScaleMixtureSpec:
    n: int
    scale_law: str = "normal"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("ambient dimension must be >= 1")
        if self.scale_law not in SCALE_LAWS:
            raise ValueError(f"unknown scale law {self.scale_law!r}")

    @property
    def law(self) -> ScaleLaw:
        return SCALE_LAWS[self.scale_law]


@dataclass(frozen=True)
class PlantedSpec:
    variant: str
    alpha: float
    n: int
    mu1: DiscreteMeasure | None = None
    mu2: DiscreteMeasure | None = None
    signal_direction: np.ndarray | None = None
    subspace: np.ndarray | None = None
    scale_law: str = "normal"

    def __post_init__(self):
        if self.variant not in ("point_mass", "general", "subspace"):
            raise ValueError(f"unknown planted variant {self.variant!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("ambient dimension must be >= 1")
        if self.scale_law not in SCALE_LAWS:
            raise ValueError(f"unknown scale law {self.scale_law!r}")
        if self.variant == "general":
            if self.mu1 is None or self.mu2 is None:
                raise ValueError("general variant needs mu1 and mu2")
            if self.mu1.dim != 1 or self.mu2.dim != 2:
                raise ValueError("mu1 must live on R and mu2 on R^2")
        if self.signal_direction is not None:
            v = np.asarray(self.signal_direction, dtype=float).ravel()
            if v.shape != (self.n,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError("signal_direction must be a unit vector in R^n")
            object.__setattr__(self, "signal_direction", v)
        if self.variant == "subspace":
            if self.subspace is None:
                raise ValueError("subspace variant needs an n x d orthonormal basis")
            b = np.asarray(self.subspace, dtype=float)
            if b.ndim != 2 or b.shape[0] != self.n:
                raise ValueError("subspace basis must have shape (n, d)")
            if not np.allclose(b.T @ b, np.eye(b.shape[1]), atol=1e-10):
                raise ValueError("subspace basis is not orthonormal")
            object.__setattr__(self, "subspace", b)

    @property
    def direction(self) -> np.ndarray:
        if self.signal_direction is None:
            v = np.zeros(self.n)
            v[-1] = 1.0
            return v
        return self.signal_direction


@dataclass(frozen=True)
class SampleBatch:
    data: np.ndarray
    provenance: np.ndarray
    perturbed: np.ndarray
    seed_record: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError("data must be an m x n matrix")
        prov = np.asarray(self.provenance, dtype="<U12")
        pert = np.asarray(self.perturbed, dtype=bool)
        if prov.shape != (data.shape[0],) or pert.shape != (data.shape[0],):
            raise ValueError("provenance/perturbed length must equal row count")
        if not np.all(np.isfinite(data)):
            raise ValueError("non-finite sample")
        if not np.all(np.isin(prov, PROVENANCE_TAGS)):
            raise ValueError("unknown provenance tag")
        for arr in (data, prov, pert):
            arr.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "perturbed", pert)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(self.n)] + ["provenance", "perturbed"])
        for row, tag, p in zip(self.data, self.provenance, self.perturbed):
            w.writerow([f"{v:.17g}" for v in row] + [tag, int(p)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str, seed_record: str = "") -> SampleBatch:
        rows = list(csv.reader(io.StringIO(text)))
        n = len(rows[0]) - 2
        body = [r for r in rows[1:] if r]
        data = np.array([[float(v) for v in r[:n]] for r in body], dtype=float).reshape(len(body), n)
        return cls(data, [r[n] for r in body], [bool(int(r[n + 1])) for r in body], seed_record)


def householder_to(v: np.ndarray) -> np.ndarray | None:
    """Reflection H with H e_n = v, or None when v == e_n."""
    n = v.shape[0]
    w = -v.copy()
    w[-1] += 1.0
    nw = w @ w
    if nw < 1e-30:
        return None
    return np.eye(n) - 2.0 * np.outer(w, w) / nw


def _null_rows(rng: np.random.Generator, law: ScaleLaw, rows: int, n: int) -> np.ndarray:
    lam = law.sample(rng, rows)
    g = rng.standard_normal((rows, n))
    return lam[:, None] * g


def sample_null(spec: ScaleMixtureSpec, m: int, seed: int, batch_id: int = 0) -> SampleBatch:
    """Draw ``m`` i.i.d. rows from Q."""
    if m < 0:
        raise ValueError("m must be non-negative")
    data = np.empty((m, spec.n))
    for b, lo, hi in block_ranges(m):
        data[lo:hi] = _null_rows(stream(seed, batch_id, b), spec.law, hi - lo, spec.n)
    return SampleBatch(data, np.full(m, NULL), np.zeros(m, bool), f"philox:{seed}/{batch_id}")


def sample_planted(spec: PlantedSpec, m: int, seed: int, batch_id: int = 0) -> SampleBatch:
    """Draw ``m`` i.i.d. rows from the planted distribution described by ``spec``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    n, law = spec.n, SCALE_LAWS[spec.scale_law]
    data = np.empty((m, n))
    planted = np.zeros(m, bool)
    for b, lo, hi in block_ranges(m):
        rng = stream(seed, batch_id, b)
        rows = hi - lo
        branch = rng.random(rows) < spec.alpha
        if spec.variant == "point_mass":
            x = _null_rows(rng, law, rows, n)
            x[branch] = 0.0
        elif spec.variant == "subspace":
            x = _null_rows(rng, law, rows, n)
            d = spec.subspace.shape[1]
            inner = law.sample(rng, rows)[:, None] * rng.standard_normal((rows, d))
            x[branch] = (inner @ spec.subspace.T)[branch]
        else:
            z1 = spec.mu1.sample(rng, rows)[:, 0]
            lz = spec.mu2.sample(rng, rows)
            g = rng.standard_normal((rows, n - 1))
            x = np.empty((rows, n))
            x[:, :-1] = lz[:, :1] * g
            x[:, -1] = lz[:, 1]
            x[branch, :-1] = 0.0
            x[branch, -1] = z1[branch]
        data[lo:hi] = x
        planted[lo:hi] = branch
    if spec.variant == "general":
        h = householder_to(spec.direction)
        if h is not None:
            data = data @ h.T
    prov = np.where(planted, PLANTED, NULL)
    return SampleBatch(data, prov, np.zeros(m, bool), f"philox:{seed}/{batch_id}")


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with its standard error."""

    value: float
    se: float
    trials: int = 0
    extra: dict = field(default_factory=dict)


def empirical_moment(data: np.ndarray, ell1: int, ell2: int) -> Estimate:
    """Sample mean and SE of x_1^ell1 x_n^ell2 over the rows of ``data``."""
    vals = data[:, 0] ** ell1 * data[:, -1] ** ell2
    m = vals.shape[0]
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(m)), m)


def small_ball_estimate(
    gamma: float, n: int, trials: int, seed: int, scale_law: ScaleLaw = NORMAL_SCALE
) -> Estimate:
    """Monte Carlo estimate of Pr_{X~Q}[||X||_2 <= gamma sqrt(n)].

    Uses ``||X|| = |lam| * ||g||`` with ``||g||^2 ~ chi^2_n``.
    """
    if trials < 10_000:
        raise ValueError("trials must be at least 1e4")
    if not 0.0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 1/2)")
    hits = 0
    for b, lo, hi in block_ranges(trials, 1 << 18):
        rng = stream(seed, 0x5B, b)
        lam = scale_law.sample(rng, hi - lo)
        norm = np.abs(lam) * np.sqrt(rng.chisquare(n, hi - lo))
        hits += int(np.count_nonzero(norm <= gamma * math.sqrt(n)))
    p = hits / trials
    return Estimate(p, math.sqrt(max(p * (1 - p), 1.0 / trials) / trials), trials)
