"""Finitely supported probability measures."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

WEIGHT_TOL = 1e-10


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure on finitely many points of R^dim.

    ``support`` is stored as a ``(size, dim)`` array even for dim = 1.
    """

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        weights = np.asarray(self.weights, dtype=float).ravel()
        if support.ndim != 2 or support.shape[0] != weights.shape[0]:
            raise ValueError("support and weights have incompatible shapes")
        if weights.size == 0:
            raise ValueError("empty measure")
        if not (np.all(np.isfinite(support)) and np.all(np.isfinite(weights))):
            raise ValueError("non-finite support point or weight")
        if np.any(weights < 0):
            raise ValueError("negative weight")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        if np.unique(support, axis=0).shape[0] != support.shape[0]:
            raise ValueError("support points are not distinct")
        support.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point_mass(cls, point) -> DiscreteMeasure:
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.ones(1))

    @classmethod
    def from_unnormalized(cls, support, weights, prune: float = 0.0) -> DiscreteMeasure:
        """Normalize ``weights``, drop entries ``<= prune`` and merge duplicates."""
        support = np.asarray(support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        weights = np.asarray(weights, dtype=float).ravel()
        keep = weights > prune
        support, weights = support[keep], weights[keep]
        uniq, inverse = np.unique(support, axis=0, return_inverse=True)
        merged = np.zeros(uniq.shape[0])
        np.add.at(merged, inverse.ravel(), weights)
        return cls(uniq, merged / merged.sum())

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @property
    def size(self) -> int:
        return self.support.shape[0]

    def moment(self, exponents) -> float:
        """E[prod_i x_i^{e_i}] for an exponent tuple of length ``dim``."""
        e = np.asarray(exponents, dtype=int).reshape(1, -1)
        if e.shape[1] != self.dim:
            raise ValueError("exponent length does not match dimension")
        return float(self.weights @ np.prod(self.support ** e, axis=1))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(self.size, size=size, p=self.weights)
        return self.support[idx]

    def to_csv(self, path=None, header: tuple[str, ...] | None = None) -> str:
        if header is None:
            header = ("lambda", "z") if self.dim == 2 else tuple(f"x{i + 1}" for i in range(self.dim))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*header, "weight"])
        for pt, wt in zip(self.support, self.weights):
            w.writerow([f"{v:.17g}" for v in pt] + [f"{wt:.17g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> DiscreteMeasure:
        text = Path(source).read_text() if isinstance(source, Path) else str(source)
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        return cls(data[:, :-1], data[:, -1])
