"""Axis-aligned box domains and evaluation grids.

The exhaustive oracle only scales to d <= 3, so box construction rejects
higher dimensions outright.  Grid points are the Cartesian product of
uniformly spaced coordinates including both endpoints, flattened in C order
(first coordinate slowest); ties in argmin reductions therefore resolve to
the lexicographically smallest grid index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainMismatch

MAX_DIMENSION = 3

# ~10^6 evaluation ceiling per grid keeps oracle sweeps in the seconds range.
DEFAULT_GRID_COUNTS = {1: (2049,), 2: (257, 257), 3: (65, 65, 65)}


@dataclass(frozen=True)
class BoxDomain:
    """Closed box { x : lower[i] <= x[i] <= upper[i] } in R^d, 1 <= d <= 3."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper):
            raise ValueError("lower and upper must have equal length")
        if not 1 <= len(lower) <= MAX_DIMENSION:
            raise ValueError(
                f"box dimension must be in [1, {MAX_DIMENSION}], got {len(lower)}"
            )
        if not all(math.isfinite(v) for v in lower + upper):
            raise ValueError("box bounds must be finite")
        if any(lo > hi for lo, hi in zip(lower, upper)):
            raise ValueError(f"lower {lower} exceeds upper {upper}")

    @property
    def d(self) -> int:
        return len(self.lower)

    def diameter(self) -> float:
        """Euclidean norm of (upper - lower); 0 only for a point domain."""
        return float(
            math.sqrt(sum((hi - lo) ** 2 for lo, hi in zip(self.lower, self.upper)))
        )

    def center(self) -> np.ndarray:
        return np.array(
            [lo + 0.5 * (hi - lo) for lo, hi in zip(self.lower, self.upper)]
        )

    def contains(self, point, tol: float = 1e-12) -> bool:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        if p.shape != (self.d,):
            return False
        return all(
            lo - tol <= x <= hi + tol
            for x, lo, hi in zip(p, self.lower, self.upper)
        )

    def clip(self, point) -> np.ndarray:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        return np.clip(p, self.lower, self.upper)


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid over a box, endpoints included.

    Degenerate axes (lower == upper) carry a single coordinate; every other
    axis needs at least two.
    """

    domain: BoxDomain
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        object.__setattr__(self, "counts", counts)
        if len(counts) != self.domain.d:
            raise ValueError("one count per dimension required")
        for c, lo, hi in zip(counts, self.domain.lower, self.domain.upper):
            degenerate = lo == hi
            if degenerate and c != 1:
                raise ValueError("degenerate axis must have count 1")
            if not degenerate and c < 2:
                raise ValueError("non-degenerate axis needs count >= 2")

    @classmethod
    def default(cls, domain: BoxDomain) -> "Grid":
        counts = tuple(
            1 if lo == hi else c
            for c, lo, hi in zip(
                DEFAULT_GRID_COUNTS[domain.d], domain.lower, domain.upper
            )
        )
        return cls(domain, counts)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.linspace(lo, hi, c)
            for lo, hi, c in zip(self.domain.lower, self.domain.upper, self.counts)
        )

    @cached_property
    def points(self) -> np.ndarray:
        """All grid points, shape (n_points, d), C-order flattened."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        pts.setflags(write=False)
        return pts

    @property
    def n_points(self) -> int:
        return int(np.prod(self.counts))

    def cell_widths(self) -> np.ndarray:
        widths = []
        for lo, hi, c in zip(self.domain.lower, self.domain.upper, self.counts):
            widths.append(0.0 if c == 1 else (hi - lo) / (c - 1))
        return np.array(widths)

    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.cell_widths()))

    def refine(self) -> "Grid":
        """Halve every cell (old points remain a subset of the new grid)."""
        counts = tuple(1 if c == 1 else 2 * (c - 1) + 1 for c in self.counts)
        return Grid(self.domain, counts)


def require_same_domain(*objects) -> BoxDomain:
    """All arguments must expose .domain and agree on it exactly."""
    domains = [obj.domain for obj in objects]
    first = domains[0]
    for other in domains[1:]:
        if other != first:
            raise DomainMismatch(f"domains differ: {first} vs {other}")
    return first
