"""Two-sided sub-optimality gap conversion between functions on a grid.

A pair (f, g) is (eps, delta)-close when, for every point, each function's
gap (value minus its own minimum) bounds the other's up to a factor e^eps
and an additive slack delta.  On a fixed grid the smallest feasible delta at
a given eps has the closed form

    delta*(eps) = max(0, max_i [e^-eps * gap_g[i] - gap_f[i]],
                         max_i [e^-eps * gap_f[i] - gap_g[i]])

and everything here is phrased through that one margin computation so that
``check_closeness(f, g, eps, min_delta(f, g, eps))`` holds exactly in
floating point, not just up to rounding: the boolean verdict is derived from
the same per-point terms, never from a re-multiplied form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .domain import Grid, require_same_domain
from .errors import EpsilonOverflow, NonFiniteEvaluation
from .families import FunctionSpec, evaluate_many, shift_split

# Beyond this exponent the measure is numerically degenerate (e^eps overflow
# territory, e^-eps indistinguishable from 0 at working precision).
EPSILON_CAP = 50.0

PROVENANCES = frozenset(
    {
        "oracle",
        "sup",
        "grad_sup",
        "grad_sc",
        "minimizers",
        "range",
        "reflexive",
        "weaken",
        "shift",
        "symmetry",
        "transitive",
        "average",
    }
)


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not math.isfinite(eps) or eps < 0:
        raise ValueError(f"eps must be a finite nonnegative real, got {eps}")
    if eps > EPSILON_CAP:
        raise EpsilonOverflow(f"eps {eps} exceeds cap {EPSILON_CAP}")
    return eps


@dataclass(frozen=True)
class Closeness:
    """A certified (epsilon, delta) pair with the rule that produced it."""

    epsilon: float
    delta: float
    provenance: str
    detail: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        _check_eps(self.epsilon)
        if not (self.delta >= 0):
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True)
class GapProfile:
    """Grid values of f minus its grid minimum; min of gaps is 0 exactly."""

    grid: Grid
    gaps: np.ndarray
    min_value: float


@dataclass(frozen=True)
class CheckResult:
    """Verdict of a closeness check plus the worst signed violation.

    margin <= 0 iff the pair passes; the margin is the largest value of
    e^-eps * gap_one - gap_other - delta over all grid points and both
    directions, and ``point`` is where it is attained.  ``direction`` is
    "g_vs_f" when the binding constraint bounds g's gap by f's.
    """

    ok: bool
    margin: float
    point: tuple[float, ...]
    direction: str

    def __bool__(self) -> bool:
        return self.ok


def gap_profile(f: FunctionSpec, grid: Grid) -> GapProfile:
    """Sub-optimality gaps of f over the grid, minimum-normalized to zero."""
    require_same_domain(f, grid)
    core, shift = shift_split(f)  # constants cancel in gaps, bit-exactly
    values = evaluate_many(core, grid.points)
    if not np.all(np.isfinite(values)):
        idx = int(np.flatnonzero(~np.isfinite(values))[0])
        point = tuple(grid.points[idx].tolist())
        raise NonFiniteEvaluation(
            f"{f.family} evaluated to {values[idx]} at {point}", point=point
        )
    m = float(values.min())
    gaps = values - m
    gaps.setflags(write=False)
    return GapProfile(grid=grid, gaps=gaps, min_value=m + shift)


# ---------------------------------------------------------------------------
# margin kernel shared by every oracle-facing operation
# ---------------------------------------------------------------------------


def _direction_terms(gaps_f: np.ndarray, gaps_g: np.ndarray, eps: float):
    """Per-point terms whose maxima give delta*; one array per direction."""
    scale = math.exp(-eps)
    return scale * gaps_g - gaps_f, scale * gaps_f - gaps_g


def min_delta_from_gaps(gaps_f, gaps_g, eps: float) -> float:
    t_gf, t_fg = _direction_terms(gaps_f, gaps_g, _check_eps(eps))
    return max(0.0, float(t_gf.max()), float(t_fg.max()))


def margin_from_gaps(gaps_f, gaps_g, eps: float, delta: float):
    """(ok, margin, argmax index, direction) for the two-sided check."""
    if not (delta >= 0):
        raise ValueError(f"delta must be nonnegative, got {delta}")
    t_gf, t_fg = _direction_terms(gaps_f, gaps_g, _check_eps(eps))
    i_gf, i_fg = int(np.argmax(t_gf)), int(np.argmax(t_fg))
    if t_gf[i_gf] >= t_fg[i_fg]:
        worst, idx, direction = float(t_gf[i_gf]), i_gf, "g_vs_f"
    else:
        worst, idx, direction = float(t_fg[i_fg]), i_fg, "f_vs_g"
    margin = worst - float(delta)
    return margin <= 0.0, margin, idx, direction


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def check_closeness(
    f: FunctionSpec, g: FunctionSpec, eps: float, delta: float, grid: Grid
) -> CheckResult:
    """Verify (eps, delta)-closeness of f and g over every grid point."""
    require_same_domain(f, g, grid)
    gf, gg = gap_profile(f, grid).gaps, gap_profile(g, grid).gaps
    ok, margin, idx, direction = margin_from_gaps(gf, gg, eps, delta)
    point = tuple(grid.points[idx].tolist())
    return CheckResult(ok=ok, margin=margin, point=point, direction=direction)


def min_delta(f: FunctionSpec, g: FunctionSpec, eps: float, grid: Grid) -> float:
    """Smallest delta making (f, g) (eps, delta)-close on the grid."""
    require_same_domain(f, g, grid)
    gf, gg = gap_profile(f, grid).gaps, gap_profile(g, grid).gaps
    return min_delta_from_gaps(gf, gg, eps)


def delta_curve(
    f: FunctionSpec, g: FunctionSpec, eps_list: Sequence[float], grid: Grid
) -> list[tuple[float, float]]:
    """delta*(eps) along a nondecreasing list of eps values."""
    eps_arr = [float(e) for e in eps_list]
    if any(b < a for a, b in zip(eps_arr, eps_arr[1:])):
        raise ValueError("eps_list must be nondecreasing")
    require_same_domain(f, g, grid)
    gf, gg = gap_profile(f, grid).gaps, gap_profile(g, grid).gaps
    return [(e, min_delta_from_gaps(gf, gg, e)) for e in eps_arr]


def default_t_levels(
    gaps_f, gaps_g, eps: float, delta: float, n_uniform: int = 101
) -> np.ndarray:
    """Level sweep for the sub-level characterization.

    101 uniform levels over [-0.1 G, G] (G = larger max gap; negative levels
    probe empty left-hand sets), enriched with the per-point critical levels
    at which either inclusion can first fail on this grid.  The enrichment
    makes the sweep as discriminating as the pointwise definition check even
    when a violation window is narrower than the uniform spacing.
    """
    big = max(float(np.max(gaps_f)), float(np.max(gaps_g)))
    uniform = np.linspace(-0.1 * big, big, n_uniform)
    grow = math.exp(_check_eps(eps))
    # f-side gap values catch g_vs_f failures exactly; the inflated images of
    # g-side gaps catch f_vs_g failures (inflation clears rounding of exp).
    critical = grow * (gaps_g + float(delta))
    critical = critical * (1.0 + 1e-12) + 1e-300
    return np.unique(np.concatenate([uniform, np.asarray(gaps_f), critical]))


def sublevel_inclusion_check(
    f: FunctionSpec,
    g: FunctionSpec,
    eps: float,
    delta: float,
    grid: Grid,
    t_levels: Sequence[float] | None = None,
) -> bool:
    """Sandwich test: S(g, e^-eps t - delta) <= S(f, t) <= S(g, e^eps (t+delta)).

    Sub-level sets are taken in gap form, S(h, t) = {theta : gap_h <= t}.
    Returns True iff both inclusions hold at every requested level; an empty
    left-hand set is vacuously included.
    """
    require_same_domain(f, g, grid)
    eps = _check_eps(eps)
    if not (delta >= 0):
        raise ValueError(f"delta must be nonnegative, got {delta}")
    gf, gg = gap_profile(f, grid).gaps, gap_profile(g, grid).gaps
    if t_levels is None:
        levels = default_t_levels(gf, gg, eps, delta)
    else:
        levels = np.asarray(t_levels, dtype=float)
    shrink, grow = math.exp(-eps), math.exp(eps)
    block = max(1, int(2**22 // max(gf.size, 1)))
    for start in range(0, levels.size, block):
        t = levels[start : start + block][:, None]
        in_g_lo = gg[None, :] <= shrink * t - delta
        in_f = gf[None, :] <= t
        in_g_hi = gg[None, :] <= grow * (t + delta)
        if np.any(in_g_lo & ~in_f) or np.any(in_f & ~in_g_hi):
            return False
    return True
