"""Closeness certificates from regularity metadata.

Each rule turns declared structure (value gaps, gradient gaps, strong
convexity, minimizer locations) into a valid (eps, delta) pair without
exhaustive search.  Grid suprema are exact certificates against the same
grid; pass ``cell_margin=True`` to inflate value/gradient suprema by one
cell's Lipschitz modulus when the certificate must also cover refinements.
"""

from __future__ import annotations

import math

import numpy as np

from .closeness import Closeness, gap_profile
from .domain import Grid, require_same_domain
from .errors import MissingRegularity, NonFiniteEvaluation, NonSmoothFunction
from .families import FunctionSpec, evaluate_many, gradient, gradient_many


def _finite_values(spec: FunctionSpec, grid: Grid) -> np.ndarray:
    values = evaluate_many(spec, grid.points)
    if not np.all(np.isfinite(values)):
        idx = int(np.flatnonzero(~np.isfinite(values))[0])
        point = tuple(grid.points[idx].tolist())
        raise NonFiniteEvaluation(
            f"{spec.family} evaluated to {values[idx]} at {point}", point=point
        )
    return values


def _pair_lipschitz(f: FunctionSpec, g: FunctionSpec) -> float:
    lips = [s.regularity.lipschitz for s in (f, g)]
    if any(v is None for v in lips):
        raise MissingRegularity("cell_margin inflation needs Lipschitz metadata")
    return float(sum(lips))


def cert_sup(
    f: FunctionSpec, g: FunctionSpec, grid: Grid, cell_margin: bool = False
) -> Closeness:
    """(0, 2 D0) from the centered value gap D0 = sup |f - g - c|.

    The centering constant c is the midpoint of the range of f - g, which
    minimizes D0 over all constants.
    """
    require_same_domain(f, g, grid)
    r = _finite_values(f, grid) - _finite_values(g, grid)
    hi, lo = float(r.max()), float(r.min())
    c, d0 = (hi + lo) / 2.0, (hi - lo) / 2.0
    if cell_margin:
        d0 += _pair_lipschitz(f, g) * grid.cell_diagonal()
    return Closeness(0.0, 2.0 * d0, "sup", {"c": c, "D0": d0})


def cert_grad_sup(
    f: FunctionSpec, g: FunctionSpec, grid: Grid, cell_margin: bool = False
) -> Closeness:
    """(0, 2 M D1) from the gradient gap D1 = sup ||grad f - grad g||."""
    require_same_domain(f, g, grid)
    if not (f.regularity.is_smooth and g.regularity.is_smooth):
        raise NonSmoothFunction("gradient certificates need smooth families")
    diff = gradient_many(f, grid.points) - gradient_many(g, grid.points)
    d1 = float(np.linalg.norm(diff, axis=1).max())
    if cell_margin:
        # gradient difference of L-smooth functions moves at most (Lf+Lg)*h
        lsum = sum(s.regularity.smooth_L or 0.0 for s in (f, g))
        d1 += lsum * grid.cell_diagonal()
    m = grid.domain.diameter()
    return Closeness(0.0, 2.0 * m * d1, "grad_sup", {"D1": d1, "M": m})


def cert_grad_strongly_convex(
    f: FunctionSpec, g: FunctionSpec, grid: Grid, cell_margin: bool = False
) -> Closeness:
    """(log 2, (2/rho) min{D1^2, rho M D1}) when one side is strongly convex.

    Closeness is symmetric in (f, g), so whichever of the two declares the
    larger strong-convexity modulus drives the bound; the larger modulus
    gives the smaller delta.
    """
    base = cert_grad_sup(f, g, grid, cell_margin=cell_margin)
    d1, m = base.detail["D1"], base.detail["M"]
    rhos = [s.regularity.rho for s in (f, g) if s.regularity.rho is not None]
    if not rhos:
        raise MissingRegularity("neither function declares strong convexity")
    rho = max(rhos)
    delta = (2.0 / rho) * min(d1 * d1, rho * m * d1)
    return Closeness(math.log(2.0), delta, "grad_sc", {"D1": d1, "rho": rho, "M": m})


def cert_minimizers(f: FunctionSpec, g: FunctionSpec) -> Closeness:
    """(log(4L/rho), (rho/2) ||t*_f - t*_g||^2 + (rho/4L^2) ||grad gap||^2).

    Needs strong convexity, smoothness and a minimizer on both sides; with
    differing metadata the conservative shared pair rho = min, L = max is
    used.  Gradients are taken at the declared minimizers, so boundary
    minimizers contribute through the second term.
    """
    require_same_domain(f, g)
    for spec in (f, g):
        reg = spec.regularity
        if not reg.is_smooth:
            raise NonSmoothFunction(f"{spec.family} member is not smooth")
        if reg.rho is None or reg.smooth_L is None or reg.minimizer is None:
            raise MissingRegularity(
                f"{spec.family} member lacks rho/smooth_L/minimizer metadata"
            )
    rho = min(f.regularity.rho, g.regularity.rho)
    big_l = max(f.regularity.smooth_L, g.regularity.smooth_L)
    tf = np.array(f.regularity.minimizer)
    tg = np.array(g.regularity.minimizer)
    dist2 = float(((tf - tg) ** 2).sum())
    grad_gap2 = float(((gradient(f, tf) - gradient(g, tg)) ** 2).sum())
    delta = 0.5 * rho * dist2 + rho / (4.0 * big_l * big_l) * grad_gap2
    return Closeness(
        math.log(4.0 * big_l / rho),
        delta,
        "minimizers",
        {"rho": rho, "L": big_l, "dist2": dist2, "grad_gap2": grad_gap2},
    )


def cert_range(
    f: FunctionSpec, g: FunctionSpec, grid: Grid, cell_margin: bool = False
) -> Closeness:
    """(0, max{F, G}) from the gap ranges of the two functions."""
    require_same_domain(f, g, grid)
    range_f = float(gap_profile(f, grid).gaps.max())
    range_g = float(gap_profile(g, grid).gaps.max())
    if cell_margin:
        pad = _pair_lipschitz(f, g) * grid.cell_diagonal()
        range_f, range_g = range_f + pad, range_g + pad
    return Closeness(0.0, max(range_f, range_g), "range", {"F": range_f, "G": range_g})


_CERT_RULES = {
    "sup": cert_sup,
    "grad_sup": cert_grad_sup,
    "grad_sc": cert_grad_strongly_convex,
    "range": cert_range,
}


def applicable_certificates(
    f: FunctionSpec, g: FunctionSpec, grid: Grid
) -> dict[str, Closeness]:
    """All certificate rules whose preconditions the pair satisfies."""
    out: dict[str, Closeness] = {}
    for name, rule in _CERT_RULES.items():
        try:
            out[name] = rule(f, g, grid)
        except (NonSmoothFunction, MissingRegularity):
            continue
    try:
        out["minimizers"] = cert_minimizers(f, g)
    except (NonSmoothFunction, MissingRegularity):
        pass
    return out


def finite_difference_gradient(
    spec: FunctionSpec, point, step: float | None = None
) -> np.ndarray:
    """Central-difference gradient, one-sided within a step of the boundary.

    Default step is cbrt(machine epsilon) * max(1, |coordinate|) per axis.
    Serves as an independent cross-check of the analytic gradients; it never
    feeds certificate values.
    """
    p = np.atleast_1d(np.asarray(point, dtype=float))
    lower, upper = np.array(spec.domain.lower), np.array(spec.domain.upper)
    base_h = float(np.finfo(float).eps) ** (1.0 / 3.0)
    out = np.empty_like(p)
    for i in range(p.size):
        h = step if step is not None else base_h * max(1.0, abs(p[i]))
        lo_ok = p[i] - h >= lower[i]
        hi_ok = p[i] + h <= upper[i]
        fwd, bwd = p.copy(), p.copy()
        if lo_ok and hi_ok:
            fwd[i] += h
            bwd[i] -= h
            denom = 2.0 * h
        elif hi_ok:
            fwd[i] += h
            denom = h
        else:
            bwd[i] -= h
            denom = h
        vals = evaluate_many(spec, np.stack([fwd, bwd]))
        out[i] = (vals[0] - vals[1]) / denom
    return out
