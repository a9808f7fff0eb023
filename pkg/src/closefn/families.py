"""Registry of closed-form function families.

Every family provides exact evaluation, an analytic gradient where one
exists, and regularity metadata (strong-convexity modulus, smoothness
constant, box-constrained minimizer, Lipschitz bound over the box) that is
analytically correct for the family.  Specs are immutable values; two specs
compare equal iff family, parameters and domain agree exactly.

The ``shifted`` wrapper adds a constant to any family.  Sub-optimality gaps
of ``base + a`` equal those of ``base`` identically, so gap-oriented callers
use :func:`shift_split` to peel constants off *before* evaluating; this makes
gap profiles bit-exactly shift invariant and avoids cancellation for large
offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping

import numpy as np
from scipy.special import expit

from .domain import BoxDomain
from .errors import (
    InvalidWeights,
    NonSmoothFunction,
    OutOfDomain,
)

WEIGHT_TOL = 1e-12
DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class RegularityInfo:
    """Declared analytic regularity of a function over its box.

    rho        strong-convexity modulus (None if not strongly convex)
    smooth_L   gradient Lipschitz constant (None if non-smooth)
    minimizer  a box-constrained minimizer (None if not computed)
    is_smooth  gradient availability
    lipschitz  Lipschitz bound of the function itself over the box
    """

    rho: float | None = None
    smooth_L: float | None = None
    minimizer: tuple[float, ...] | None = None
    is_smooth: bool = False
    lipschitz: float | None = None

    def __post_init__(self):
        if self.rho is not None and self.rho <= 0:
            raise ValueError("rho must be positive when present")
        if self.smooth_L is not None and self.smooth_L < 0:
            raise ValueError("smooth_L must be nonnegative when present")
        if (
            self.rho is not None
            and self.smooth_L is not None
            and self.rho > self.smooth_L
        ):
            raise ValueError("rho must not exceed smooth_L")


@dataclass(frozen=True)
class FunctionSpec:
    """A member of a registered family with parameters and metadata."""

    family: str
    params: Mapping
    domain: BoxDomain
    regularity: RegularityInfo = field(default_factory=RegularityInfo)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.regularity.minimizer is not None:
            if not self.domain.contains(self.regularity.minimizer, tol=1e-9):
                raise ValueError("declared minimizer lies outside the domain")


# ---------------------------------------------------------------------------
# family implementations
# ---------------------------------------------------------------------------


def _as_points(points, d: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, d) if d > 1 else pts.reshape(-1, 1)
    if pts.shape[1] != d:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {d}")
    return pts


class _Quadratic:
    smooth = True

    @staticmethod
    def arrays(params):
        A = np.asarray(params["A"], dtype=float)
        b = np.asarray(params["b"], dtype=float)
        return A, b, float(params["c"])

    @classmethod
    def values(cls, params, pts):
        A, b, c = cls.arrays(params)
        return 0.5 * np.einsum("ni,ij,nj->n", pts, A, pts) + pts @ b + c

    @classmethod
    def gradients(cls, params, pts):
        A, b, _ = cls.arrays(params)
        return pts @ A + b


class _ScaledAbs:
    smooth = False

    @staticmethod
    def values(params, pts):
        return float(params["s"]) * np.abs(pts[:, 0] - float(params["a"]))

    @staticmethod
    def gradients(params, pts):
        raise NonSmoothFunction("scaled_abs has no gradient at its kink")


class _MaxAffine:
    smooth = False

    @staticmethod
    def values(params, pts):
        slopes = np.asarray(params["slopes"], dtype=float)
        intercepts = np.asarray(params["intercepts"], dtype=float)
        return (pts @ slopes.T + intercepts).max(axis=1)

    @staticmethod
    def gradients(params, pts):
        raise NonSmoothFunction("max_affine has no gradient along piece boundaries")


class _Huber:
    smooth = True

    @staticmethod
    def values(params, pts):
        u = pts[:, 0] - float(params["a"])
        tau = float(params["tau"])
        quad = u * u / (2.0 * tau)
        lin = np.abs(u) - tau / 2.0
        return float(params["scale"]) * np.where(np.abs(u) <= tau, quad, lin)

    @staticmethod
    def gradients(params, pts):
        u = pts[:, 0] - float(params["a"])
        tau = float(params["tau"])
        g = float(params["scale"]) * np.clip(u / tau, -1.0, 1.0)
        return g.reshape(-1, 1)


class _Logistic1d:
    smooth = True

    @staticmethod
    def margins(params, theta):
        x = np.asarray(params["x"], dtype=float)
        y = np.asarray(params["y"], dtype=float)
        return x, y, -np.outer(theta, y * x)  # (N, m)

    @classmethod
    def values(cls, params, pts):
        theta = pts[:, 0]
        _, _, m = cls.margins(params, theta)
        mu = float(params["mu"])
        return np.logaddexp(0.0, m).mean(axis=1) + 0.5 * mu * theta * theta

    @classmethod
    def gradients(cls, params, pts):
        theta = pts[:, 0]
        x, y, m = cls.margins(params, theta)
        mu = float(params["mu"])
        g = (-(y * x) * expit(m)).mean(axis=1) + mu * theta
        return g.reshape(-1, 1)


class _Shifted:
    # smoothness mirrors the base family; resolved dynamically
    smooth = None

    @staticmethod
    def values(params, pts):
        return evaluate_many(params["base"], pts) + float(params["shift"])

    @staticmethod
    def gradients(params, pts):
        return gradient_many(params["base"], pts)


class _Mixture:
    smooth = None

    @staticmethod
    def values(params, pts):
        comps = params["components"]
        weights = params["weights"]
        if all(c.family == "scaled_abs" for c in comps):
            return _abs_mixture_values(comps, weights, pts)
        out = np.zeros(pts.shape[0])
        for lam, comp in zip(weights, comps):
            out += lam * evaluate_many(comp, pts)
        return out

    @staticmethod
    def gradients(params, pts):
        out = np.zeros_like(pts)
        for lam, comp in zip(params["weights"], params["components"]):
            out += lam * gradient_many(comp, pts)
        return out


def _abs_mixture_values(comps, weights, pts, block: int = 4096) -> np.ndarray:
    """Weighted sums of |theta - a_j|, blocked to bound the broadcast size."""
    theta = pts[:, 0]
    centers = np.array([c.params["a"] for c in comps], dtype=float)
    coef = np.array(
        [lam * c.params["s"] for lam, c in zip(weights, comps)], dtype=float
    )
    out = np.zeros_like(theta)
    for start in range(0, len(centers), block):
        a = centers[start : start + block]
        w = coef[start : start + block]
        out += np.abs(theta[:, None] - a[None, :]) @ w
    return out


FAMILIES = {
    "quadratic": _Quadratic,
    "scaled_abs": _ScaledAbs,
    "max_affine": _MaxAffine,
    "huber": _Huber,
    "logistic_1d": _Logistic1d,
    "shifted": _Shifted,
    "mixture": _Mixture,
}


# ---------------------------------------------------------------------------
# evaluation API
# ---------------------------------------------------------------------------


def evaluate_many(spec: FunctionSpec, points) -> np.ndarray:
    """Evaluate at an (N, d) array of points.  No domain check (grid path)."""
    pts = _as_points(points, spec.domain.d)
    return FAMILIES[spec.family].values(spec.params, pts)


def evaluate(spec: FunctionSpec, point) -> float:
    """Evaluate at a single point, enforcing domain membership."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if not spec.domain.contains(p, tol=DOMAIN_TOL):
        raise OutOfDomain(f"point {p.tolist()} outside domain {spec.domain}")
    return float(evaluate_many(spec, p.reshape(1, -1))[0])


def gradient_many(spec: FunctionSpec, points) -> np.ndarray:
    pts = _as_points(points, spec.domain.d)
    if not spec.regularity.is_smooth:
        raise NonSmoothFunction(f"family {spec.family!r} member is not smooth")
    return FAMILIES[spec.family].gradients(spec.params, pts)


def gradient(spec: FunctionSpec, point) -> np.ndarray:
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if not spec.domain.contains(p, tol=DOMAIN_TOL):
        raise OutOfDomain(f"point {p.tolist()} outside domain {spec.domain}")
    return gradient_many(spec, p.reshape(1, -1))[0]


def shift_split(spec: FunctionSpec) -> tuple[FunctionSpec, float]:
    """Peel additive constants off wrappers: spec == core + shift exactly.

    Mixtures float their components' constants out through the weights.
    """
    if spec.family == "shifted":
        core, inner = shift_split(spec.params["base"])
        return core, inner + float(spec.params["shift"])
    if spec.family == "mixture":
        split = [shift_split(c) for c in spec.params["components"]]
        weights = spec.params["weights"]
        total = sum(lam * s for lam, (_, s) in zip(weights, split))
        if total == 0.0:
            return spec, 0.0
        core = mixture([c for c, _ in split], weights)
        return core, total
    return spec, 0.0


# ---------------------------------------------------------------------------
# factories
# ---------------------------------------------------------------------------


def _tupled(a) -> tuple:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        return tuple(arr.tolist())
    return tuple(tuple(row) for row in arr.tolist())


def _box_quadratic_minimizer(A: np.ndarray, b: np.ndarray, domain: BoxDomain):
    """Exact box-constrained minimizer of 0.5 x'Ax + b'x via face enumeration.

    Convexity puts the minimizer on some face where the restricted gradient
    vanishes; with d <= 3 all 3^d face assignments are enumerable.
    """
    d = len(b)
    lower, upper = np.array(domain.lower), np.array(domain.upper)
    best_x, best_v = None, np.inf
    for assignment in product((None, 0, 1), repeat=d):
        free = [i for i, a in enumerate(assignment) if a is None]
        x = np.where([a == 1 for a in assignment], upper, lower).astype(float)
        if free:
            f = np.array(free)
            fixed = [i for i in range(d) if i not in free]
            rhs = -b[f]
            if fixed:
                rhs = rhs - A[np.ix_(f, np.array(fixed))] @ x[np.array(fixed)]
            try:
                sol = np.linalg.solve(A[np.ix_(f, f)], rhs)
            except np.linalg.LinAlgError:
                continue
            if np.any(sol < lower[f] - 1e-12) or np.any(sol > upper[f] + 1e-12):
                continue
            x[f] = np.clip(sol, lower[f], upper[f])
        v = 0.5 * x @ A @ x + b @ x
        if v < best_v:
            best_x, best_v = x, v
    return tuple(best_x.tolist())


def quadratic(A, b, c, domain: BoxDomain) -> FunctionSpec:
    """f(x) = 0.5 x'Ax + b'x + c with A symmetric positive semidefinite."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = domain.d
    if A.shape != (d, d) or b.shape != (d,):
        raise ValueError("A must be (d, d) and b (d,) for the domain dimension")
    if not np.allclose(A, A.T, atol=1e-12, rtol=0):
        raise ValueError("A must be symmetric")
    A = 0.5 * (A + A.T)
    eigs = np.linalg.eigvalsh(A)
    if eigs[0] < -1e-10:
        raise ValueError(f"A must be positive semidefinite, eigenvalues {eigs}")
    rho = float(eigs[0]) if eigs[0] > 1e-12 else None
    minimizer = _box_quadratic_minimizer(A, b, domain)
    corners = np.array(list(product(*zip(domain.lower, domain.upper))))
    lip = float(np.linalg.norm(corners @ A + b, axis=1).max())
    reg = RegularityInfo(
        rho=rho,
        smooth_L=float(eigs[-1]),
        minimizer=minimizer,
        is_smooth=True,
        lipschitz=lip,
    )
    params = {"A": _tupled(A), "b": _tupled(b), "c": float(c)}
    return FunctionSpec("quadratic", params, domain, reg)


def scaled_abs(s: float, a: float, domain: BoxDomain) -> FunctionSpec:
    """f(theta) = s * |theta - a|, one-dimensional, s > 0."""
    if domain.d != 1:
        raise ValueError("scaled_abs is one-dimensional")
    s, a = float(s), float(a)
    if s <= 0:
        raise ValueError("scale s must be positive")
    minimizer = (min(max(a, domain.lower[0]), domain.upper[0]),)
    reg = RegularityInfo(minimizer=minimizer, is_smooth=False, lipschitz=s)
    return FunctionSpec("scaled_abs", {"s": s, "a": a}, domain, reg)


def max_affine(slopes, intercepts, domain: BoxDomain) -> FunctionSpec:
    """f(x) = max_k (slopes[k] . x + intercepts[k]); convex, non-smooth."""
    slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
    intercepts = np.atleast_1d(np.asarray(intercepts, dtype=float))
    if slopes.shape[0] != intercepts.shape[0] or slopes.shape[1] != domain.d:
        raise ValueError("need one intercept per slope row of width d")
    lip = float(np.linalg.norm(slopes, axis=1).max())
    reg = RegularityInfo(is_smooth=False, lipschitz=lip)
    params = {"slopes": _tupled(slopes), "intercepts": _tupled(intercepts)}
    return FunctionSpec("max_affine", params, domain, reg)


def huber(a: float, tau: float, domain: BoxDomain, scale: float = 1.0) -> FunctionSpec:
    """Smoothed absolute value: quadratic within tau of a, linear beyond."""
    if domain.d != 1:
        raise ValueError("huber is one-dimensional")
    a, tau, scale = float(a), float(tau), float(scale)
    if tau <= 0 or scale <= 0:
        raise ValueError("tau and scale must be positive")
    minimizer = (min(max(a, domain.lower[0]), domain.upper[0]),)
    reg = RegularityInfo(
        smooth_L=scale / tau,
        minimizer=minimizer,
        is_smooth=True,
        lipschitz=scale,
    )
    params = {"a": a, "tau": tau, "scale": scale}
    return FunctionSpec("huber", params, domain, reg)


def logistic_1d(x, y, mu: float, domain: BoxDomain) -> FunctionSpec:
    """Regularized logistic loss on labelled scalars:

    f(theta) = mean_j log(1 + exp(-y_j x_j theta)) + (mu/2) theta^2.
    """
    if domain.d != 1:
        raise ValueError("logistic_1d is one-dimensional")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mu = float(mu)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length vectors")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +/-1")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    lo, hi = domain.lower[0], domain.upper[0]
    params = {"x": _tupled(x), "y": _tupled(y), "mu": mu}

    def deriv(theta):
        m = -theta * y * x
        return float((-(y * x) * expit(m)).mean() + mu * theta)

    if deriv(lo) >= 0:
        minimizer = lo
    elif deriv(hi) <= 0:
        minimizer = hi
    else:
        from scipy.optimize import brentq

        minimizer = float(brentq(deriv, lo, hi, xtol=1e-14))
    reg = RegularityInfo(
        rho=mu if mu > 0 else None,
        smooth_L=mu + float((x * x).mean()) / 4.0,
        minimizer=(minimizer,),
        is_smooth=True,
        lipschitz=float(np.abs(x).mean()) + mu * max(abs(lo), abs(hi)),
    )
    return FunctionSpec("logistic_1d", params, domain, reg)


def shifted(base: FunctionSpec, shift: float) -> FunctionSpec:
    """base + shift; regularity is inherited unchanged."""
    shift = float(shift)
    if not math.isfinite(shift):
        raise ValueError("shift must be finite")
    return FunctionSpec(
        "shifted", {"base": base, "shift": shift}, base.domain, base.regularity
    )


def mixture(components: Iterable[FunctionSpec], weights) -> FunctionSpec:
    """Convex combination sum_i weights[i] * components[i]."""
    comps = tuple(components)
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if len(comps) == 0 or len(comps) != len(w):
        raise InvalidWeights("need one weight per component, at least one")
    if np.any(w < -WEIGHT_TOL) or np.any(w > 1 + WEIGHT_TOL):
        raise InvalidWeights(f"weights outside [0, 1]: {w}")
    if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
        raise InvalidWeights(f"weights sum to {w.sum()!r}, not 1")
    domain = comps[0].domain
    for comp in comps[1:]:
        if comp.domain != domain:
            raise ValueError("mixture components must share a domain")
    regs = [c.regularity for c in comps]
    smooth = all(r.is_smooth for r in regs)
    rho = (
        float(sum(lam * r.rho for lam, r in zip(w, regs)))
        if all(r.rho is not None for r in regs)
        else None
    )
    if rho is not None and rho <= 0:
        rho = None
    L = (
        float(sum(lam * r.smooth_L for lam, r in zip(w, regs)))
        if smooth and all(r.smooth_L is not None for r in regs)
        else None
    )
    lip = (
        float(sum(lam * r.lipschitz for lam, r in zip(w, regs)))
        if all(r.lipschitz is not None for r in regs)
        else None
    )
    reg = RegularityInfo(rho=rho, smooth_L=L, is_smooth=smooth, lipschitz=lip)
    params = {"components": comps, "weights": tuple(w.tolist())}
    return FunctionSpec("mixture", params, domain, reg)


# ---------------------------------------------------------------------------
# randomized corpus
# ---------------------------------------------------------------------------

DEFAULT_FAMILY_MIX = {
    "quadratic": 0.4,
    "scaled_abs": 0.15,
    "max_affine": 0.15,
    "huber": 0.15,
    "logistic_1d": 0.15,
}

# documented parameter ranges for the randomized corpus
CURVATURE_RANGE = (0.1, 10.0)
INTERIOR_FRACTION = 0.8  # minimizers drawn from the central 80% of the box


def _seed_seq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.SeedSequence(list(seed))
    return np.random.SeedSequence(seed)


def _central(rng, domain, frac=INTERIOR_FRACTION):
    lo, hi = np.array(domain.lower), np.array(domain.upper)
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    return mid + (2 * rng.random(domain.d) - 1) * frac * half


def _draw_spec(rng, family, domain, boundary_minimizers):
    lo, hi = np.array(domain.lower), np.array(domain.upper)
    d = domain.d
    if family == "quadratic":
        lam = np.exp(rng.uniform(*np.log(CURVATURE_RANGE), size=d))
        Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        A = Q @ np.diag(lam) @ Q.T
        A = 0.5 * (A + A.T)
        if boundary_minimizers:
            v = hi + rng.uniform(0.2, 1.0, size=d) * (hi - lo)
        else:
            v = _central(rng, domain)
        return quadratic(A, -A @ v, rng.uniform(-1, 1), domain)
    if family == "scaled_abs":
        a = (
            hi[0] + rng.uniform(0.2, 1.0)
            if boundary_minimizers
            else float(_central(rng, domain)[0])
        )
        return scaled_abs(rng.uniform(0.25, 4.0), a, domain)
    if family == "max_affine":
        k = int(rng.integers(2, 6))
        return max_affine(
            rng.uniform(-3, 3, size=(k, d)), rng.uniform(-1, 1, size=k), domain
        )
    if family == "huber":
        a = (
            hi[0] + rng.uniform(0.2, 1.0)
            if boundary_minimizers
            else float(_central(rng, domain)[0])
        )
        return huber(a, rng.uniform(0.05, 0.5), domain, scale=rng.uniform(0.5, 2.0))
    if family == "logistic_1d":
        m = int(rng.integers(3, 9))
        x = rng.uniform(-2, 2, size=m)
        y = rng.choice([-1.0, 1.0], size=m)
        return logistic_1d(x, y, rng.uniform(0.1, 2.0), domain)
    raise ValueError(f"cannot draw family {family!r}")


def random_pair(
    seed,
    family_mix: Mapping[str, float] | None = None,
    domain: BoxDomain | None = None,
    boundary_minimizers: bool = False,
) -> tuple[FunctionSpec, FunctionSpec]:
    """Deterministic pair from one family, chosen by the mix weights.

    ``seed`` may be an int, a tuple (master_seed, draw_index), or a
    SeedSequence; tuples give reproducible order-independent corpora.
    """
    domain = domain or BoxDomain((-1.0,), (1.0,))
    mix = dict(family_mix or DEFAULT_FAMILY_MIX)
    names = sorted(mix)
    weights = np.array([mix[k] for k in names], dtype=float)
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("family mix weights must be nonnegative, not all zero")
    rng = np.random.default_rng(_seed_seq(seed))
    fam = rng.choice(names, p=weights / weights.sum())
    f = _draw_spec(rng, fam, domain, boundary_minimizers)
    g = _draw_spec(rng, fam, domain, boundary_minimizers)
    return f, g


def random_pairs(seed: int, count: int, **kwargs):
    """Iterator of ``count`` pairs derived as (seed, index), index-stable."""
    for i in range(count):
        yield random_pair((seed, i), **kwargs)


# ---------------------------------------------------------------------------
# JSON serialization: {"family": str, "params": {...}, "domain": {...}}
# ---------------------------------------------------------------------------


def _params_to_json(spec: FunctionSpec):
    if spec.family == "shifted":
        return {
            "base": spec_to_json(spec.params["base"]),
            "shift": spec.params["shift"],
        }
    if spec.family == "mixture":
        return {
            "components": [spec_to_json(c) for c in spec.params["components"]],
            "weights": list(spec.params["weights"]),
        }
    out = {}
    for key, value in spec.params.items():
        if isinstance(value, tuple):
            out[key] = [list(v) if isinstance(v, tuple) else v for v in value]
        else:
            out[key] = value
    return out


def spec_to_json(spec: FunctionSpec) -> dict:
    return {
        "family": spec.family,
        "params": _params_to_json(spec),
        "domain": {"lower": list(spec.domain.lower), "upper": list(spec.domain.upper)},
    }


def spec_from_json(obj: Mapping) -> FunctionSpec:
    domain = BoxDomain(tuple(obj["domain"]["lower"]), tuple(obj["domain"]["upper"]))
    family = obj["family"]
    p = obj["params"]
    if family == "quadratic":
        return quadratic(p["A"], p["b"], p["c"], domain)
    if family == "scaled_abs":
        return scaled_abs(p["s"], p["a"], domain)
    if family == "max_affine":
        return max_affine(p["slopes"], p["intercepts"], domain)
    if family == "huber":
        return huber(p["a"], p["tau"], domain, scale=p.get("scale", 1.0))
    if family == "logistic_1d":
        return logistic_1d(p["x"], p["y"], p["mu"], domain)
    if family == "shifted":
        return shifted(spec_from_json(p["base"]), p["shift"])
    if family == "mixture":
        return mixture([spec_from_json(c) for c in p["components"]], p["weights"])
    raise ValueError(f"unknown family {family!r}")
