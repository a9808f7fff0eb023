"""Finite-class localization: empirical vs population loss closeness.

Everything runs over a finite hypothesis set and a finite outcome space, so
population quantities are exact sums.  The pipeline estimates a localized
complexity envelope psi from Monte Carlo Rademacher draws over the star hull
of centered losses, solves the fixed point psi(w(r)) = r with
w(r) = sqrt(C) r^(alpha/2), assembles the slack

    delta = approximation_gap + 16 [2 r* + (C r*^(alpha-1) + 2b/3) log(4/gamma) / n]

and then measures, over many simulated samples, how often the empirical and
population losses fail to be (log 2, delta)-close on the hypothesis set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .closeness import margin_from_gaps
from .errors import (
    DegenerateRStar,
    EmptySubset,
    NoiseViolation,
)

ALPHA_GRID_SIZE = 101  # star-hull scaling grid
DEFAULT_R_GRID_SIZE = 64
ENUMERATION_MAX_N = 12
ENUMERATION_MAX_TUPLES = 1_000_000


@dataclass(frozen=True)
class FiniteClassProblem:
    """Discrete hypotheses, discrete outcomes, bounded loss table.

    ``loss`` has one row per hypothesis plus, when the reference hypothesis
    lives outside the search class, one extra row; ``h_star_row`` indexes the
    designated reference row.
    """

    hypotheses: tuple[str, ...]
    outcome_ids: tuple[str, ...]
    probs: tuple[float, ...]
    loss: tuple  # (rows, outcomes) nested tuples
    h_star_row: int
    b: float
    alpha: float
    gamma: float
    n: int

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        loss = np.asarray(self.loss, dtype=float)
        object.__setattr__(self, "probs", tuple(probs.tolist()))
        object.__setattr__(self, "loss", tuple(map(tuple, loss.tolist())))
        if len(self.outcome_ids) != probs.size:
            raise ValueError("one probability per outcome required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        if loss.shape[1] != probs.size:
            raise ValueError("loss table must have one column per outcome")
        n_h = len(self.hypotheses)
        if loss.shape[0] not in (n_h, n_h + 1):
            raise ValueError(
                "loss table needs one row per hypothesis, plus at most one "
                "extra reference row"
            )
        if not 0 <= self.h_star_row < loss.shape[0]:
            raise ValueError("h_star_row out of range")
        if self.b <= 0 or np.abs(loss).max() > self.b + 1e-12:
            raise ValueError("losses must be bounded by b in absolute value")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("sample size n must be positive")

    @property
    def n_outcomes(self) -> int:
        return len(self.outcome_ids)

    def omega_rows(self) -> np.ndarray:
        return np.arange(len(self.hypotheses))

    def arrays(self):
        return np.asarray(self.loss), np.asarray(self.probs)


def problem_to_json(problem: FiniteClassProblem) -> dict:
    return {
        "hypotheses": list(problem.hypotheses),
        "outcomes": [
            {"z": z, "p": p} for z, p in zip(problem.outcome_ids, problem.probs)
        ],
        "loss": [list(row) for row in problem.loss],
        "h_star_row": problem.h_star_row,
        "b": problem.b,
        "alpha": problem.alpha,
        "gamma": problem.gamma,
        "n": problem.n,
    }


def problem_from_json(obj: dict) -> FiniteClassProblem:
    return FiniteClassProblem(
        hypotheses=tuple(obj["hypotheses"]),
        outcome_ids=tuple(o["z"] for o in obj["outcomes"]),
        probs=tuple(o["p"] for o in obj["outcomes"]),
        loss=tuple(map(tuple, obj["loss"])),
        h_star_row=int(obj["h_star_row"]),
        b=float(obj["b"]),
        alpha=float(obj["alpha"]),
        gamma=float(obj["gamma"]),
        n=int(obj["n"]),
    )


# ---------------------------------------------------------------------------
# population quantities and the noise condition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PopulationSummary:
    """Exact per-row population losses and centered second moments."""

    L: np.ndarray  # per loss row
    second_moments: np.ndarray  # E[(l_h - l_{h_star})^2] per row
    h_bar: int  # argmin of L over the hypothesis rows
    h_star: int  # argmin of L over all rows


def population_quantities(problem: FiniteClassProblem) -> PopulationSummary:
    loss, probs = problem.arrays()
    L = loss @ probs
    h_star = int(np.argmin(L))
    diff = loss - loss[h_star]
    moments = (diff * diff) @ probs
    h_bar = int(np.argmin(L[problem.omega_rows()]))
    return PopulationSummary(L=L, second_moments=moments, h_bar=h_bar, h_star=h_star)


@dataclass(frozen=True)
class NoiseCertificate:
    """Smallest constant C with E[(l_h - l_{h*})^2] <= C (L(h) - L(h*))^alpha.

    ``violations`` lists hypotheses for which no C works (zero excess risk
    but positive second moment, impossible when alpha > 0).
    """

    h_star: int
    C: float
    alpha: float
    violations: tuple[str, ...] = ()

    def holds(self) -> bool:
        return not self.violations


def verify_noise_condition(
    problem: FiniteClassProblem,
    h_star_row: int | None = None,
    alpha: float | None = None,
) -> NoiseCertificate:
    loss, probs = problem.arrays()
    hs = problem.h_star_row if h_star_row is None else int(h_star_row)
    alpha = problem.alpha if alpha is None else float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    L = loss @ probs
    diff = loss - loss[hs]
    moments = (diff * diff) @ probs
    omega = problem.omega_rows()
    below = [int(h) for h in omega if L[h] < L[hs]]
    if below:
        raise NoiseViolation(
            f"designated reference row {hs} is beaten by rows {below}"
        )
    best_c = 0.0
    violations = []
    for h in omega:
        gap = float(L[h] - L[hs])
        moment = float(moments[h])
        if gap > 0.0:
            best_c = max(best_c, moment / gap**alpha)
        elif moment > 0.0:
            if alpha == 0.0:
                best_c = max(best_c, moment)  # gap^0 = 1
            else:
                violations.append(problem.hypotheses[h])
    return NoiseCertificate(
        h_star=hs, C=best_c, alpha=alpha, violations=tuple(violations)
    )


# ---------------------------------------------------------------------------
# star hull and Rademacher complexity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemberSet:
    """Functions on the outcome space, as rows, with declared second moments."""

    values: np.ndarray  # (m, n_outcomes)
    moments: np.ndarray  # (m,)
    raw_count: int  # member count before deduplication

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def localized(self, r: float) -> "MemberSet":
        keep = self.moments <= r * r
        return MemberSet(self.values[keep], self.moments[keep], int(keep.sum()))


def build_star_hull(
    problem: FiniteClassProblem, deduplicate: bool = True
) -> MemberSet:
    """Scaled centered losses alpha * (l_h - l_{h*}), alpha on a [0, 1] grid.

    Second moments are carried exactly as alpha^2 * E[(l_h - l_{h*})^2],
    not re-estimated from the rows.
    """
    loss, probs = problem.arrays()
    hs = problem.h_star_row
    base = loss[problem.omega_rows()] - loss[hs]
    base_moments = (base * base) @ probs
    alphas = np.linspace(0.0, 1.0, ALPHA_GRID_SIZE)
    values = (alphas[:, None, None] * base[None, :, :]).reshape(
        -1, problem.n_outcomes
    )
    moments = (alphas[:, None] ** 2 * base_moments[None, :]).reshape(-1)
    raw_count = values.shape[0]
    if deduplicate:
        combined = np.concatenate([values, moments[:, None]], axis=1)
        _, idx = np.unique(combined, axis=0, return_index=True)
        idx.sort()
        values, moments = values[idx], moments[idx]
    return MemberSet(values=values, moments=moments, raw_count=raw_count)


def _draws(problem, rng, n):
    loss, probs = problem.arrays()
    idx = rng.choice(problem.n_outcomes, size=n, p=probs)
    sigma = rng.integers(0, 2, size=n) * 2 - 1
    return idx, sigma.astype(float)


def rademacher_draws(
    problem: FiniteClassProblem, subset: MemberSet, n: int, mc_draws: int, seed
) -> np.ndarray:
    """Per-draw suprema of (1/n) sum_i sigma_i g(z_i) over the member set."""
    if len(subset) == 0:
        raise EmptySubset("cannot take a supremum over no members")
    if mc_draws < 1:
        raise ValueError("mc_draws must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    sups = np.empty(mc_draws)
    for k in range(mc_draws):
        idx, sigma = _draws(problem, rng, n)
        sups[k] = (subset.values[:, idx] @ sigma).max() / n
    return sups


def rademacher_estimate(
    problem: FiniteClassProblem, subset: MemberSet, n: int, mc_draws: int, seed
) -> float:
    """Monte Carlo Rademacher complexity of the member set."""
    return float(rademacher_draws(problem, subset, n, mc_draws, seed).mean())


def exact_rademacher(problem: FiniteClassProblem, subset: MemberSet, n: int) -> float:
    """Exhaustive oracle: all sign vectors and all outcome tuples.

    Only feasible for small n and outcome spaces; guards reject anything
    beyond 2^12 sign vectors or 10^6 outcome tuples.
    """
    if len(subset) == 0:
        raise EmptySubset("cannot take a supremum over no members")
    if n > ENUMERATION_MAX_N:
        raise ValueError(f"enumeration oracle limited to n <= {ENUMERATION_MAX_N}")
    k = problem.n_outcomes
    if k**n > ENUMERATION_MAX_TUPLES:
        raise ValueError("outcome tuple space too large to enumerate")
    probs = np.asarray(problem.probs)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))  # (2^n, n)
    total = 0.0
    for tup in itertools.product(range(k), repeat=n):
        p = float(np.prod(probs[list(tup)]))
        if p == 0.0:
            continue
        v = subset.values[:, list(tup)]  # (m, n)
        sups = (v @ signs.T).max(axis=0)  # (2^n,)
        total += p * float(sups.mean()) / n
    return total


# ---------------------------------------------------------------------------
# sub-root envelope and fixed point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubRootEnvelope:
    """Nondecreasing psi on a positive grid with psi(r)/r nonincreasing.

    Between grid points psi is evaluated by linear interpolation of the
    ratio psi(r)/r; left of the grid the ratio is held constant, right of
    the grid psi itself is held constant.  Both extensions preserve the two
    defining monotonicity properties.
    """

    r_grid: np.ndarray
    psi_values: np.ndarray
    raw_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        r = np.asarray(self.r_grid, dtype=float)
        psi = np.asarray(self.psi_values, dtype=float)
        if r.ndim != 1 or r.size < 2 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ValueError("r_grid must be positive strictly ascending")
        if psi.shape != r.shape or np.any(psi < 0):
            raise ValueError("psi_values must be nonnegative, one per grid point")
        if np.any(np.diff(psi) < -1e-12 * max(1.0, float(psi.max()))):
            raise ValueError("psi_values must be nondecreasing")
        # multiplicative form of the ratio test avoids division noise
        lhs, rhs = psi[1:] * r[:-1], psi[:-1] * r[1:]
        if np.any(lhs > rhs * (1.0 + 1e-12) + 1e-300):
            raise ValueError("psi(r)/r must be nonincreasing")

    def __call__(self, r: float) -> float:
        r = float(r)
        if r <= 0.0:
            return 0.0
        grid, psi = self.r_grid, self.psi_values
        if r >= grid[-1]:
            return float(psi[-1])
        ratio = np.interp(r, grid, psi / grid)
        return float(r * ratio)


def build_psi(
    problem: FiniteClassProblem,
    r_grid: Sequence[float],
    n: int,
    mc_draws: int,
    seed,
) -> SubRootEnvelope:
    """Minimal sub-root majorant of localized Rademacher estimates.

    One shared set of (sample, sign) draws serves every radius: members are
    sorted by declared second moment, so each draw's localized suprema are
    prefix maxima and all radii are read off a single pass.  The raw curve
    is then capped below by its sub-root envelope: psi(r) =
    running_max(r * max_{r' >= r} raw(r')/r').
    """
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 2 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise ValueError("r_grid must be positive strictly ascending")
    hull = build_star_hull(problem)
    order = np.argsort(hull.moments, kind="stable")
    values, moments = hull.values[order], hull.moments[order]
    counts = np.searchsorted(moments, r * r, side="right")
    if counts[0] == 0:
        raise ValueError("smallest radius excludes even the zero member")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    raw = np.zeros(r.size)
    for _ in range(mc_draws):
        idx, sigma = _draws(problem, rng, n)
        member_sums = (values[:, idx] @ sigma) / n
        prefix = np.maximum.accumulate(member_sums)
        raw += prefix[counts - 1]
    raw /= mc_draws
    ratios = raw / r
    envelope_ratio = np.maximum.accumulate(ratios[::-1])[::-1]
    psi = np.maximum.accumulate(r * envelope_ratio)
    return SubRootEnvelope(r_grid=r, psi_values=psi, raw_values=raw)


def default_r_grid(problem: FiniteClassProblem) -> np.ndarray:
    """Logarithmic radii spanning [1e-4 * 2b, 2b], 64 points."""
    top = 2.0 * problem.b
    return np.geomspace(1e-4 * top, top, DEFAULT_R_GRID_SIZE)


@dataclass(frozen=True)
class FixedPointResult:
    r_star: float
    residual: float
    iterations: int
    no_root: bool


def solve_fixed_point(
    envelope: SubRootEnvelope, C: float, alpha: float
) -> FixedPointResult:
    """Solve psi(w(r)) = r with w(r) = sqrt(C) r^(alpha/2) by bisection.

    psi(w(r))/r is strictly decreasing, so the crossing is unique where it
    exists.  If the curve is already below the identity at the left end of
    the grid there is no root in range: the left end is returned, flagged.
    """
    if C < 0:
        raise ValueError("C must be nonnegative")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    sqrt_c = math.sqrt(C)

    def phi(r: float) -> float:
        return envelope(sqrt_c * r ** (alpha / 2.0)) - r

    lo = float(envelope.r_grid[0])
    if phi(lo) <= 0.0:
        return FixedPointResult(
            r_star=lo, residual=abs(phi(lo)), iterations=0, no_root=True
        )
    hi = max(float(envelope.r_grid[-1]), float(envelope.psi_values[-1])) + 1.0
    iterations = 0
    while hi - lo > 1e-10 * hi and iterations < 200:
        mid = 0.5 * (lo + hi)
        if phi(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    r_star = 0.5 * (lo + hi)
    return FixedPointResult(
        r_star=r_star, residual=abs(phi(r_star)), iterations=iterations, no_root=False
    )


def compute_delta(
    problem: FiniteClassProblem,
    r_star: float,
    noise: NoiseCertificate,
    approximation_gap: float,
) -> tuple[float, float]:
    """High-probability slack: U(gamma) and delta = approximation_gap + U."""
    r_star = float(r_star)
    if r_star < 0:
        raise ValueError("r_star must be nonnegative")
    if noise.alpha < 1.0 and r_star == 0.0:
        raise DegenerateRStar(
            "r*^(alpha-1) diverges at r* = 0 when alpha < 1"
        )
    r_pow = r_star ** (noise.alpha - 1.0)  # alpha = 1 keeps the C term: r^0 = 1
    log_term = math.log(4.0 / problem.gamma) / problem.n
    u_gamma = 16.0 * (
        2.0 * r_star + (noise.C * r_pow + 2.0 * problem.b / 3.0) * log_term
    )
    return u_gamma, approximation_gap + u_gamma


# ---------------------------------------------------------------------------
# end-to-end validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalizationResult:
    r_star: float
    U_gamma: float
    delta: float
    approximation_gap: float
    mc_failure_rate: float
    noise_C: float
    fixed_point_residual: float
    no_root: bool
    replications: int

    def __post_init__(self):
        if not 0.0 <= self.mc_failure_rate <= 1.0:
            raise ValueError("failure rate must lie in [0, 1]")
        if abs(self.delta - (self.approximation_gap + self.U_gamma)) > 1e-12 * (
            1.0 + abs(self.delta)
        ):
            raise ValueError("delta must equal approximation_gap + U_gamma")


LOG2 = math.log(2.0)


def empirical_losses(
    problem: FiniteClassProblem, rng: np.random.Generator
) -> np.ndarray:
    """One simulated sample's empirical loss per hypothesis row."""
    loss, probs = problem.arrays()
    idx = rng.choice(problem.n_outcomes, size=problem.n, p=probs)
    counts = np.bincount(idx, minlength=problem.n_outcomes)
    return loss @ (counts / problem.n)


def closeness_failure(problem: FiniteClassProblem, L_n, L, delta: float) -> bool:
    """True when the (log 2, delta) two-sided check fails over the class."""
    omega = problem.omega_rows()
    emp, pop = np.asarray(L_n)[omega], np.asarray(L)[omega]
    emp_gaps, pop_gaps = emp - emp.min(), pop - pop.min()
    ok, _, _, _ = margin_from_gaps(emp_gaps, pop_gaps, LOG2, delta)
    return not ok


def validate_proposition(
    problem: FiniteClassProblem,
    replications: int,
    seed,
    mc_draws: int = 200,
    r_grid: Sequence[float] | None = None,
) -> LocalizationResult:
    """Assemble delta once, then measure the empirical failure rate.

    Each replication draws a fresh sample of size problem.n, forms the
    empirical losses over the hypothesis set, and runs the exact two-sided
    (log 2, delta) check; the failure rate over at least 100 replications
    must not exceed gamma for the bound to be validated.
    """
    if replications < 100:
        raise ValueError("need at least 100 replications")
    pop = population_quantities(problem)
    noise = verify_noise_condition(problem)
    if not noise.holds():
        raise NoiseViolation(
            f"noise condition violated by {noise.violations}"
        )
    grid = np.asarray(r_grid, dtype=float) if r_grid is not None else (
        default_r_grid(problem)
    )
    envelope = build_psi(
        problem, grid, problem.n, mc_draws, (_to_seed_list(seed) + [0])
    )
    fp = solve_fixed_point(envelope, noise.C, noise.alpha)
    approximation_gap = float(pop.L[pop.h_bar] - pop.L[pop.h_star])
    u_gamma, delta = compute_delta(problem, fp.r_star, noise, approximation_gap)
    failures = 0
    for rep in range(replications):
        rng = np.random.default_rng(
            np.random.SeedSequence(_to_seed_list(seed) + [1, rep])
        )
        L_n = empirical_losses(problem, rng)
        if closeness_failure(problem, L_n, pop.L, delta):
            failures += 1
    return LocalizationResult(
        r_star=fp.r_star,
        U_gamma=u_gamma,
        delta=delta,
        approximation_gap=approximation_gap,
        mc_failure_rate=failures / replications,
        noise_C=noise.C,
        fixed_point_residual=fp.residual,
        no_root=fp.no_root,
        replications=replications,
    )


def _to_seed_list(seed) -> list[int]:
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return [int(seed)]


# ---------------------------------------------------------------------------
# shipped fixture: non-monotone binary classification over 8 feature values
# ---------------------------------------------------------------------------


def binary_classification_fixture(
    n: int = 500, gamma: float = 0.05
) -> FiniteClassProblem:
    """16 threshold classifiers, 16 outcomes, 0-1 loss, alpha = 1.

    The positive-class rates alternate around 1/2 with margin at least 0.4,
    so the reference (pointwise-best) classifier is not a threshold rule and
    sits in a dedicated extra loss row.
    """
    eta = np.array([0.1, 0.8, 0.2, 0.9, 0.15, 0.85, 0.25, 0.7])
    n_x = eta.size
    p_x = np.full(n_x, 1.0 / n_x)
    outcome_ids, probs = [], []
    for j in range(n_x):
        for y in (0, 1):
            outcome_ids.append(f"x{j}y{y}")
            probs.append(p_x[j] * (eta[j] if y == 1 else 1.0 - eta[j]))
    patterns = []
    names = []
    for k in range(n_x):
        patterns.append([1 if j >= k else 0 for j in range(n_x)])
        names.append(f"up{k}")
    for k in range(n_x):
        patterns.append([1 if j < k else 0 for j in range(n_x)])
        names.append(f"down{k}")
    bayes = [1 if e > 0.5 else 0 for e in eta]
    rows = []
    for pattern in patterns + [bayes]:
        row = []
        for j in range(n_x):
            for y in (0, 1):
                row.append(1.0 if pattern[j] != y else 0.0)
        rows.append(row)
    return FiniteClassProblem(
        hypotheses=tuple(names),
        outcome_ids=tuple(outcome_ids),
        probs=tuple(probs),
        loss=tuple(map(tuple, rows)),
        h_star_row=len(patterns),
        b=1.0,
        alpha=1.0,
        gamma=gamma,
        n=n,
    )
