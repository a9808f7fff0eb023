"""Monte Carlo study of how empirical losses converge to population losses.

For squared loss the population objective is an exact quadratic built from
the distribution's first two moments; for absolute loss (one-dimensional)
it is the exact probability-weighted sum of kinks.  Empirical losses are
registered family members too, so the same grid oracle measures the minimal
conversion slack delta-hat between the two, replication by replication.
With the multiplicative budget e^eps = 2 the strongly convex squared-loss
case exhibits the fast 1/n decay of mean delta-hat, while the absolute-loss
case at eps = 0 decays like 1/sqrt(n).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import truncnorm

from .closeness import gap_profile, margin_from_gaps, min_delta_from_gaps
from .domain import Grid
from .errors import UnsupportedCombination
from .families import FunctionSpec, mixture, quadratic, scaled_abs

TABLE_SIZE = 10_000  # inverse-CDF discretization of continuous distributions


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported distribution over R^d."""

    atoms: tuple  # (m, d) nested tuples
    probs: tuple

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if atoms.shape[0] != probs.shape[0]:
            raise ValueError("one probability per atom required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "atoms", tuple(map(tuple, atoms.tolist())))
        object.__setattr__(self, "probs", tuple(probs.tolist()))

    @property
    def d(self) -> int:
        return len(self.atoms[0])

    def arrays(self):
        return np.asarray(self.atoms), np.asarray(self.probs)

    def mean(self) -> np.ndarray:
        a, p = self.arrays()
        return p @ a

    def second_moment(self) -> float:
        """E ||z||^2."""
        a, p = self.arrays()
        return float(p @ (a * a).sum(axis=1))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        a, p = self.arrays()
        idx = rng.choice(len(p), size=n, p=p)
        return a[idx]


def truncated_gaussian_table(
    mean: float, sd: float, lower: float, upper: float, size: int = TABLE_SIZE
) -> np.ndarray:
    """Equiprobable atoms at the quantile midpoints of a truncated normal.

    Sampling an atom uniformly is exactly sampling this table distribution,
    so empirical draws and population moments are mutually consistent.
    """
    if sd <= 0 or lower >= upper:
        raise ValueError("need sd > 0 and lower < upper")
    a, b = (lower - mean) / sd, (upper - mean) / sd
    u = (np.arange(size) + 0.5) / size
    return truncnorm.ppf(u, a, b, loc=mean, scale=sd)


def truncated_gaussian(
    mean, sd, lower, upper, size: int = TABLE_SIZE
) -> DiscreteDistribution:
    """Product of independent 1-d truncated normals, one table per axis."""
    means = np.atleast_1d(np.asarray(mean, dtype=float))
    d = means.size
    if d == 1:
        table = truncated_gaussian_table(means[0], sd, lower, upper, size)
        return DiscreteDistribution(
            tuple((v,) for v in table), (1.0 / size,) * size
        )
    # joint product tables blow up; keep per-axis tables in a wrapper
    return ProductDistribution(
        tuple(
            tuple(
                truncated_gaussian_table(
                    means[i], np.atleast_1d(sd)[i % np.atleast_1d(sd).size],
                    np.atleast_1d(lower)[i % np.atleast_1d(lower).size],
                    np.atleast_1d(upper)[i % np.atleast_1d(upper).size],
                    size,
                ).tolist()
            )
            for i in range(d)
        )
    )


@dataclass(frozen=True)
class ProductDistribution:
    """Independent per-axis tables of equiprobable atoms (d >= 2)."""

    tables: tuple  # d tuples of atom values

    @property
    def d(self) -> int:
        return len(self.tables)

    def mean(self) -> np.ndarray:
        return np.array([np.mean(t) for t in self.tables])

    def second_moment(self) -> float:
        return float(sum(np.mean(np.square(t)) for t in self.tables))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cols = []
        for t in self.tables:
            arr = np.asarray(t)
            cols.append(arr[rng.integers(0, arr.size, size=n)])
        return np.stack(cols, axis=1)


@dataclass(frozen=True)
class ERMConfig:
    loss_kind: str  # "absolute" | "squared"
    distribution: object  # DiscreteDistribution | ProductDistribution
    grid: Grid
    n_list: tuple[int, ...] = (64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384)
    replications: int = 50
    seed: int = 42
    epsilon_report: float = float(np.log(2.0))

    def __post_init__(self):
        if self.loss_kind not in ("absolute", "squared"):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        n_list = tuple(int(n) for n in self.n_list)
        object.__setattr__(self, "n_list", n_list)
        if any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
            raise ValueError("n_list must be positive and ascending")
        if self.replications < 10:
            raise ValueError("need at least 10 replications")
        if self.grid.domain.d not in (1, 2):
            raise ValueError("the rate harness covers d in {1, 2}")
        if self.distribution.d != self.grid.domain.d:
            raise ValueError("distribution and grid dimensions differ")


@dataclass(frozen=True)
class RateResult:
    """Aggregated rate experiment: per-n statistics and the log-log fit."""

    n_list: tuple[int, ...]
    delta_means: tuple[float, ...]
    delta_stderrs: tuple[float, ...]
    excess_means: tuple[float, ...]
    slope: float
    intercept: float
    rows: tuple = field(repr=False)  # (n, replication, delta_hat, excess, seed)


def _squared_loss_quadratic(
    mean_vec: np.ndarray, second_moment: float, domain
) -> FunctionSpec:
    # E||t - z||^2 = ||t - mu||^2 + (E||z||^2 - ||mu||^2)
    d = mean_vec.size
    return quadratic(2.0 * np.eye(d), -2.0 * mean_vec, second_moment, domain)


def population_loss(config: ERMConfig) -> FunctionSpec:
    """Exact population objective as a registered family member."""
    dist, domain = config.distribution, config.grid.domain
    if config.loss_kind == "squared":
        return _squared_loss_quadratic(dist.mean(), dist.second_moment(), domain)
    if domain.d != 1:
        raise UnsupportedCombination(
            "absolute loss has an exact population form only for d = 1"
        )
    if not isinstance(dist, DiscreteDistribution):
        raise UnsupportedCombination(
            "absolute loss needs a finitely supported distribution"
        )
    atoms, probs = dist.arrays()
    comps = [scaled_abs(1.0, z, domain) for z in atoms[:, 0]]
    return mixture(comps, probs)


def _rep_rng(config: ERMConfig, n_index: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([int(config.seed), int(n_index), int(rep)])
    )


def empirical_loss(config: ERMConfig, n: int, rep_seed) -> FunctionSpec:
    """Sample-average loss for one replication, deterministic given the seed.

    ``rep_seed`` is anything numpy's SeedSequence accepts (int or sequence).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(rep_seed))
    z = config.distribution.sample(rng, n)
    return _empirical_from_samples(config, z)


def _empirical_from_samples(config: ERMConfig, z: np.ndarray) -> FunctionSpec:
    domain = config.grid.domain
    n = z.shape[0]
    if config.loss_kind == "squared":
        # mean ||t - z_i||^2 = ||t||^2 - 2 zbar.t + mean ||z_i||^2
        zbar = z.mean(axis=0)
        const = float((z * z).sum(axis=1).mean())
        d = domain.d
        return quadratic(2.0 * np.eye(d), -2.0 * zbar, const, domain)
    comps = [scaled_abs(1.0, v, domain) for v in z[:, 0]]
    return mixture(comps, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class ReplicationRecord:
    n_index: int
    n: int
    rep: int
    delta_hat: float
    excess: float
    feasible: bool  # full grid check at (eps_report, delta_hat)


def _replication_records(config: ERMConfig) -> list[ReplicationRecord]:
    """One record per (n, replication), independent tasks, ordered merge."""
    pop_gaps = gap_profile(population_loss(config), config.grid).gaps

    def one(task):
        n_index, n, rep = task
        rng = _rep_rng(config, n_index, rep)
        z = config.distribution.sample(rng, n)
        f_n = _empirical_from_samples(config, z)
        emp_gaps = gap_profile(f_n, config.grid).gaps
        delta_hat = min_delta_from_gaps(emp_gaps, pop_gaps, config.epsilon_report)
        argmin = int(np.argmin(emp_gaps))  # first index wins ties
        excess = float(pop_gaps[argmin])
        ok, _, _, _ = margin_from_gaps(
            emp_gaps, pop_gaps, config.epsilon_report, delta_hat
        )
        return ReplicationRecord(n_index, n, rep, delta_hat, excess, ok)

    tasks = [
        (n_index, n, rep)
        for n_index, n in enumerate(config.n_list)
        for rep in range(config.replications)
    ]
    return parallel_map(one, tasks)


def rate_experiment(config: ERMConfig) -> RateResult:
    """Mean delta-hat per sample size and the fitted log-log slope."""
    rows = []
    per_n_delta = {n: [] for n in config.n_list}
    per_n_excess = {n: [] for n in config.n_list}
    for n_index, n, rep, delta_hat, excess, _, _ in _replication_sweep(config):
        rows.append((n, rep, delta_hat, excess, (config.seed, n_index, rep)))
        per_n_delta[n].append(delta_hat)
        per_n_excess[n].append(excess)
    means = [float(np.mean(per_n_delta[n])) for n in config.n_list]
    stderrs = [
        float(np.std(per_n_delta[n], ddof=1) / np.sqrt(config.replications))
        for n in config.n_list
    ]
    excess_means = [float(np.mean(per_n_excess[n])) for n in config.n_list]
    slope, intercept = np.polyfit(
        np.log(np.asarray(config.n_list, dtype=float)), np.log(means), 1
    )
    return RateResult(
        n_list=config.n_list,
        delta_means=tuple(means),
        delta_stderrs=tuple(stderrs),
        excess_means=tuple(excess_means),
        slope=float(slope),
        intercept=float(intercept),
        rows=tuple(rows),
    )


def excess_risk_bound_check(config: ERMConfig, delta_scale: float = 1.0) -> bool:
    """Verify the two-sided conversion at the empirical minimizer.

    For every replication the excess risk of the empirical grid minimizer
    must satisfy pop_gap(argmin f_n) <= e^eps * (0 + delta_hat); with
    ``delta_scale`` < 1 the check is run against a deliberately shrunken
    slack (used to probe near-tightness).  Returns True iff no violation.
    """
    grow = float(np.exp(config.epsilon_report))
    for _, _, _, delta_hat, excess, _, _ in _replication_sweep(config):
        if excess > grow * delta_scale * delta_hat:
            return False
    return True


def feasibility_check(config: ERMConfig) -> bool:
    """Every replication's (eps_report, delta_hat) passes the full grid check."""
    for _, _, _, delta_hat, _, emp_gaps, pop_gaps in _replication_sweep(config):
        ok, _, _, _ = margin_from_gaps(
            emp_gaps, pop_gaps, config.epsilon_report, delta_hat
        )
        if not ok:
            return False
    return True
