"""Sequences of drifting losses: variation metrics and a restart learner.

For consecutive losses the table reports the three classical variation
metrics (sup norm of the difference, sup norm of the gradient difference,
distance between minimizers), the closeness slack each metric certifies, and
the exact grid-oracle slack for comparison.  The learner is a demonstration
consumer: it tracks the running average of past losses, plays its grid
argmin, and wipes its memory whenever the oracle slack between that average
and the newest loss exceeds a threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .closeness import gap_profile, min_delta_from_gaps
from .domain import BoxDomain, Grid
from .families import FunctionSpec, evaluate_many, gradient_many, quadratic

SCENARIO_KINDS = ("drift", "shift", "scale")


@dataclass(frozen=True)
class OnlineSequenceSpec:
    """Deterministic loss sequence built from a quadratic base family.

    kind "drift": the minimizer moves by ``step`` each round.
    kind "shift": parameters jump once at round ``t_shift``.
    kind "scale": the whole objective is multiplied by c_t =
                  scale_start + scale_step * (t - 1).
    """

    T: int
    kind: str
    domain: BoxDomain
    params: dict

    def __post_init__(self):
        if self.T < 2:
            raise ValueError("horizon T must be at least 2")
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")


def _vertex_quadratic(curvature: float, vertex, domain: BoxDomain, scale=1.0):
    d = domain.d
    a = scale * curvature * np.eye(d)
    v = np.full(d, float(vertex)) if np.isscalar(vertex) else np.asarray(vertex)
    return quadratic(a, -a @ v, 0.0, domain)


def build_sequence(spec: OnlineSequenceSpec) -> list[FunctionSpec]:
    p = spec.params
    curv = float(p.get("curvature", 2.0))
    if spec.kind == "drift":
        a0, step = float(p["a0"]), float(p["step"])
        return [
            _vertex_quadratic(curv, a0 + step * t, spec.domain)
            for t in range(1, spec.T + 1)
        ]
    if spec.kind == "shift":
        t_shift = int(p["t_shift"])
        if not 2 <= t_shift <= spec.T:
            raise ValueError("t_shift must lie in [2, T]")
        pre = _vertex_quadratic(curv, float(p["a_pre"]), spec.domain)
        post = _vertex_quadratic(curv, float(p["a_post"]), spec.domain)
        return [pre if t < t_shift else post for t in range(1, spec.T + 1)]
    start, step = float(p.get("scale_start", 1.0)), float(p["scale_step"])
    a = float(p.get("a", 0.0))
    out = []
    for t in range(1, spec.T + 1):
        c_t = start + step * (t - 1)
        if c_t <= 0:
            raise ValueError(f"scale factor must stay positive, got {c_t} at t={t}")
        out.append(_vertex_quadratic(curv, a, spec.domain, scale=c_t))
    return out


@dataclass(frozen=True)
class VariationTable:
    """Per-step variation metrics and certified/oracle slacks, t = 2..T.

    Metric or certificate columns that do not apply at a step hold NaN and
    the reason is recorded in ``flags``.  ``oracle_delta`` is the grid
    minimum slack at ``eps_oracle``; ``oracle_at_zero`` and
    ``oracle_at_min_eps`` are the matching-eps companions of the
    certificate columns.
    """

    t: np.ndarray
    sup_metric: np.ndarray
    grad_metric: np.ndarray
    min_metric: np.ndarray
    cert_sup_delta: np.ndarray
    cert_grad_delta: np.ndarray
    cert_min_delta: np.ndarray
    oracle_delta: np.ndarray
    eps_oracle: float
    cert_sup_centered_delta: np.ndarray = field(repr=False)
    cert_min_eps: np.ndarray = field(repr=False)
    oracle_at_zero: np.ndarray = field(repr=False)
    oracle_at_min_eps: np.ndarray = field(repr=False)
    flags: tuple = field(repr=False)

    def totals(self) -> dict[str, float]:
        cols = {
            "sup_metric": self.sup_metric,
            "grad_metric": self.grad_metric,
            "min_metric": self.min_metric,
            "cert_sup_delta": self.cert_sup_delta,
            "cert_grad_delta": self.cert_grad_delta,
            "cert_min_delta": self.cert_min_delta,
            "oracle_delta": self.oracle_delta,
        }
        return {k: float(np.nansum(v)) for k, v in cols.items()}


def variation_table(
    seq: list[FunctionSpec], eps_for_oracle: float, grid: Grid
) -> VariationTable:
    """Pairwise variation metrics over consecutive losses."""
    if len(seq) < 2:
        raise ValueError("need at least two losses")
    big_t = len(seq)
    m = grid.domain.diameter()
    values = [None] * big_t
    grads = [None] * big_t
    gaps = [None] * big_t

    def prep(i):
        if gaps[i] is None:
            prof = gap_profile(seq[i], grid)
            gaps[i] = prof.gaps
            values[i] = prof.gaps + prof.min_value
            if seq[i].regularity.is_smooth:
                grads[i] = gradient_many(seq[i], grid.points)

    rows = big_t - 1
    nan = float("nan")
    out = {
        name: np.full(rows, nan)
        for name in (
            "sup_metric",
            "grad_metric",
            "min_metric",
            "cert_sup_delta",
            "cert_grad_delta",
            "cert_min_delta",
            "cert_sup_centered_delta",
            "cert_min_eps",
            "oracle_delta",
            "oracle_at_zero",
            "oracle_at_min_eps",
        )
    }
    flags = []
    for t in range(2, big_t + 1):
        i, j = t - 2, t - 1
        prep(i), prep(j)
        k = t - 2
        diff = values[i] - values[j]
        out["sup_metric"][k] = np.abs(diff).max()
        out["cert_sup_delta"][k] = 2.0 * out["sup_metric"][k]
        out["cert_sup_centered_delta"][k] = float(diff.max() - diff.min())
        out["oracle_delta"][k] = min_delta_from_gaps(gaps[i], gaps[j], eps_for_oracle)
        out["oracle_at_zero"][k] = min_delta_from_gaps(gaps[i], gaps[j], 0.0)
        reasons = []
        if grads[i] is not None and grads[j] is not None:
            gdiff = np.linalg.norm(grads[i] - grads[j], axis=1)
            out["grad_metric"][k] = gdiff.max()
            out["cert_grad_delta"][k] = 2.0 * m * out["grad_metric"][k]
        else:
            reasons.append("non-smooth pair: gradient columns skipped")
        ri, rj = seq[i].regularity, seq[j].regularity
        have_min = (
            ri.minimizer is not None
            and rj.minimizer is not None
            and ri.rho is not None
            and rj.rho is not None
            and ri.smooth_L is not None
            and rj.smooth_L is not None
        )
        if have_min:
            interior = all(
                lo < x < hi
                for x, lo, hi in zip(
                    tuple(ri.minimizer) + tuple(rj.minimizer),
                    grid.domain.lower * 2,
                    grid.domain.upper * 2,
                )
            )
            if interior:
                dist = float(
                    np.linalg.norm(
                        np.asarray(ri.minimizer) - np.asarray(rj.minimizer)
                    )
                )
                rho = min(ri.rho, rj.rho)
                big_l = max(ri.smooth_L, rj.smooth_L)
                out["min_metric"][k] = dist
                out["cert_min_delta"][k] = 0.5 * rho * dist * dist
                out["cert_min_eps"][k] = math.log(4.0 * big_l / rho)
                out["oracle_at_min_eps"][k] = min_delta_from_gaps(
                    gaps[i], gaps[j], out["cert_min_eps"][k]
                )
            else:
                reasons.append("boundary minimizer: minimizer columns skipped")
        else:
            reasons.append("missing regularity: minimizer columns skipped")
        flags.append("; ".join(reasons))
        values[i] = grads[i] = gaps[i] = None  # only consecutive reuse needed
    return VariationTable(
        t=np.arange(2, big_t + 1),
        eps_oracle=float(eps_for_oracle),
        flags=tuple(flags),
        **out,
    )


@dataclass(frozen=True)
class LearnerRun:
    """Trajectory of the restart learner."""

    thetas: np.ndarray  # (T, d) points played
    excess: np.ndarray  # (T,) per-round gap of the played point
    restarted: np.ndarray  # (T,) 0/1, 1 when the window was wiped after round t
    total_excess: float
    deltas: np.ndarray  # (T,) oracle slack vs the pre-round window average


def restart_learner(
    seq: list[FunctionSpec], eps: float, delta_threshold: float, grid: Grid
) -> LearnerRun:
    """Play the argmin of the window average; wipe the window on drift.

    Round t plays the grid argmin of the average of losses seen since the
    last restart (the domain center before any loss is seen).  After
    observing the round's loss, the grid-oracle slack between the window
    average and that loss is computed at ``eps``; if it exceeds
    ``delta_threshold`` the window is cleared and restarts at the new loss.
    Ties in the argmin go to the lowest flat grid index.
    """
    if delta_threshold <= 0:
        raise ValueError("delta_threshold must be positive")
    big_t = len(seq)
    pts = grid.points
    center = grid.domain.center()
    thetas = np.empty((big_t, grid.domain.d))
    excess = np.empty(big_t)
    restarted = np.zeros(big_t, dtype=int)
    deltas = np.full(big_t, float("nan"))
    window_sum = None
    window_len = 0
    for t in range(big_t):
        prof = gap_profile(seq[t], grid)
        values_t = prof.gaps + prof.min_value
        if window_len == 0:
            theta = center
            excess[t] = float(evaluate_many(seq[t], center.reshape(1, -1))[0]) - (
                prof.min_value
            )
        else:
            idx = int(np.argmin(window_sum))
            theta = pts[idx]
            excess[t] = float(prof.gaps[idx])
        thetas[t] = theta
        if window_len > 0:
            avg = window_sum / window_len
            avg_gaps = avg - avg.min()
            deltas[t] = min_delta_from_gaps(avg_gaps, prof.gaps, eps)
            if deltas[t] > delta_threshold:
                window_sum, window_len = None, 0
                restarted[t] = 1
        if window_len == 0:
            window_sum = values_t.copy()
            window_len = 1
        else:
            window_sum += values_t
            window_len += 1
    return LearnerRun(
        thetas=thetas,
        excess=excess,
        restarted=restarted,
        total_excess=float(excess.sum()),
        deltas=deltas,
    )


# ---------------------------------------------------------------------------
# shipped scenarios
# ---------------------------------------------------------------------------


def load_scenario(name: str) -> dict:
    """Load one of the shipped scenario configs (drift, shift, scale)."""
    text = (
        resources.files("closefn.configs")
        .joinpath(f"online_{name}.json")
        .read_text()
    )
    return json.loads(text)


def scenario_from_config(cfg: dict) -> OnlineSequenceSpec:
    dom = BoxDomain(tuple(cfg["domain"]["lower"]), tuple(cfg["domain"]["upper"]))
    return OnlineSequenceSpec(
        T=int(cfg["T"]), kind=cfg["kind"], domain=dom, params=dict(cfg["params"])
    )


def default_scenarios() -> dict[str, OnlineSequenceSpec]:
    return {name: scenario_from_config(load_scenario(name)) for name in SCENARIO_KINDS}
