"""Value algebra over closeness certificates.

These combinators manipulate certified (eps, delta) pairs only; they never
touch function objects.  Callers are responsible for chaining certificates
whose underlying pairs actually compose (f~g with g~h, mixtures against one
common target); provenance strings record the chain for audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .closeness import EPSILON_CAP, Closeness
from .errors import EpsilonOverflow, InvalidWeights, WeakeningViolation

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class WeightVector:
    """Convex combination weights: entries in [0, 1], summing to one."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        if not w:
            raise InvalidWeights("weight vector must be nonempty")
        if any(v < 0.0 or v > 1.0 for v in w):
            raise InvalidWeights(f"weights outside [0, 1]: {w}")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise InvalidWeights(f"weights sum to {math.fsum(w)!r}, not 1")

    def __len__(self) -> int:
        return len(self.weights)


def reflexive() -> Closeness:
    """Every function is (0, 0)-close to itself."""
    return Closeness(0.0, 0.0, "reflexive")


def weaken(cert: Closeness, eps2: float, delta2: float) -> Closeness:
    """Relax a certificate to any larger (eps, delta)."""
    eps2, delta2 = float(eps2), float(delta2)
    if eps2 < cert.epsilon or delta2 < cert.delta:
        raise WeakeningViolation(
            f"({eps2}, {delta2}) is not a weakening of "
            f"({cert.epsilon}, {cert.delta})"
        )
    return Closeness(eps2, delta2, "weaken", {"from": cert.provenance})


def symmetric(cert: Closeness) -> Closeness:
    """Swap the roles of the two functions; the numbers are unchanged."""
    return Closeness(
        cert.epsilon, cert.delta, "symmetry", {"from": cert.provenance}
    )


def transitive(c1: Closeness, c2: Closeness) -> Closeness:
    """Chain f~g and g~h into (eps1 + eps2, delta1 + delta2) for f~h."""
    eps = c1.epsilon + c2.epsilon
    if eps > EPSILON_CAP:
        raise EpsilonOverflow(f"chained eps {eps} exceeds cap {EPSILON_CAP}")
    return Closeness(
        eps,
        c1.delta + c2.delta,
        "transitive",
        {"from": f"{c1.provenance}+{c2.provenance}"},
    )


def average(certs: Sequence[Closeness], w: WeightVector) -> Closeness:
    """Certificate for a convex combination against the common target.

    All inputs must certify closeness to one shared function; heterogeneous
    (eps_i, delta_i) are first weakened to (max eps, max delta), then the
    combination is (eps, (e^eps + 1) delta)-close to the target.
    """
    if not isinstance(w, WeightVector):
        w = WeightVector(tuple(w))
    if len(certs) != len(w):
        raise InvalidWeights(
            f"{len(certs)} certificates but {len(w)} weights"
        )
    eps = max(c.epsilon for c in certs)
    delta = max(c.delta for c in certs)
    return Closeness(
        eps,
        (math.exp(eps) + 1.0) * delta,
        "average",
        {"m": float(len(certs)), "shared_delta": delta},
    )
