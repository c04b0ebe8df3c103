"""Exact jump rates lambda(x) and normalized jump weights on discrete spaces.

lambda(x) is the integral of g(t(x, .)) against the proposal kernel; on a
countable neighborhood it is the finite sum of weight(y) = g(t(x,y)) *
gamma(x, {y}).  Normalizing the weights gives the embedded jump distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .balancing import BalancingSpec
from .errors import MissingSupBound, TruncationNotConverged, ZeroRate
from .models import (
    FiniteKernel,
    FiniteTarget,
    LatticeTarget,
    LatticeWalk,
    RatioOracle,
    neighborhood,
)

__all__ = [
    "RateResult",
    "rate_exact",
    "z_lambda_exact",
    "lattice_truncation",
    "rate_bound",
]

# weights below this are flushed to exact zero: denormals cost time and
# contribute nothing at the tolerances any test states
_FLUSH = 1e-300


@dataclass(frozen=True)
class RateResult:
    """Jump rate and per-neighbour weights at one state.

    ``lam`` equals the sum of ``weights`` exactly as summed.  ``flushed``
    counts sub-1e-300 weights that were zeroed.
    """

    state: object
    lam: float
    neighbors: list
    weights: np.ndarray
    flushed: int = 0

    def jump_distribution(self) -> np.ndarray:
        """Weights normalized to the embedded jump distribution."""
        return self.weights / self.lam


def rate_exact(x, oracle: RatioOracle, g: BalancingSpec) -> RateResult:
    """Exact lambda(x) and jump weights over the countable neighborhood of x.

    Boundary or zero-mass proposals contribute weight zero (the g(0) = 0
    convention).  Raises :class:`ZeroRate` when every weight vanishes: such a
    state is absorbing, which the processes here are not allowed to be.
    Overflowing weights (unbounded g against an extreme ratio) raise
    ``OverflowError`` rather than silently saturating.
    """
    neigh = neighborhood(oracle.kernel, x)
    states = []
    weights = np.empty(len(neigh))
    flushed = 0
    for idx, (y, p) in enumerate(neigh):
        log_w = oracle.log_weight(g, x, y) + math.log(p)
        w = math.exp(log_w) if log_w > -math.inf else 0.0
        if w == math.inf:
            raise OverflowError(f"jump weight overflowed at state {x!r} -> {y!r}")
        if 0.0 < w < _FLUSH:
            w = 0.0
            flushed += 1
        states.append(y)
        weights[idx] = w
    lam = float(weights.sum())
    if lam <= 0.0:
        raise ZeroRate(f"lambda({x!r}) = 0: no admissible move")
    return RateResult(state=x, lam=lam, neighbors=states, weights=weights, flushed=flushed)


def rate_bound(g: BalancingSpec) -> float:
    """Uniform rate bound sup g, valid since lambda(x) <= sup g for any
    probability proposal.  Empirical bounds are refused: thinning against a
    wrong envelope silently biases the simulated law."""
    if g.sup_bound is None:
        raise MissingSupBound(f"{g.name} is unbounded")
    if g.sup_is_empirical:
        raise MissingSupBound(f"{g.name} has only a grid-estimated sup bound")
    return float(g.sup_bound)


def lattice_truncation(
    target: LatticeTarget, tol: float = 1e-12, n_cap: int = 1_000_000
) -> tuple[int, float, float]:
    """Smallest index N* whose pi-tail mass falls below ``tol``.

    Returns (n_star, normalizer, tail_mass_bound).  The tail is bounded by a
    geometric ratio estimated from the last decades of the sum; targets whose
    mass ratio does not drop below 1 by ``n_cap`` raise
    :class:`TruncationNotConverged`.
    """
    log_u_prev = target.log_mass(0)
    total = math.exp(log_u_prev)
    n = 0
    while n < n_cap:
        n += 1
        log_u = target.log_mass(n)
        u = math.exp(log_u)
        total += u
        ratio = math.exp(log_u - log_u_prev)
        log_u_prev = log_u
        if ratio < 1.0:
            tail_bound = u * ratio / (1.0 - ratio)
            if tail_bound < tol * total:
                return n, total, tail_bound
    raise TruncationNotConverged(
        f"tail mass above {tol:g} of total after {n_cap} lattice terms"
    )


def z_lambda_exact(target, kernel, g: BalancingSpec, tol: float = 1e-12) -> float:
    """Z_lambda = sum_x lambda(x) pi(x), exactly on finite spaces and by
    certified truncation on lattices.

    For nondecreasing g the returned value must not exceed 2; the lattice
    truncation error is itself below 2*tol by the g <= 1 + t bound.
    """
    oracle = RatioOracle(target, kernel)
    if isinstance(target, FiniteTarget):
        acc = 0.0
        for x in range(target.size):
            if target.pi[x] > 0.0:
                acc += target.pi[x] * rate_exact(x, oracle, g).lam
        return float(acc)
    if isinstance(target, LatticeTarget):
        if not isinstance(kernel, LatticeWalk):
            raise TypeError("lattice Z_lambda needs the +-h walk kernel")
        n_star, normalizer, _ = lattice_truncation(target, tol)
        acc = 0.0
        for n in range(n_star + 1):
            pi_n = math.exp(target.log_mass(n)) / normalizer
            if pi_n == 0.0:
                continue
            acc += pi_n * rate_exact(n * kernel.h, oracle, g).lam
        return float(acc)
    raise TypeError("Z_lambda is exact on discrete spaces only")
