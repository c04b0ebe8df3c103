"""Balancing functions: the weight g applied to target ratios.

A balancing function satisfies g(1) = 1 and the symmetry g(t) = t*g(1/t) for
t > 0, with g(0) := 0.  That symmetry is what makes the weighted jump kernel
reversible, so every entry in the catalog is shipped with both a direct
evaluator and a log-domain evaluator b(x) = log g(e^x); the latter is the only
safe route when target ratios overflow double precision (e.g. sharply decaying
lattice tails).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import MissingSupBound, NonPositiveGridPoint
from .reports import ViolationReport

__all__ = [
    "BalancingSpec",
    "builtin_catalog",
    "get",
    "standard_grid",
    "check_balancing",
    "check_bounds",
    "blend",
    "geometric_blend",
    "from_callable",
]

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class BalancingSpec:
    """A named balancing function.

    Parameters
    ----------
    name : str
        Catalog identifier, e.g. ``"barker"`` or ``"power(0.3)"``.
    fn : callable
        Direct evaluator t -> g(t) for t >= 0.
    log_fn : callable
        Log-domain evaluator x -> log g(e^x).
    is_nondecreasing : bool
        Whether g is nondecreasing on [0, inf); unlocks the sandwich bounds.
    sup_bound : float or None
        sup_t g(t) when finite and exactly known, else None.
    sup_is_empirical : bool
        True when ``sup_bound`` was estimated by grid search; such bounds are
        refused by thinning-based simulation.
    smoothness_order : int
        Verified number of continuous derivatives (capped at 2; the diffusion
        experiment requires >= 2).

    Instances are immutable and safe to share across worker processes.
    """

    name: str
    fn: Callable[[float], float] = field(repr=False)
    log_fn: Callable[[float], float] = field(repr=False)
    is_nondecreasing: bool = True
    sup_bound: float | None = None
    sup_is_empirical: bool = False
    smoothness_order: int = 0

    def __call__(self, t: float) -> float:
        if t == 0.0:
            return 0.0
        return float(self.fn(t))

    def log_eval(self, x: float) -> float:
        """Return log g(e^x); x = -inf maps to -inf (the g(0)=0 convention)."""
        if x == -math.inf:
            return -math.inf
        return float(self.log_fn(x))

    def log_eval_array(self, x: np.ndarray) -> np.ndarray:
        """Vectorized log g(e^x); catalog log evaluators broadcast natively."""
        x = np.asarray(x, dtype=float)
        try:
            out = np.asarray(self.log_fn(x), dtype=float)
            if out.shape != x.shape:
                raise TypeError
            return out
        except (TypeError, ValueError):
            return np.fromiter((self.log_eval(v) for v in x.ravel()), dtype=float).reshape(
                x.shape
            )


def _min_fn(t):
    return min(1.0, t)


def _barker_fn(t):
    return 2.0 * t / (1.0 + t)


def _max_fn(t):
    return max(1.0, t)


def _sqrt_fn(t):
    return math.sqrt(t)


def _barker_log(x):
    # log 2 + x - log(1 + e^x), stable at both ends
    return LOG2 + x - np.logaddexp(0.0, x)


def builtin_catalog(alpha: float = 0.5) -> list[BalancingSpec]:
    """Return the standard catalog: min, barker, max, sqrt, power(alpha).

    ``alpha`` parameterizes the piecewise power family t^alpha on [0,1),
    t^(1-alpha) on [1,inf); the default 0.5 reduces it to sqrt.
    """
    return [
        BalancingSpec(
            name="min",
            fn=_min_fn,
            log_fn=lambda x: np.minimum(0.0, x),
            sup_bound=1.0,
            smoothness_order=0,
        ),
        BalancingSpec(
            name="barker",
            fn=_barker_fn,
            log_fn=_barker_log,
            sup_bound=2.0,
            smoothness_order=2,
        ),
        BalancingSpec(
            name="max",
            fn=_max_fn,
            log_fn=lambda x: np.maximum(0.0, x),
            smoothness_order=0,
        ),
        BalancingSpec(
            name="sqrt",
            fn=_sqrt_fn,
            log_fn=lambda x: 0.5 * x,
            smoothness_order=2,
        ),
        power(alpha),
    ]


def power(alpha: float) -> BalancingSpec:
    """The piecewise power balancing function with exponent ``alpha`` > 0.

    g(t) = t^alpha for t < 1 and t^(1-alpha) for t >= 1.  Nondecreasing iff
    alpha <= 1; bounded (by 1) iff alpha >= 1.  alpha = 1 coincides with min,
    alpha = 0.5 with sqrt.
    """
    if alpha <= 0:
        raise ValueError(f"power family needs alpha > 0, got {alpha}")

    def fn(t, a=alpha):
        return t**a if t < 1.0 else t ** (1.0 - a)

    def log_fn(x, a=alpha):
        return np.where(np.asarray(x) < 0.0, a * np.asarray(x), (1.0 - a) * np.asarray(x))

    return BalancingSpec(
        name=f"power({alpha:g})",
        fn=fn,
        log_fn=log_fn,
        is_nondecreasing=alpha <= 1.0,
        sup_bound=1.0 if alpha >= 1.0 else None,
        smoothness_order=2 if alpha == 0.5 else 0,
    )


_POWER_RE = re.compile(r"^power\((?P<alpha>[0-9.eE+-]+)\)$")


def get(name: str) -> BalancingSpec:
    """Look up a catalog entry by its CLI name: min | barker | max | sqrt | power(a)."""
    m = _POWER_RE.match(name.strip())
    if m:
        return power(float(m.group("alpha")))
    for spec in builtin_catalog():
        if spec.name == name:
            return spec
    raise KeyError(f"unknown balancing function {name!r}")


def standard_grid(n: int = 200, lo: float = 1e-6, hi: float = 1e6) -> np.ndarray:
    """Log-spaced verification grid over [lo, hi] with t = 1 appended."""
    grid = np.logspace(math.log10(lo), math.log10(hi), n)
    return np.append(grid, 1.0)


def check_balancing(
    spec: BalancingSpec, grid, tol: float = 1e-12
) -> ViolationReport:
    """Check g(1)=1, positivity and the symmetry g(t) = t*g(1/t) on ``grid``.

    The symmetry residual is compared against ``tol * max(1, g(t))``: the
    round trip through g(1/t) costs a few ulps of g(t), which for unbounded
    g at t ~ 1e6 is far above any absolute 1e-12.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0.0):
        raise NonPositiveGridPoint("grid must be nonempty with all entries > 0")

    report = ViolationReport(check=f"balancing[{spec.name}]")
    if abs(spec(1.0) - 1.0) > 1e-14:
        report.add(1.0, f"g(1) = {spec(1.0)!r} != 1")
    if spec(0.0) != 0.0:
        report.add(0.0, f"g(0) = {spec(0.0)!r} != 0")
    for t in grid:
        gt = spec(t)
        if not gt > 0.0:
            report.add(t, f"g({t}) = {gt} not positive")
            continue
        resid = abs(gt - t * spec(1.0 / t))
        if resid > tol * max(1.0, gt):
            report.add(t, f"|g(t) - t*g(1/t)| = {resid:.3e} at t = {t:.6e}")
    return report


def check_bounds(
    spec: BalancingSpec, grid, tol: float = 1e-12, require_sup: bool = False
) -> ViolationReport:
    """Check the sandwich min(1,t) <= g <= max(1,t) and, when a trusted
    sup bound is present, g(t) <= sup_bound and g(t) <= sup_bound*min(1,t).

    ``require_sup=True`` raises :class:`MissingSupBound` when the bounded-g
    checks were requested but the spec carries no sup bound.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0.0):
        raise NonPositiveGridPoint("grid must be nonempty with all entries > 0")
    if require_sup and spec.sup_bound is None:
        raise MissingSupBound(f"{spec.name} has no sup bound")

    report = ViolationReport(check=f"bounds[{spec.name}]")
    for t in grid:
        gt = spec(t)
        if spec.is_nondecreasing:
            lo, hi = min(1.0, t), max(1.0, t)
            if gt < lo - tol * max(1.0, lo):
                report.add(t, f"g(t) = {gt:.6e} < min(1,t) = {lo:.6e}")
            if gt > hi + tol * max(1.0, hi):
                report.add(t, f"g(t) = {gt:.6e} > max(1,t) = {hi:.6e}")
        if spec.sup_bound is not None:
            lam = spec.sup_bound
            if gt > lam + tol * lam:
                report.add(t, f"g(t) = {gt:.6e} > sup bound {lam}")
            cap = lam * min(1.0, t)
            if spec.is_nondecreasing and gt > cap + tol * max(1.0, cap):
                report.add(t, f"g(t) = {gt:.6e} > sup*min(1,t) = {cap:.6e}")
    return report


def blend(g1: BalancingSpec, g2: BalancingSpec, a: float) -> BalancingSpec:
    """Convex combination a*g1 + (1-a)*g2; balancing functions are closed under it."""
    if not 0.0 < a < 1.0:
        raise ValueError("blend weight must lie in (0, 1)")

    def fn(t):
        return a * g1.fn(t) + (1.0 - a) * g2.fn(t)

    def log_fn(x):
        return np.logaddexp(
            math.log(a) + g1.log_eval(x), math.log(1.0 - a) + g2.log_eval(x)
        )

    sup = None
    if g1.sup_bound is not None and g2.sup_bound is not None:
        sup = a * g1.sup_bound + (1.0 - a) * g2.sup_bound
    return BalancingSpec(
        name=f"blend({g1.name},{g2.name};{a:g})",
        fn=fn,
        log_fn=log_fn,
        is_nondecreasing=g1.is_nondecreasing and g2.is_nondecreasing,
        sup_bound=sup,
        sup_is_empirical=g1.sup_is_empirical or g2.sup_is_empirical,
        smoothness_order=min(g1.smoothness_order, g2.smoothness_order),
    )


def geometric_blend(g1: BalancingSpec, g2: BalancingSpec, a: float) -> BalancingSpec:
    """Geometric combination g1^a * g2^(1-a), the other convexity closure."""
    if not 0.0 < a < 1.0:
        raise ValueError("blend weight must lie in (0, 1)")

    def log_fn(x):
        return a * g1.log_eval(x) + (1.0 - a) * g2.log_eval(x)

    def fn(t):
        return g1.fn(t) ** a * g2.fn(t) ** (1.0 - a)

    sup = None
    if g1.sup_bound is not None and g2.sup_bound is not None:
        sup = g1.sup_bound**a * g2.sup_bound ** (1.0 - a)
    return BalancingSpec(
        name=f"geoblend({g1.name},{g2.name};{a:g})",
        fn=fn,
        log_fn=log_fn,
        is_nondecreasing=g1.is_nondecreasing and g2.is_nondecreasing,
        sup_bound=sup,
        sup_is_empirical=g1.sup_is_empirical or g2.sup_is_empirical,
        smoothness_order=min(g1.smoothness_order, g2.smoothness_order),
    )


def from_callable(
    fn: Callable[[float], float],
    name: str,
    log_fn: Callable[[float], float] | None = None,
    smoothness_order: int = 0,
) -> BalancingSpec:
    """Wrap a user-supplied g.

    Monotonicity and the sup bound are estimated on the standard grid and
    flagged empirical: an empirical bound is never accepted as a thinning
    envelope because a wrong bound silently biases simulation.
    """
    if log_fn is None:

        def log_fn(x, _fn=fn):
            return math.log(_fn(math.exp(x)))

    grid = standard_grid()
    vals = np.array([fn(t) for t in grid])
    order = np.argsort(grid)
    nondecreasing = bool(np.all(np.diff(vals[order]) >= -1e-12))
    return BalancingSpec(
        name=name,
        fn=fn,
        log_fn=log_fn,
        is_nondecreasing=nondecreasing,
        sup_bound=float(vals.max()),
        sup_is_empirical=True,
        smoothness_order=smoothness_order,
    )
