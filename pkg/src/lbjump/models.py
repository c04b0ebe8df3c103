"""State spaces, target distributions and base proposal kernels.

Three pairings are supported, matching the experiments the package runs:

* finite probability vector + row-stochastic proposal matrix,
* lattice log-mass on N or Z + symmetric +-h random walk,
* log-density on R^d (with optional gradient) + isotropic Gaussian walk.

Everything downstream consumes the pairing through :class:`RatioOracle`,
which exposes log t(x, y) = log[pi(y) gamma(y, x)] - log[pi(x) gamma(x, y)].
All ratio arithmetic is done in log space: lattice families like
pi(n) ~ exp(-a n^beta) overflow the ratio itself long before they overflow
its logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatch,
    ModelValidation,
    OutOfSupport,
    UncountableSupport,
    ZeroBaseProbability,
)

__all__ = [
    "FiniteTarget",
    "LatticeTarget",
    "ContinuousTarget",
    "exp_power_target",
    "FiniteKernel",
    "LatticeWalk",
    "GaussianWalk",
    "RatioOracle",
    "sample_base",
    "neighborhood",
    "target_from_descriptor",
    "kernel_from_descriptor",
    "oracle_from_descriptor",
]

_ATOL = 1e-12


# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class FiniteTarget:
    """Probability vector over states {0, ..., m-1}."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        object.__setattr__(self, "pi", pi)
        if pi.ndim != 1:
            raise ModelValidation("finite target must be a 1-d probability vector")
        if np.any(pi < 0.0):
            raise ModelValidation("finite target has negative entries")
        if abs(pi.sum() - 1.0) > _ATOL:
            raise ModelValidation(f"finite target sums to {pi.sum()!r}, not 1")
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "_log_pi", np.log(pi))

    @property
    def size(self) -> int:
        return self.pi.shape[0]

    def in_support(self, x: int) -> bool:
        return 0 <= x < self.size and self.pi[x] > 0.0

    def log_mass(self, x: int) -> float:
        if not 0 <= x < self.size:
            raise OutOfSupport(f"state {x} outside {{0,...,{self.size - 1}}}")
        return float(self._log_pi[x])

    def descriptor(self) -> dict:
        return {"kind": "finite", "pi": [float(p) for p in self.pi]}


@dataclass(frozen=True)
class LatticeTarget:
    """Unnormalized log-mass n -> log pi(n) on N (n >= 0) or Z."""

    log_mass_fn: Callable[[int], float] = field(repr=False)
    support: str = "N"  # "N" or "Z"
    name: str = "lattice"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.support not in ("N", "Z"):
            raise ModelValidation(f"lattice support must be 'N' or 'Z', got {self.support!r}")

    def in_support(self, n: int) -> bool:
        return self.support == "Z" or n >= 0

    def log_mass(self, n: int) -> float:
        if not self.in_support(n):
            raise OutOfSupport(f"lattice index {n} below 0 on N")
        v = float(self.log_mass_fn(int(n)))
        if math.isnan(v) or v == math.inf:
            raise ModelValidation(f"log mass at {n} is {v}")
        return v

    def descriptor(self) -> dict:
        if not self.params:
            raise ModelValidation("only named lattice families are serializable")
        return {"kind": "lattice", "family": self.name, **self.params}


def exp_power_target(a: float, beta: float) -> LatticeTarget:
    """Lattice family pi(n) ~ exp(-a * n^beta) on N.

    beta = 1 is a geometric tail; beta > 1 decays super-exponentially, the
    regime where unbounded balancing functions change the ergodic behaviour.
    """
    if a <= 0 or beta <= 0:
        raise ModelValidation("exp_power needs a > 0 and beta > 0")
    return LatticeTarget(
        log_mass_fn=lambda n: -a * float(n) ** beta,
        support="N",
        name="exp_power",
        params={"a": a, "beta": beta},
    )


@dataclass(frozen=True)
class ContinuousTarget:
    """Unnormalized log-density on R^d with optional gradient.

    ``hessian_bound`` declares M with -M*I <= Hess log pi <= M*I on
    ``probe_box``; the diffusion experiment verifies it by finite differences
    before trusting it.  ``stationary_sampler(rng, n)`` is optional and only
    used as an extra reference in convergence tables.
    """

    log_density: Callable[[np.ndarray], float] = field(repr=False)
    grad_log_density: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, repr=False
    )
    dim: int = 1
    hessian_bound: float | None = None
    probe_box: float = 3.0
    stationary_sampler: Callable | None = field(default=None, repr=False)
    log_density_batch: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, repr=False
    )
    name: str = "continuous"

    def in_support(self, x) -> bool:
        return True

    def log_mass(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"state shape {x.shape}, target dim {self.dim}")
        return float(self.log_density(x))

    def descriptor(self) -> dict:
        return {"kind": "continuous", "family": self.name, "dim": self.dim}


def std_normal_target(dim: int = 1) -> ContinuousTarget:
    return ContinuousTarget(
        log_density=lambda x: -0.5 * float(np.dot(x, x)),
        grad_log_density=lambda x: -x,
        dim=dim,
        hessian_bound=1.0,
        probe_box=4.0,
        stationary_sampler=lambda rng, n, d=dim: rng.standard_normal((n, d)),
        log_density_batch=lambda X: -0.5 * np.sum(X * X, axis=1),
        name="std_normal",
    )


def quartic_target() -> ContinuousTarget:
    """1-d pi(x) ~ exp(-x^4/4); Hessian of log pi is -3x^2, bounded on a box only."""
    return ContinuousTarget(
        log_density=lambda x: -0.25 * float(x[0]) ** 4,
        grad_log_density=lambda x: -(x**3),
        dim=1,
        hessian_bound=12.0,
        probe_box=2.0,
        log_density_batch=lambda X: -0.25 * X[:, 0] ** 4,
        name="quartic",
    )


# ---------------------------------------------------------------------------
# base kernels


@dataclass(frozen=True)
class FiniteKernel:
    """Row-stochastic proposal matrix on a finite space."""

    matrix: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", P)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ModelValidation("proposal matrix must be square")
        if np.any(P < 0.0):
            raise ModelValidation("proposal matrix has negative entries")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > _ATOL):
            raise ModelValidation("proposal matrix rows must sum to 1")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def descriptor(self) -> dict:
        return {"kind": "finite", "matrix": [[float(v) for v in row] for row in self.matrix]}


@dataclass(frozen=True)
class LatticeWalk:
    """Symmetric +-h walk: gamma(x, .) = (delta_{x-h} + delta_{x+h}) / 2."""

    h: float = 1.0

    def __post_init__(self):
        if self.h <= 0:
            raise ModelValidation("lattice step h must be positive")

    def index_of(self, x) -> int:
        return int(round(float(x) / self.h))

    def descriptor(self) -> dict:
        return {"kind": "lattice_walk", "h": self.h}


@dataclass(frozen=True)
class GaussianWalk:
    """Isotropic Gaussian proposal N(x, sigma^2 I_d)."""

    sigma: float
    dim: int = 1

    def __post_init__(self):
        if self.sigma <= 0:
            raise ModelValidation("Gaussian walk sigma must be positive")

    def descriptor(self) -> dict:
        return {"kind": "gaussian_walk", "sigma": self.sigma, "dim": self.dim}


def sample_base(kernel, x, rng: np.random.Generator):
    """Draw one proposal y ~ gamma(x, .)."""
    if isinstance(kernel, FiniteKernel):
        row = kernel.matrix[int(x)]
        return int(rng.choice(kernel.size, p=row))
    if isinstance(kernel, LatticeWalk):
        n = kernel.index_of(x)
        step = 1 if rng.random() < 0.5 else -1
        return (n + step) * kernel.h
    if isinstance(kernel, GaussianWalk):
        x = np.asarray(x, dtype=float)
        return x + kernel.sigma * rng.standard_normal(kernel.dim)
    raise TypeError(f"unknown kernel type {type(kernel).__name__}")


def neighborhood(kernel, x) -> list[tuple[object, float]]:
    """Exhaustive support of gamma(x, .) with probabilities summing to 1.

    Out-of-support neighbours (e.g. x - h proposed from the lattice origin)
    are returned as-is; the jump-rate layer assigns them weight zero via the
    g(0) = 0 convention, so the walk is never modified at the boundary.
    """
    if isinstance(kernel, FiniteKernel):
        row = kernel.matrix[int(x)]
        return [(j, float(row[j])) for j in np.nonzero(row)[0]]
    if isinstance(kernel, LatticeWalk):
        n = kernel.index_of(x)
        return [((n - 1) * kernel.h, 0.5), ((n + 1) * kernel.h, 0.5)]
    if isinstance(kernel, GaussianWalk):
        raise UncountableSupport("Gaussian walk has no countable neighborhood")
    raise TypeError(f"unknown kernel type {type(kernel).__name__}")


# ---------------------------------------------------------------------------
# ratio oracle


class RatioOracle:
    """log t(x, y) for a validated (target, kernel) pairing.

    For the symmetric lattice and Gaussian kernels this reduces to the
    log-mass difference; for finite matrices the proposal asymmetry enters.
    Pairings where gamma(x,y) > 0 but gamma(y,x) = 0 are rejected outright:
    they would make t undefined on visited pairs.
    """

    def __init__(self, target, kernel):
        self.target = target
        self.kernel = kernel
        if isinstance(target, FiniteTarget):
            if not isinstance(kernel, FiniteKernel):
                raise ModelValidation("finite target requires a finite kernel")
            if target.size != kernel.size:
                raise ModelValidation("target and kernel sizes differ")
            P = kernel.matrix
            if np.any((P > 0.0) != (P.T > 0.0)):
                raise ModelValidation(
                    "proposal support must be mutual: gamma(x,y) > 0 iff gamma(y,x) > 0"
                )
            with np.errstate(divide="ignore"):
                self._log_P = np.log(P)
        elif isinstance(target, LatticeTarget):
            if not isinstance(kernel, LatticeWalk):
                raise ModelValidation("lattice target requires the +-h walk kernel")
        elif isinstance(target, ContinuousTarget):
            if not isinstance(kernel, GaussianWalk):
                raise ModelValidation("continuous target requires the Gaussian walk")
            if target.dim != kernel.dim:
                raise ModelValidation("target and kernel dimensions differ")
        else:
            raise ModelValidation(f"unknown target type {type(target).__name__}")

    @property
    def symmetric_kernel(self) -> bool:
        return not isinstance(self.kernel, FiniteKernel)

    def in_support(self, x) -> bool:
        if isinstance(self.target, LatticeTarget):
            return self.target.in_support(self.kernel.index_of(x))
        if isinstance(self.target, FiniteTarget):
            return self.target.in_support(int(x))
        return True

    def log_ratio(self, x, y) -> float:
        """log t(x, y); antisymmetric in (x, y) wherever defined."""
        t, k = self.target, self.kernel
        if isinstance(t, FiniteTarget):
            i, j = int(x), int(y)
            if not t.in_support(i):
                raise OutOfSupport(f"state {i} not in target support")
            if k.matrix[i, j] <= 0.0 or k.matrix[j, i] <= 0.0:
                raise ZeroBaseProbability(f"gamma mass vanishes on pair ({i}, {j})")
            return float(
                t._log_pi[j] + self._log_P[j, i] - t._log_pi[i] - self._log_P[i, j]
            )
        if isinstance(t, LatticeTarget):
            ni, nj = k.index_of(x), k.index_of(y)
            if not t.in_support(ni):
                raise OutOfSupport(f"lattice state {ni} not in support")
            return t.log_mass(nj) - t.log_mass(ni)  # raises OutOfSupport for nj
        return t.log_mass(y) - t.log_mass(x)

    def log_weight(self, g, x, y) -> float:
        """log of g(t(x, y)), with out-of-support proposals mapped to -inf.

        This is the caller-facing version of the t := 0 convention: the
        proposal contributes weight zero instead of raising.
        """
        try:
            return g.log_eval(self.log_ratio(x, y))
        except OutOfSupport:
            return -math.inf


# ---------------------------------------------------------------------------
# JSON descriptors (CLI surface)


def target_from_descriptor(d: dict):
    kind = d.get("kind")
    if kind == "finite":
        return FiniteTarget(np.asarray(d["pi"], dtype=float))
    if kind == "lattice":
        family = d.get("family")
        if family == "exp_power":
            return exp_power_target(float(d["a"]), float(d["beta"]))
        raise ModelValidation(f"unknown lattice family {family!r}")
    if kind == "continuous":
        family = d.get("family")
        if family == "std_normal":
            return std_normal_target(int(d.get("dim", 1)))
        if family == "quartic":
            return quartic_target()
        raise ModelValidation(f"unknown continuous family {family!r}")
    raise ModelValidation(f"unknown target kind {kind!r}")


def kernel_from_descriptor(d: dict):
    kind = d.get("kind")
    if kind == "finite":
        return FiniteKernel(np.asarray(d["matrix"], dtype=float))
    if kind == "lattice_walk":
        return LatticeWalk(float(d.get("h", 1.0)))
    if kind == "gaussian_walk":
        return GaussianWalk(float(d["sigma"]), int(d.get("dim", 1)))
    raise ModelValidation(f"unknown kernel kind {kind!r}")


def oracle_from_descriptor(d: dict) -> RatioOracle:
    """Build a RatioOracle from {"target": {...}, "kernel": {...}}."""
    return RatioOracle(
        target_from_descriptor(d["target"]), kernel_from_descriptor(d["kernel"])
    )
