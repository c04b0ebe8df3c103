"""Small-jump limit experiment: Gaussian-kernel processes vs Langevin.

Shrinking the proposal scale sigma while speeding time up by sigma^-2 drives
the jump process toward the overdamped Langevin diffusion

    dS = (1/2) grad log pi(S) dt + dB.

Weak path convergence is not desk-testable, so the experiment checks its
observable shadow: fixed-time marginals of the rescaled process approach the
marginals of an Euler-Maruyama reference as sigma decreases, measured by a
two-sample Kolmogorov-Smirnov distance at matched sample sizes.  The drift
probe checks the mechanism behind the limit: for small sigma the per-unit-
rescaled-time displacement at a point approaches half the log-density
gradient (the factor 1/2 is forced by the balancing symmetry, which pins the
derivative of log g(e^x) at x = 0 to 1/2).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .balancing import BalancingSpec
from .errors import DimensionMismatch, MissingSupBound, NonFiniteState
from .jumprate import rate_bound
from .models import ContinuousTarget, GaussianWalk, RatioOracle
from .reports import ViolationReport
from .simulate import _as_generator, run_thinning

__all__ = [
    "DiffusionExperiment",
    "probe_smoothness",
    "run_rescaled",
    "ensemble_rescaled",
    "run_langevin_reference",
    "ensemble_langevin",
    "marginal_distance",
    "ConvergenceRow",
    "ConvergenceTable",
    "convergence_experiment",
    "DriftProbe",
    "drift_probe",
]


def _batch_logpi(target: ContinuousTarget, X: np.ndarray) -> np.ndarray:
    if target.log_density_batch is not None:
        return np.asarray(target.log_density_batch(X), dtype=float)
    return np.fromiter((target.log_density(row) for row in X), dtype=float, count=X.shape[0])


def _batch_grad(target: ContinuousTarget, X: np.ndarray) -> np.ndarray:
    out = np.asarray(target.grad_log_density(X), dtype=float)
    if out.shape == X.shape:
        return out
    return np.stack([np.asarray(target.grad_log_density(row), dtype=float) for row in X])


def _starts(x0, n_samples: int, dim: int) -> np.ndarray:
    """Broadcast a single start to (n_samples, dim), or accept per-replica starts."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 2:
        if x0.shape != (n_samples, dim):
            raise DimensionMismatch(f"per-replica starts must be ({n_samples}, {dim})")
        return x0.copy()
    x0 = np.atleast_1d(x0)
    if x0.shape != (dim,):
        raise DimensionMismatch(f"start shape {x0.shape} does not match dim {dim}")
    return np.tile(x0, (n_samples, 1))


@dataclass(frozen=True)
class DiffusionExperiment:
    """Configuration of one convergence sweep.

    ``sigmas`` must decrease strictly within (0, 1); g must be bounded by a
    trusted envelope and at least twice continuously differentiable, the two
    conditions the limit needs (and thinning needs the first anyway).
    """

    target: ContinuousTarget
    g: BalancingSpec
    sigmas: tuple
    horizon: float
    n_samples: int
    x0: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(
            self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float))
        )
        s = np.asarray(self.sigmas)
        if np.any(s <= 0.0) or np.any(s >= 1.0) or np.any(np.diff(s) >= 0.0):
            raise ValueError("sigma schedule must be strictly decreasing in (0, 1)")
        if self.g.sup_bound is None or self.g.sup_is_empirical:
            raise MissingSupBound(f"{self.g.name} has no trusted sup bound")
        if self.g.smoothness_order < 2:
            raise ValueError(f"{self.g.name} is not smooth enough for the limit")
        if self.target.grad_log_density is None:
            raise ValueError("target must expose a gradient for the reference")
        if self.x0.shape != (self.target.dim,):
            raise DimensionMismatch("x0 does not match the target dimension")

    @property
    def step(self) -> float:
        # reference discretization sits below the smallest sigma effect measured
        return self.dt if self.dt is not None else min(self.sigmas) ** 2 / 4.0


def probe_smoothness(
    target: ContinuousTarget,
    rng,
    n_points: int = 64,
    fd_step: float = 1e-4,
) -> ViolationReport:
    """Finite-difference check of the declared curvature bound.

    Samples points in the target's probe box and random unit directions and
    compares the directional second derivative of log pi against the declared
    bound.  Only the box is checked; global validity is taken from the
    declared family.
    """
    if target.hessian_bound is None:
        raise ValueError("target declares no curvature bound to probe")
    rng = _as_generator(rng)
    M = target.hessian_bound
    slack = 1e-3 * max(1.0, M)
    report = ViolationReport(check=f"smoothness[{target.name}]")
    for _ in range(n_points):
        x = rng.uniform(-target.probe_box, target.probe_box, size=target.dim)
        u = rng.standard_normal(target.dim)
        u /= np.linalg.norm(u)
        h = fd_step
        d2 = (
            target.log_mass(x + h * u) - 2.0 * target.log_mass(x) + target.log_mass(x - h * u)
        ) / h**2
        if not -M - slack <= d2 <= M + slack:
            report.add(float(np.linalg.norm(x)), f"directional curvature {d2:.4g} outside [-{M}, {M}]")
    return report


def run_rescaled(
    target: ContinuousTarget,
    g: BalancingSpec,
    sigma: float,
    x0,
    horizon: float,
    rng,
    max_events: int = 10_000_000,
):
    """Terminal state of the sigma-rescaled process at rescaled time
    ``horizon``: one thinning run over physical time horizon/sigma^2."""
    oracle = RatioOracle(target, GaussianWalk(sigma, target.dim))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if horizon == 0.0:
        return x0.copy()
    traj = run_thinning(
        x0, oracle, g, horizon / sigma**2, rng, max_events=max_events
    )
    return np.atleast_1d(np.asarray(traj.states[-1] if traj.states else traj.initial_state))


def ensemble_rescaled(
    target: ContinuousTarget,
    g: BalancingSpec,
    sigma: float,
    x0,
    horizon: float,
    n_samples: int,
    rng,
) -> np.ndarray:
    """Terminal states of ``n_samples`` independent rescaled replicas.

    Vectorized over replicas through the uniformized embedded chain: the
    state at the horizon is the chain after a Poisson(sup g * horizon /
    sigma^2) number of accept-or-hold steps, which is the same law as
    per-replica thinning.  ``x0`` may be a single state or an
    (n_samples, dim) array of per-replica starts.
    """
    rng = _as_generator(rng)
    lam_bar = rate_bound(g)
    d = target.dim
    X = _starts(x0, n_samples, d)
    counts = rng.poisson(lam_bar * horizon / sigma**2, size=n_samples)
    log_pi = _batch_logpi(target, X)
    remaining = counts.copy()
    while True:
        active = np.nonzero(remaining > 0)[0]
        if active.size == 0:
            break
        Z = sigma * rng.standard_normal((active.size, d))
        Y = X[active] + Z
        log_pi_y = _batch_logpi(target, Y)
        log_acc = g.log_eval_array(log_pi_y - log_pi[active]) - math.log(lam_bar)
        accept = np.log(rng.random(active.size)) < log_acc
        moved = active[accept]
        X[moved] = Y[accept]
        log_pi[moved] = log_pi_y[accept]
        remaining[active] -= 1
    return X


def run_langevin_reference(
    target: ContinuousTarget, x0, horizon: float, dt: float, rng, noise: bool = True
) -> np.ndarray:
    """Euler-Maruyama for dS = (1/2) grad log pi dt + dB, one path.

    ``noise=False`` integrates the deterministic half-gradient flow, kept as
    a debugging mode.
    """
    X = ensemble_langevin(target, x0, horizon, dt, 1, rng, noise=noise)
    return X[0]


def ensemble_langevin(
    target: ContinuousTarget, x0, horizon: float, dt: float, n_samples: int, rng,
    noise: bool = True,
) -> np.ndarray:
    """Euler-Maruyama terminal states for ``n_samples`` paths.

    ``x0`` may be one state or an (n_samples, dim) array of starts.
    """
    rng = _as_generator(rng)
    if target.grad_log_density is None:
        raise ValueError("Langevin reference needs the gradient")
    M = target.hessian_bound
    if M is not None and dt * M >= 0.1:
        raise ValueError(f"dt = {dt} too coarse for curvature bound {M}")
    n_steps = max(1, round(horizon / dt))
    dt = horizon / n_steps  # land exactly on the horizon
    X = _starts(x0, n_samples, target.dim)
    root_dt = math.sqrt(dt)
    for _ in range(n_steps):
        X = X + 0.5 * dt * _batch_grad(target, X)
        if noise:
            X = X + root_dt * rng.standard_normal(X.shape)
    if not np.all(np.isfinite(X)):
        raise NonFiniteState("Euler-Maruyama exploded; reduce dt")
    return X


def marginal_distance(samples_a, samples_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic per coordinate, max over
    coordinates; symmetric in its arguments."""
    A = np.atleast_2d(np.asarray(samples_a, dtype=float))
    B = np.atleast_2d(np.asarray(samples_b, dtype=float))
    if A.shape[0] == 1 and A.shape[1] > 1 and B.shape[0] == 1:
        A, B = A.T, B.T
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"sample dims {A.shape[1]} vs {B.shape[1]}")
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    return float(
        max(stats.ks_2samp(A[:, j], B[:, j]).statistic for j in range(A.shape[1]))
    )


@dataclass(frozen=True)
class ConvergenceRow:
    sigma: float
    n_samples: int
    ks_vs_langevin: float
    ks_vs_stationary: float | None
    runtime_s: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: list[ConvergenceRow]

    @property
    def ks_values(self) -> list[float]:
        return [r.ks_vs_langevin for r in self.rows]

    @property
    def strictly_decreasing(self) -> bool:
        ks = self.ks_values
        return all(b < a for a, b in zip(ks, ks[1:]))


def convergence_experiment(exp: DiffusionExperiment, master_seed: int) -> ConvergenceTable:
    """KS distance from the rescaled process to the Langevin reference for
    each sigma in the schedule, at matched sample sizes and derived seeds.

    One reference ensemble is shared across the schedule: the comparison is
    between sigmas, and a common reference removes its sampling noise from
    the sigma-to-sigma differences.
    """
    root = np.random.SeedSequence(entropy=master_seed)
    streams = root.spawn(len(exp.sigmas) + 2)
    rng_stat = np.random.default_rng(streams[-1])
    stationary = (
        exp.target.stationary_sampler(rng_stat, exp.n_samples)
        if exp.target.stationary_sampler is not None
        else None
    )
    reference = ensemble_langevin(
        exp.target, exp.x0, exp.horizon, exp.step, exp.n_samples,
        np.random.default_rng(streams[-2]),
    )
    rows = []
    for i, sigma in enumerate(exp.sigmas):
        t0 = time.perf_counter()
        sample = ensemble_rescaled(
            exp.target, exp.g, sigma, exp.x0, exp.horizon, exp.n_samples,
            np.random.default_rng(streams[i]),
        )
        ks_ref = marginal_distance(sample, reference)
        ks_stat = marginal_distance(sample, stationary) if stationary is not None else None
        rows.append(
            ConvergenceRow(
                sigma=sigma,
                n_samples=exp.n_samples,
                ks_vs_langevin=ks_ref,
                ks_vs_stationary=ks_stat,
                runtime_s=time.perf_counter() - t0,
            )
        )
    return ConvergenceTable(rows=rows)


@dataclass(frozen=True)
class DriftProbe:
    drift: float
    reference: float
    rel_err: float


def drift_probe(
    target: ContinuousTarget, g: BalancingSpec, sigma: float, x: float,
    n_nodes: int = 201,
) -> DriftProbe:
    """Per-unit-rescaled-time displacement at a 1-d probe point.

    Computes sigma^-2 * E[Z g(pi(x+Z)/pi(x))], Z ~ N(0, sigma^2), by
    Gauss-Hermite quadrature (no Monte Carlo error), and compares it to half
    the central-finite-difference gradient of log pi — an oracle independent
    of any gradient callable the target may carry.
    """
    if target.dim != 1:
        raise DimensionMismatch("the drift probe is a 1-d diagnostic")
    nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
    z = math.sqrt(2.0) * sigma * nodes
    lp_x = target.log_mass(np.array([x]))
    lp_y = np.fromiter(
        (target.log_mass(np.array([x + zi])) for zi in z), dtype=float, count=z.size
    )
    gv = np.exp(g.log_eval_array(lp_y - lp_x))
    drift = float(np.sum(weights * z * gv) / math.sqrt(math.pi)) / sigma**2
    delta = 1e-5
    fd_grad = (
        target.log_mass(np.array([x + delta])) - target.log_mass(np.array([x - delta]))
    ) / (2.0 * delta)
    reference = 0.5 * fd_grad
    rel_err = abs(drift - reference) / max(abs(reference), 1e-12)
    return DriftProbe(drift=drift, reference=reference, rel_err=rel_err)
