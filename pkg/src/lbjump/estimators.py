"""Monte Carlo estimators built on the jump process and its embedded chain.

Three routes to pi(f):

* MC — ergodic average along the realized trajectory, holding times and all;
* IS — importance-weighted average over the embedded chain alone, with
  weights proportional to 1/lambda (no holding times ever simulated);
* MH — the embedded jump distribution used as a Metropolis proposal, with
  acceptance min(1, lambda(current)/lambda(proposed)), targeting pi directly.

IS replaces each exponential holding time by its conditional expectation,
which is a Rao-Blackwellisation of MC; the faceoff experiment measures that
ordering empirically across matched-seed replications.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .balancing import BalancingSpec
from .errors import EmptyTrajectory, ZeroRate
from .jumprate import rate_exact
from .models import RatioOracle
from .simulate import JumpTrajectory, _BlockUniforms, _as_generator, simulate_skeleton

__all__ = [
    "EstimatorResult",
    "batch_means",
    "estimate_mc",
    "estimate_is",
    "estimate_mh",
    "FaceoffResult",
    "variance_faceoff",
]


@dataclass(frozen=True)
class EstimatorResult:
    estimate: float
    se: float
    n: int
    kind: str
    extras: dict = field(default_factory=dict)


def batch_means(values, weights=None) -> tuple[float, float]:
    """Weighted mean and a batch-means standard error with floor(sqrt(N))
    batches.  Assumption-light: only stationarity-ish of batches is used."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise EmptyTrajectory("no samples to average")
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    estimate = float(np.dot(weights, values) / weights.sum())
    n_batches = int(math.isqrt(n))
    if n_batches < 2:
        return estimate, math.inf
    size = n // n_batches
    used = n_batches * size
    v = values[:used].reshape(n_batches, size)
    w = weights[:used].reshape(n_batches, size)
    batch_est = (v * w).sum(axis=1) / w.sum(axis=1)
    se = float(batch_est.std(ddof=1) / math.sqrt(n_batches))
    return estimate, se


def estimate_mc(traj: JumpTrajectory, f) -> EstimatorResult:
    """Holding-time-weighted average of f along the trajectory.

    Matches :func:`lbjump.simulate.time_average` exactly (the final partial
    segment is included with its censored weight).
    """
    if traj.event_count < 1:
        raise EmptyTrajectory("MC estimator needs at least one jump")
    vals = np.fromiter((f(s) for s in traj.visited_states()), dtype=float)
    est, se = batch_means(vals, traj.holding_times())
    return EstimatorResult(estimate=est, se=se, n=traj.event_count, kind="MC")


def estimate_is(states, lams, f) -> EstimatorResult:
    """Importance-weighted skeleton average: weights 1/lambda, normalized.

    ``states``/``lams`` are the embedded chain X_0..X_{N-1} and its rates,
    e.g. from :func:`lbjump.simulate.simulate_skeleton`.
    """
    lams = np.asarray(lams, dtype=float)
    if np.any(lams <= 0.0):
        raise ZeroRate("importance weights need lambda > 0 at every state")
    vals = np.fromiter((f(s) for s in states), dtype=float)
    if vals.size != lams.size:
        raise ValueError("states and lambda values must align")
    est, se = batch_means(vals, 1.0 / lams)
    return EstimatorResult(estimate=est, se=se, n=int(vals.size), kind="IS")


def estimate_mh(
    x0, oracle: RatioOracle, g: BalancingSpec, n_steps: int, rng, f
) -> EstimatorResult:
    """Metropolised chain with the normalized jump distribution as proposal.

    The proposal is reversible for lambda-reweighted pi, so accepting with
    probability min(1, lambda(current)/lambda(proposed)) restores pi
    exactly; the estimate is the plain average over the chain.
    """
    rng = _as_generator(rng)
    uniforms = _BlockUniforms(rng)
    cache: dict = {}

    def tables(state):
        entry = cache.get(state)
        if entry is None:
            rr = rate_exact(state, oracle, g)
            entry = (rr.lam, np.cumsum(rr.weights).tolist(), rr.neighbors)
            cache[state] = entry
        return entry

    state = x0
    vals = np.empty(n_steps)
    accepted = 0
    for i in range(n_steps):
        vals[i] = f(state)
        lam, cumw, neigh = tables(state)
        u = uniforms.next() * lam
        proposal = neigh[min(bisect_right(cumw, u), len(neigh) - 1)]
        lam_prop = tables(proposal)[0]
        if uniforms.next() * lam_prop < lam:  # u < min(1, lam/lam_prop)
            state = proposal
            accepted += 1
    est, se = batch_means(vals)
    return EstimatorResult(
        estimate=est, se=se, n=n_steps, kind="MH",
        extras={"acceptance_rate": accepted / n_steps},
    )


@dataclass(frozen=True)
class FaceoffResult:
    """Per-seed estimates for the three estimators plus the paired ordering test."""

    estimates: dict  # kind -> np.ndarray over seeds
    variances: dict  # kind -> float
    truth: float
    p_value_is_beats_mc: float
    n_seeds: int

    def ordering_confirmed(self, level: float = 0.05) -> bool:
        return self.p_value_is_beats_mc < level


def variance_faceoff(
    oracle: RatioOracle,
    g: BalancingSpec,
    f,
    n_steps: int,
    n_seeds: int,
    master_seed: int,
    x0=0,
) -> FaceoffResult:
    """Matched-budget comparison of MC, IS and MH across seeds.

    Per seed, one embedded skeleton of ``n_steps`` states drives both IS and
    MC (MC additionally draws its exponential holding times from the same
    stream), and MH runs its own ``n_steps`` chain.  The one-sided paired
    t-test checks that squared MC errors exceed squared IS errors on
    average, i.e. the Rao-Blackwell ordering.
    """
    pi = oracle.target.pi
    truth = float(sum(pi[s] * f(s) for s in range(pi.size)))
    res: dict[str, np.ndarray] = {k: np.empty(n_seeds) for k in ("MC", "IS", "MH")}
    for s in range(n_seeds):
        root = np.random.SeedSequence(entropy=master_seed, spawn_key=(s,))
        rng_skel, rng_mh = (np.random.default_rng(c) for c in root.spawn(2))
        states, lams = simulate_skeleton(x0, oracle, g, n_steps, rng_skel)
        taus = rng_skel.exponential(1.0 / lams)
        traj = JumpTrajectory(
            initial_state=states[0],
            states=states[1:],
            times=np.cumsum(taus)[:-1],
            horizon=float(taus.sum()),
        )
        res["MC"][s] = estimate_mc(traj, f).estimate
        res["IS"][s] = estimate_is(states, lams, f).estimate
        res["MH"][s] = estimate_mh(x0, oracle, g, n_steps, rng_mh, f).estimate

    err2_mc = (res["MC"] - truth) ** 2
    err2_is = (res["IS"] - truth) ** 2
    test = stats.ttest_rel(err2_mc, err2_is, alternative="greater")
    return FaceoffResult(
        estimates=res,
        variances={k: float(v.var(ddof=1)) for k, v in res.items()},
        truth=truth,
        p_value_is_beats_mc=float(test.pvalue),
        n_seeds=n_seeds,
    )
