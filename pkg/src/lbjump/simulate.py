"""Trajectory simulation for locally-balanced jump processes.

Two simulators are provided:

* :func:`run_exact` draws the embedded chain and its exponential holding
  times directly, computing lambda exactly at every visited state; this
  needs a countable proposal neighborhood, i.e. finite or lattice models.
* :func:`run_thinning` uniformizes at the constant candidate rate sup g and
  accepts each proposal with probability g(t)/sup g; it is the only exact
  route on R^d, where lambda cannot be evaluated in closed form.

Both record only real jumps, so a trajectory is the ordered list of
(state-after-jump, jump-time) pairs on [0, horizon].
"""

from __future__ import annotations

import csv
import math
import os
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .balancing import BalancingSpec
from .errors import EmptyTrajectory, ExplosionGuard, ZeroRate
from .jumprate import rate_bound, rate_exact
from .models import RatioOracle, sample_base

__all__ = [
    "SeededStream",
    "JumpTrajectory",
    "run_exact",
    "run_thinning",
    "run_replicas",
    "simulate_skeleton",
    "time_average",
    "occupation_measure",
    "holding_times_at",
    "trajectories_to_csv",
]

DEFAULT_MAX_EVENTS = 10_000_000
_BLOCK = 8192


@dataclass(frozen=True)
class SeededStream:
    """Deterministic per-replica random stream.

    The same (master_seed, replica) pair always yields the same generator
    state, so replicated experiments are reproducible bit-for-bit and
    independent of execution order; the draw counter lives inside the
    returned numpy Generator.
    """

    master_seed: int
    replica: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.replica,))
        return np.random.default_rng(ss)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass
class JumpTrajectory:
    """Realized path: piecewise constant on [0, horizon].

    ``states[i]`` is the state entered at ``times[i]``; the initial state
    holds on [0, times[0]).  When the event cap fires, ``truncated`` is set
    and ``horizon`` is cut back to the last recorded jump time so that time
    averages stay unbiased over the covered window.
    """

    initial_state: object
    states: list
    times: np.ndarray
    horizon: float
    truncated: bool = False
    candidate_count: int | None = None
    candidates: list | None = field(default=None, repr=False)

    @property
    def event_count(self) -> int:
        return len(self.states)

    def holding_times(self) -> np.ndarray:
        """Durations spent in each visited state, final partial segment included."""
        edges = np.concatenate(([0.0], self.times, [self.horizon]))
        return np.diff(edges)

    def visited_states(self) -> list:
        return [self.initial_state] + list(self.states)

    def validate(self) -> None:
        if len(self.times) != len(self.states):
            raise ValueError("times/states length mismatch")
        if len(self.times) and (
            np.any(np.diff(self.times) <= 0.0)
            or self.times[0] <= 0.0
            or self.times[-1] > self.horizon + 1e-12
        ):
            raise ValueError("jump times must be strictly increasing within [0, horizon]")


class _BlockUniforms:
    """Scalar uniforms pulled from vectorized Generator draws."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._buf = rng.random(_BLOCK)
        self._i = 0

    def next(self) -> float:
        if self._i >= self._buf.shape[0]:
            self._buf = self._rng.random(_BLOCK)
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u

    def exponential(self, lam: float) -> float:
        # inverse CDF on the open unit interval; u == 0 is redrawn so holding
        # times are strictly positive
        u = self.next()
        while u == 0.0:
            u = self.next()
        return -math.log1p(-u) / lam


def run_exact(
    x0,
    oracle: RatioOracle,
    g: BalancingSpec,
    horizon: float,
    rng,
    max_events: int = DEFAULT_MAX_EVENTS,
    strict: bool = False,
) -> JumpTrajectory:
    """Simulate by drawing Exp(lambda(x)) holding times and jumps from the
    normalized weights, until the clock passes ``horizon``.

    Rates are cached per visited state.  Raises :class:`ZeroRate` if any
    visited state (the start included) admits no move; hitting ``max_events``
    sets the truncated flag, or raises :class:`ExplosionGuard` when
    ``strict``.
    """
    rng = _as_generator(rng)
    uniforms = _BlockUniforms(rng)
    cache: dict = {}

    def tables(state):
        entry = cache.get(state)
        if entry is None:
            rr = rate_exact(state, oracle, g)
            # a state whose only move is a self-jump is frozen in law
            if all(y == state for y, w in zip(rr.neighbors, rr.weights) if w > 0.0):
                raise ZeroRate(f"state {state!r} admits no move away from itself")
            cumw = np.cumsum(rr.weights).tolist()
            entry = (rr.lam, cumw, rr.neighbors)
            cache[state] = entry
        return entry

    state = x0
    clock = 0.0
    states: list = []
    times: list = []
    truncated = False
    while True:
        lam, cumw, neigh = tables(state)
        clock += uniforms.exponential(lam)
        if clock >= horizon:
            break
        if len(states) >= max_events:
            truncated = True
            break
        u = uniforms.next() * lam
        state = neigh[min(bisect_right(cumw, u), len(neigh) - 1)]
        states.append(state)
        times.append(clock)

    if truncated and strict:
        raise ExplosionGuard(f"event cap {max_events} hit at t = {clock:.6g}")
    eff_horizon = times[-1] if truncated and times else horizon
    return JumpTrajectory(
        initial_state=x0,
        states=states,
        times=np.asarray(times),
        horizon=eff_horizon,
        truncated=truncated,
    )


def run_thinning(
    x0,
    oracle: RatioOracle,
    g: BalancingSpec,
    horizon: float,
    rng,
    max_events: int = DEFAULT_MAX_EVENTS,
    strict: bool = False,
    store_candidates: bool = False,
) -> JumpTrajectory:
    """Uniformized simulation: candidate events at constant rate sup g, each
    accepted with probability g(t(x, y))/sup g.

    Rejected candidates leave the state unchanged and are not recorded as
    jumps; ``candidate_count`` tracks how many proposals were consumed.
    Requires a trusted (non-empirical) sup bound on g.
    """
    rng = _as_generator(rng)
    uniforms = _BlockUniforms(rng)
    lam_bar = rate_bound(g)
    log_lam_bar = math.log(lam_bar)

    if not oracle.in_support(x0):
        raise ZeroRate(f"start {x0!r} outside the target support")

    state = x0
    clock = 0.0
    states: list = []
    times: list = []
    candidates: list | None = [] if store_candidates else None
    n_candidates = 0
    truncated = False
    while True:
        clock += uniforms.exponential(lam_bar)
        if clock >= horizon:
            break
        if len(states) >= max_events:
            truncated = True
            break
        n_candidates += 1
        y = sample_base(oracle.kernel, state, rng)
        log_acc = oracle.log_weight(g, state, y) - log_lam_bar
        if candidates is not None:
            candidates.append((clock, y))
        u = uniforms.next()
        while u == 0.0:
            u = uniforms.next()
        if math.log(u) < log_acc:
            state = y
            states.append(state)
            times.append(clock)

    if truncated and strict:
        raise ExplosionGuard(f"event cap {max_events} hit at t = {clock:.6g}")
    eff_horizon = times[-1] if truncated and times else horizon
    return JumpTrajectory(
        initial_state=x0,
        states=states,
        times=np.asarray(times),
        horizon=eff_horizon,
        truncated=truncated,
        candidate_count=n_candidates,
        candidates=candidates,
    )


def run_replicas(
    x0,
    oracle: RatioOracle,
    g: BalancingSpec,
    horizon: float,
    n_replicas: int,
    master_seed: int,
    method: str = "exact",
    max_events: int = DEFAULT_MAX_EVENTS,
    threads: int = 1,
) -> list[JumpTrajectory]:
    """Independent replicas with per-replica derived seeds.

    Output order follows the replica index regardless of scheduling, and
    replica r is bitwise reproducible from (master_seed, r) alone.  Errors
    are re-raised tagged with the failing replica index.
    """
    runner = run_exact if method == "exact" else run_thinning

    def one(r: int) -> JumpTrajectory:
        try:
            return runner(
                x0, oracle, g, horizon, SeededStream(master_seed, r), max_events=max_events
            )
        except Exception as exc:
            raise type(exc)(f"replica {r}: {exc}") from exc

    if n_replicas <= 0:
        return []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(n_replicas)))
    return [one(r) for r in range(n_replicas)]


def simulate_skeleton(
    x0, oracle: RatioOracle, g: BalancingSpec, n_steps: int, rng
) -> tuple[list, np.ndarray]:
    """The embedded jump chain only: n_steps states X_0..X_{n-1} plus their
    rates lambda(X_j).  No holding times are drawn; this is the input the
    importance-weighted estimator runs on."""
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

    states = [x0]
    lams = np.empty(n_steps)
    state = x0
    for j in range(n_steps):
        lam, cumw, neigh = tables(state)
        lams[j] = lam
        if j == n_steps - 1:
            break
        u = uniforms.next() * lam
        state = neigh[min(bisect_right(cumw, u), len(neigh) - 1)]
        states.append(state)
    return states, lams


def time_average(traj: JumpTrajectory, f) -> float:
    """(1/T) * integral of f along the path, final partial segment included.

    Normalized by the exact sum of the holding times (analytically equal to
    the horizon) so constant functions are reproduced without rounding.
    """
    if traj.horizon <= 0.0:
        raise EmptyTrajectory("time average needs a positive horizon")
    hold = traj.holding_times()
    vals = np.fromiter((f(s) for s in traj.visited_states()), dtype=float)
    return float(np.dot(hold, vals) / hold.sum())


def occupation_measure(traj: JumpTrajectory) -> dict:
    """Fraction of time spent in each visited state (discrete states only)."""
    hold = traj.holding_times()
    occ: dict = {}
    for s, h in zip(traj.visited_states(), hold):
        occ[s] = occ.get(s, 0.0) + h
    total = traj.horizon
    return {s: h / total for s, h in occ.items()}


def holding_times_at(traj: JumpTrajectory, state) -> np.ndarray:
    """Completed holding times observed at ``state`` (final censored segment
    excluded, it would bias the exponential check)."""
    hold = traj.holding_times()
    visited = traj.visited_states()
    return np.array([hold[i] for i in range(len(visited) - 1) if visited[i] == state])


def _state_columns(state) -> list[float]:
    arr = np.atleast_1d(np.asarray(state, dtype=float))
    return [float(v) for v in arr]


def trajectories_to_csv(trajs: list[JumpTrajectory], path) -> None:
    """Write trajectories as (replica, event_index, time, state...) rows.

    Event index 0 is the initial state at time 0; vector states are
    flattened into state_0..state_{d-1} columns.
    """
    if not trajs:
        raise EmptyTrajectory("no trajectories to export")
    dim = len(_state_columns(trajs[0].initial_state))
    state_cols = ["state"] if dim == 1 else [f"state_{i}" for i in range(dim)]
    parent = os.path.dirname(str(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replica", "event_index", "time"] + state_cols)
        for r, traj in enumerate(trajs):
            writer.writerow([r, 0, "0"] + [f"{v:.17g}" for v in _state_columns(traj.initial_state)])
            for i, (t, s) in enumerate(zip(traj.times, traj.states), start=1):
                writer.writerow([r, i, f"{t:.17g}"] + [f"{v:.17g}" for v in _state_columns(s)])
