"""Birth-death analysis on N: expected hitting times for the +-1 walk.

For a lattice target pi and balancing function g the process at n >= 1 moves
down with weight g(pi(n-1)/pi(n)) and up with weight g(pi(n+1)/pi(n)), both
carrying the 1/2 proposal mass.  Writing p(n), q(n) for the embedded up/down
probabilities, the one-level descent times u(n) = E_n[time to first hit n-1]
obey

    u(n) = a(n) + b(n) * u(n+1),
    a(n) = 2 / g(pi(n-1)/pi(n)),    b(n) = p(n)/q(n),

and E_N[time to hit k] = u(k+1) + ... + u(N).  Truncating the recursion at
n_max with the two tail values {0, 1/((1-2p)lambda)} brackets the exact
answer: the upper tail value is the coupling bound against a homogeneous
random walk with upward probability p and rate lambda, valid once p(n) <= p <
1/2 and lambda(n) >= lambda beyond the scan window.  Divergence of sum a(n)
is exactly the failure of the process to come down from infinity, which is
why bounded g (where a(n) >= 2/sup g) can never be uniformly ergodic on
these targets while fast-growing g can.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve

from .balancing import BalancingSpec
from .errors import ExplosionGuard, PremiseUnverifiable
from .models import LatticeTarget
from .reports import ViolationReport
from .simulate import SeededStream, _BlockUniforms

__all__ = [
    "BirthDeathModel",
    "SequenceTable",
    "HittingEstimate",
    "HittingSample",
    "sequences",
    "expected_hitting",
    "linear_system_hitting",
    "divergence_test",
    "DivergenceReport",
    "GrowthReport",
    "check_growth_conditions",
    "simulate_hitting",
]


@dataclass(frozen=True)
class BirthDeathModel:
    """Lattice target on N with the unit +-1 walk and a balancing function.

    All derived sequences are computed from log-mass differences so that
    super-exponential tails (exp_power with beta > 1) never overflow.
    """

    target: LatticeTarget
    g: BalancingSpec

    def __post_init__(self):
        if self.target.support != "N":
            raise ValueError("birth-death analysis lives on N")

    def _log_down(self, n: int) -> float:
        # log g(pi(n-1)/pi(n)); the move n -> n-1
        return self.g.log_eval(self.target.log_mass(n - 1) - self.target.log_mass(n))

    def _log_up(self, n: int) -> float:
        return self.g.log_eval(self.target.log_mass(n + 1) - self.target.log_mass(n))

    def lam(self, n: int) -> float:
        """Total jump rate, the 1/2 proposal mass included."""
        up = math.exp(self._log_up(n))
        down = math.exp(self._log_down(n)) if n >= 1 else 0.0
        return 0.5 * (up + down)

    def p(self, n: int) -> float:
        """Embedded probability of moving up."""
        if n == 0:
            return 1.0
        # 1 / (1 + exp(log_down - log_up)), stable for lopsided weights
        return float(1.0 / (1.0 + math.exp(self._log_down(n) - self._log_up(n))))

    def q(self, n: int) -> float:
        return 1.0 - self.p(n)

    def a(self, n: int) -> float:
        """a(n) = 1/(lambda(n) q(n)) = 2 / g(pi(n-1)/pi(n)), n >= 1."""
        if n < 1:
            raise ValueError("a(n) is defined for n >= 1")
        return 2.0 * math.exp(-self._log_down(n))

    def b(self, n: int) -> float:
        """Odds of moving up, p(n)/q(n), n >= 1."""
        if n < 1:
            raise ValueError("b(n) is defined for n >= 1")
        return math.exp(self._log_up(n) - self._log_down(n))


@dataclass(frozen=True)
class SequenceTable:
    """Columns of the derived sequences; gamma is anchored at gamma_{k+1} = 1."""

    k: int
    n: np.ndarray
    p: np.ndarray
    q: np.ndarray
    lam: np.ndarray
    a: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    overflowed: bool = False


def sequences(model: BirthDeathModel, n_max: int, k: int = 0) -> SequenceTable:
    """Tabulate p, q, lambda, a, b on [1, n_max] and gamma on [k+1, n_max+1]
    via the recurrence gamma_{n+1} = 1 + b(n) * gamma_n.

    A heavy-tailed target keeping b(n) >= 1 makes gamma blow up; that is
    reported through the ``overflowed`` flag rather than raised, since the
    divergence itself is informative.
    """
    if n_max < k + 1:
        raise ValueError("n_max must be at least k + 1")
    ns = np.arange(1, n_max + 1)
    p = np.array([model.p(n) for n in ns])
    q = 1.0 - p
    lam = np.array([model.lam(n) for n in ns])
    a = np.array([model.a(n) for n in ns])
    b = np.array([model.b(n) for n in ns])

    gamma = np.full(n_max + 2, np.nan)
    gamma[k + 1] = 1.0
    overflowed = False
    for n in range(k + 1, n_max + 1):
        gamma[n + 1] = 1.0 + b[n - 1] * gamma[n]
        if not math.isfinite(gamma[n + 1]):
            overflowed = True
    return SequenceTable(k=k, n=ns, p=p, q=q, lam=lam, a=a, b=b, gamma=gamma, overflowed=overflowed)


@dataclass(frozen=True)
class HittingEstimate:
    """Bracket [lower, upper] for the expected hitting time of k from N."""

    lower: float
    upper: float
    n_max: int
    tail_bound: float
    p_bar: float
    lam_min: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


def _premise_constants(model: BirthDeathModel, k: int, n_max: int) -> tuple[float, float]:
    """Exhibit p < 1/2 and lambda > 0 on a suffix of [k+1, n_max].

    Returns the worst constants over the suffix where p stays below 1/2;
    raises :class:`PremiseUnverifiable` when no such suffix exists.
    """
    ps = np.array([model.p(n) for n in range(k + 1, n_max + 1)])
    lams = np.array([model.lam(n) for n in range(k + 1, n_max + 1)])
    below = ps < 0.5
    if not below[-1]:
        raise PremiseUnverifiable(
            f"p(n) has not dropped below 1/2 by n_max = {n_max}"
        )
    # last index where p >= 1/2; the suffix after it is the verified window
    start = int(np.nonzero(~below)[0][-1]) + 1 if not below.all() else 0
    p_bar = float(ps[start:].max())
    lam_min = float(lams[start:].min())
    if lam_min <= 0.0:
        raise PremiseUnverifiable("lambda(n) vanished in the verified window")
    return p_bar, lam_min


def expected_hitting(
    model: BirthDeathModel, N: int, k: int, n_max: int | None = None
) -> HittingEstimate:
    """Bracket E_N[time to hit k] by the backward recursion truncated at
    ``n_max`` (default 10 N) with tail values {0, 1/((1-2p)lambda)}."""
    if not 0 <= k < N:
        raise ValueError("need 0 <= k < N")
    if n_max is None:
        n_max = 10 * N
    if n_max < N:
        raise ValueError("truncation level must reach N")
    p_bar, lam_min = _premise_constants(model, k, n_max)
    tail_bound = 1.0 / ((1.0 - 2.0 * p_bar) * lam_min)

    lower = upper = 0.0
    u_lo, u_up = 0.0, tail_bound
    for n in range(n_max, k, -1):
        a_n, b_n = model.a(n), model.b(n)
        u_lo = a_n + b_n * u_lo
        u_up = a_n + b_n * u_up
        if n <= N:
            lower += u_lo
            upper += u_up
    return HittingEstimate(
        lower=lower, upper=upper, n_max=n_max, tail_bound=tail_bound,
        p_bar=p_bar, lam_min=lam_min,
    )


def linear_system_hitting(model: BirthDeathModel, N: int, k: int, n_max: int) -> float:
    """Independent oracle: solve the censored chain on [k, n_max] directly.

    Absorbing at k; at the top level the upward proposal is kept as a
    self-jump at full rate, which is exactly the recursion's zero-tail
    truncation.  Dense solve, no recursion shared with
    :func:`expected_hitting`.
    """
    if not k < N <= n_max:
        raise ValueError("need k < N <= n_max")
    size = n_max - k + 1  # states k..n_max
    A = np.zeros((size, size))
    rhs = np.zeros(size)
    A[0, 0] = 1.0  # E_k = 0
    for n in range(k + 1, n_max + 1):
        i = n - k
        lam_n, p_n, q_n = model.lam(n), model.p(n), model.q(n)
        rhs[i] = 1.0 / lam_n
        A[i, i] = 1.0
        if n < n_max:
            A[i, i + 1] = -p_n
        else:
            A[i, i] -= p_n  # censored: upward proposal self-jumps
        A[i, i - 1] = -q_n
    E = solve(A, rhs)
    return float(E[N - k])


@dataclass(frozen=True)
class DivergenceReport:
    """Partial sums of a(n) plus a (heuristic) summability verdict."""

    verdict: str  # "summable" | "divergent-at-n_max"
    partial_sums: list[tuple[int, float]]
    heuristic: bool = True
    details: dict = field(default_factory=dict)


def divergence_test(model: BirthDeathModel, n_max: int) -> DivergenceReport:
    """Report partial sums of a(n) at geometric checkpoints and a ratio-test
    verdict on whether the series can converge.

    No finite computation proves summability; the verdict is labelled
    heuristic and only the partial-sum evidence should be asserted.
    """
    checkpoints = []
    total = 0.0
    cp = 2
    a_vals = np.empty(n_max)
    for n in range(1, n_max + 1):
        a_vals[n - 1] = model.a(n)
        total += a_vals[n - 1]
        if n == cp or n == n_max:
            checkpoints.append((n, total))
            cp *= 2
    window = a_vals[max(0, n_max - max(10, n_max // 4)):]
    ratios = window[1:] / window[:-1]
    # ratio test on the tail window: strict contraction reads as summable
    r_max = float(ratios.max()) if ratios.size else math.nan
    summable = ratios.size > 0 and r_max < 1.0 - 1e-6
    projected_tail = window[-1] * r_max / (1.0 - r_max) if summable else math.inf
    return DivergenceReport(
        verdict="summable" if summable else "divergent-at-n_max",
        partial_sums=checkpoints,
        details={"max_tail_ratio": r_max, "last_term": float(window[-1]),
                 "projected_tail": projected_tail},
    )


@dataclass
class GrowthReport(ViolationReport):
    """Growth-premise check result; ``holds_from`` is the smallest index from
    which the tail inequality held through the end of the scan."""

    holds_from: int | None = None


def check_growth_conditions(
    model: BirthDeathModel,
    g_power: float,
    decay_rate: float,
    decay_power: float,
    k: int,
    n_max: int = 200,
    tol: float = 1e-9,
) -> GrowthReport:
    """Check the two uniform-ergodicity premises numerically:

    * g(t) >= t^g_power on every realized down-ratio t >= 1 in [k, n_max];
    * pi(n)/pi(n+1) >= exp(decay_rate * decay_power * n^(decay_power - 1))
      for n in [k, n_max].
    """
    if decay_power <= 1.0 or g_power <= 0.0 or decay_rate <= 0.0:
        raise ValueError("need decay_power > 1 and positive g_power, decay_rate")
    report = GrowthReport(check=f"growth[{model.g.name}]")
    first_ok = None
    for n in range(max(k, 1), n_max + 1):
        x = model.target.log_mass(n - 1) - model.target.log_mass(n)  # log down-ratio
        if x >= 0.0 and model.g.log_eval(x) < g_power * x - tol:
            report.add(float(n), f"g(t) < t^{g_power} at log t = {x:.6g}")
        gap = model.target.log_mass(n) - model.target.log_mass(n + 1)
        needed = decay_rate * decay_power * float(n) ** (decay_power - 1.0)
        if gap < needed - tol:
            first_ok = None
            report.add(float(n), f"log pi(n)/pi(n+1) = {gap:.6g} < {needed:.6g}")
        elif first_ok is None:
            first_ok = n
    report.violations.sort()
    report.holds_from = first_ok
    return report


@dataclass(frozen=True)
class HittingSample:
    mean: float
    se: float
    n_replicas: int


def simulate_hitting(
    model: BirthDeathModel,
    N: int,
    k: int,
    n_replicas: int,
    master_seed: int,
    max_events: int = 10_000_000,
) -> HittingSample:
    """Monte Carlo counterpart of :func:`expected_hitting`: replicas started
    at N, stopped on first entry to k; returns mean and standard error."""
    if not 0 <= k < N:
        raise ValueError("need 0 <= k < N")
    lam_cache: dict[int, tuple[float, float]] = {}

    def tables(n: int) -> tuple[float, float]:
        entry = lam_cache.get(n)
        if entry is None:
            entry = (model.lam(n), model.p(n))
            lam_cache[n] = entry
        return entry

    samples = np.empty(n_replicas)
    for r in range(n_replicas):
        uniforms = _BlockUniforms(SeededStream(master_seed, r).generator())
        n = N
        clock = 0.0
        events = 0
        while n != k:
            lam_n, p_n = tables(n)
            clock += uniforms.exponential(lam_n)
            n = n + 1 if uniforms.next() < p_n else n - 1
            events += 1
            if events >= max_events:
                raise ExplosionGuard(f"replica {r}: event cap {max_events} hit")
        samples[r] = clock
    return HittingSample(
        mean=float(samples.mean()),
        se=float(samples.std(ddof=1) / math.sqrt(n_replicas)),
        n_replicas=n_replicas,
    )
