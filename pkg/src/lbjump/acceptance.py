"""The acceptance suite: every quantitative claim the package stands behind,
runnable as one battery.

Each criterion is a function returning a :class:`CriterionResult`; the CLI
``accept`` subcommand and the pytest acceptance module both drive
:func:`run_all`.  Tolerances and seeds are pinned here and in
``configs/acceptance.json`` — statistical criteria run on frozen seeds whose
margins were fixed by one committed calibration run.
"""

from __future__ import annotations

import importlib.resources
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats

from . import balancing, diffusion, estimators, hitting, nonrev, spectral
from .jumprate import rate_exact, z_lambda_exact
from .models import (
    FiniteKernel,
    FiniteTarget,
    LatticeWalk,
    RatioOracle,
    exp_power_target,
    kernel_from_descriptor,
    std_normal_target,
    target_from_descriptor,
)
from .simulate import JumpTrajectory, SeededStream, run_exact, simulate_skeleton

__all__ = ["CriterionResult", "load_config", "run_all", "CRITERIA"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    runtime_s: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} — {self.name} ({self.runtime_s:.1f}s)"


def load_config() -> dict:
    with importlib.resources.files("lbjump.configs").joinpath("acceptance.json").open() as fh:
        return json.load(fh)


def _models(cfg) -> dict:
    out = {}
    for name, d in cfg["models"].items():
        out[name] = (
            target_from_descriptor(d["target"]),
            kernel_from_descriptor(d["kernel"]),
        )
    return out


def _function_bank(m: int):
    """Five fixed test functions on {0..m-1}: indicator, identity, square,
    capped identity, parity.  None is constant on any m >= 2."""
    return [
        ("indicator0", lambda s: 1.0 if s == 0 else 0.0),
        ("identity", lambda s: float(s)),
        ("square", lambda s: float(s) ** 2),
        ("min3", lambda s: float(min(s, 3))),
        ("parity", lambda s: -1.0 if s % 2 else 1.0),
    ]


def _bounded_catalog():
    return [g for g in balancing.builtin_catalog() if g.sup_bound is not None]


# ---------------------------------------------------------------------------


def criterion_1(cfg) -> CriterionResult:
    """Balancing identity on the standard grid for every catalog entry."""
    t0 = time.perf_counter()
    grid = balancing.standard_grid()
    worst = 0.0
    ok = True
    for g in balancing.builtin_catalog():
        rep = balancing.check_balancing(g, grid, tol=1e-12)
        ok &= rep.ok
        for t in grid:
            gt = g(t)
            worst = max(worst, abs(gt - t * g(1.0 / t)) / max(1.0, gt))
    return CriterionResult(1, "balancing identity on the log grid", ok,
                           time.perf_counter() - t0, {"worst_scaled_residual": worst})


def criterion_2(cfg) -> CriterionResult:
    """Sandwich bounds, plus the sup-scaled bound for bounded entries."""
    t0 = time.perf_counter()
    grid = balancing.standard_grid()
    ok = True
    for g in balancing.builtin_catalog():
        if g.is_nondecreasing:
            ok &= balancing.check_bounds(g, grid).ok
        if g.sup_bound is not None:
            ok &= balancing.check_bounds(g, grid, require_sup=True).ok
    return CriterionResult(2, "min/max sandwich and sup*min bound", ok,
                           time.perf_counter() - t0)


def criterion_3(cfg) -> CriterionResult:
    """Elementwise pi-reversibility of 100 random generators per catalog g."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg["master_seeds"]["reversibility"])
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(2, 21))
        target, kernel = spectral.random_reversible_instance(m, rng)
        for g in balancing.builtin_catalog():
            gen = spectral.build_generator(target, kernel, g)
            flux = gen.pi[:, None] * gen.L
            worst = max(worst, float(np.max(np.abs(flux - flux.T))))
    return CriterionResult(3, "reversibility of the weighted jump measure",
                           worst <= 1e-12, time.perf_counter() - t0,
                           {"worst_residual": worst})


def criterion_4(cfg) -> CriterionResult:
    """Z_lambda <= 2 on finite instances and truncated lattice families."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg["master_seeds"]["z_lambda"])
    cap = 2.0 + 1e-12
    worst = -math.inf
    ok = True
    for _ in range(30):
        m = int(rng.integers(2, 15))
        target, kernel = spectral.random_reversible_instance(m, rng)
        for g in balancing.builtin_catalog():
            z = z_lambda_exact(target, kernel, g)
            worst = max(worst, z)
            ok &= z <= cap
    walk = LatticeWalk(1.0)
    for a, beta in ((1.0, 1.0), (1.0, 1.5), (1.0, 2.0), (0.5, 1.2)):
        target = exp_power_target(a, beta)
        for g in balancing.builtin_catalog():
            z = z_lambda_exact(target, walk, g)
            worst = max(worst, z)
            ok &= z <= cap
    return CriterionResult(4, "Z_lambda never exceeds 2", ok,
                           time.perf_counter() - t0, {"max_z": worst})


def criterion_5(cfg) -> CriterionResult:
    """Gap sandwich on 50 random instances for each bounded catalog g."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg["master_seeds"]["gap_sandwich"])
    ok = True
    for _ in range(50):
        m = int(rng.integers(3, 13))
        target, kernel = spectral.random_reversible_instance(m, rng)
        for g in _bounded_catalog():
            ok &= spectral.gap_sandwich_check(target, kernel, g, tol=1e-9).ok
    return CriterionResult(5, "gap sandwich vs accept-reject chain", ok,
                           time.perf_counter() - t0)


def criterion_6(cfg) -> CriterionResult:
    """Gap comparison for (max,min,1), (sqrt,min,1) and (g,g,1)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg["master_seeds"]["comparison"])
    pairs = [
        (balancing.get("max"), balancing.get("min"), 1.0),
        (balancing.get("sqrt"), balancing.get("min"), 1.0),
        (balancing.get("barker"), balancing.get("barker"), 1.0),
    ]
    ok = True
    for _ in range(50):
        m = int(rng.integers(3, 13))
        target, kernel = spectral.random_reversible_instance(m, rng)
        for g1, g2, omega in pairs:
            ok &= spectral.comparison_check(target, kernel, g1, g2, omega, tol=1e-9).ok
    return CriterionResult(6, "gap comparison across balancing functions", ok,
                           time.perf_counter() - t0)


def criterion_7(cfg) -> CriterionResult:
    """Exponential TV bound on random instances, equality on the 2-state case."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg["master_seeds"]["tv_decay"])
    times = cfg["tv_times"]
    ok = True
    for _ in range(20):
        m = int(rng.integers(3, 9))
        target, kernel = spectral.random_reversible_instance(m, rng)
        gen = spectral.build_generator(target, kernel, balancing.get("barker"))
        mu0 = np.zeros(m)
        mu0[int(rng.integers(m))] = 1.0
        ok &= spectral.tv_decay_check(gen, mu0, times, tol=1e-9).ok
    # analytic equality on the uniform 2-state chain from a point start
    models = _models(cfg)
    gen2 = spectral.build_generator(*models["two_state"], balancing.get("min"))
    equality_gap = 0.0
    for t in times:
        tv = spectral.tv_distance(
            spectral.evolve_distribution(gen2, [1.0, 0.0], t), gen2.pi
        )
        equality_gap = max(equality_gap, abs(tv - 0.5 * math.exp(-2.0 * t)))
    ok &= equality_gap <= 1e-12
    return CriterionResult(7, "TV decay under the spectral-gap bound", ok,
                           time.perf_counter() - t0, {"two_state_equality_gap": equality_gap})


def criterion_8(cfg) -> CriterionResult:
    """Ergodic averages within 3 batch-means SEs at 1e6 events."""
    t0 = time.perf_counter()
    n_events = int(cfg["ergodic"]["n_events"])
    seed = cfg["master_seeds"]["ergodic"]
    models = _models(cfg)
    failures = []
    replica = 0
    for model_name, (target, kernel) in models.items():
        oracle = RatioOracle(target, kernel)
        pi = target.pi
        for g in balancing.builtin_catalog():
            traj = run_exact(0, oracle, g, horizon=math.inf, rng=SeededStream(seed, replica),
                             max_events=n_events)
            replica += 1
            for fname, f in _function_bank(target.size):
                res = estimators.estimate_mc(traj, f)
                truth = float(sum(pi[s] * f(s) for s in range(pi.size)))
                if abs(res.estimate - truth) > 3.0 * res.se:
                    failures.append(
                        f"{model_name}/{g.name}/{fname}: |{res.estimate:.5f} - {truth:.5f}| > 3*{res.se:.2e}"
                    )
    return CriterionResult(8, "ergodic averages at 1e6 events", not failures,
                           time.perf_counter() - t0, {"failures": failures})


def _hitting_configs():
    """20 bracket configurations: decreasing lattice families x g x (N, k)."""
    gs = {g.name: g for g in balancing.builtin_catalog()}
    fams = {
        "e15": exp_power_target(1.0, 1.5),
        "e10": exp_power_target(1.0, 1.0),
        "e20": exp_power_target(1.0, 2.0),
        "h12": exp_power_target(2.0, 1.2),
    }
    combos = []
    for fam_name, fam in fams.items():
        for g_name in ("min", "barker", "sqrt", "max", "power(0.5)"):
            combos.append((fam_name, fam, gs[g_name]))
    layouts = [(10, 2), (15, 4), (12, 0), (20, 5)]
    return [
        (fam_name, fam, g, *layouts[i % len(layouts)])
        for i, (fam_name, fam, g) in enumerate(combos)
    ]


def criterion_9(cfg) -> CriterionResult:
    """Hitting brackets vs the dense linear solve and Monte Carlo."""
    t0 = time.perf_counter()
    n_rep = int(cfg["hitting"]["n_replicas"])
    seed = cfg["master_seeds"]["hitting_mc"]
    failures = []
    for idx, (fam_name, fam, g, N, k) in enumerate(_hitting_configs()):
        bd = hitting.BirthDeathModel(fam, g)
        est = hitting.expected_hitting(bd, N=N, k=k)
        lin = hitting.linear_system_hitting(bd, N=N, k=k, n_max=est.n_max)
        if not est.lower - (est.width + 1e-9) <= lin <= est.upper + (est.width + 1e-9):
            failures.append(f"{fam_name}/{g.name}: linear solve {lin!r} outside bracket")
        samp = hitting.simulate_hitting(bd, N=N, k=k, n_replicas=n_rep,
                                        master_seed=seed + idx)
        dist = max(est.lower - samp.mean, samp.mean - est.upper, 0.0)
        if dist > 3.0 * samp.se:
            failures.append(
                f"{fam_name}/{g.name}: MC mean {samp.mean:.4f}+-{samp.se:.4f} "
                f"vs bracket [{est.lower:.4f}, {est.upper:.4f}]"
            )
    return CriterionResult(9, "hitting-time recursion vs oracles", not failures,
                           time.perf_counter() - t0, {"failures": failures})


def criterion_10(cfg) -> CriterionResult:
    """Uniform-ergodicity signature: tight, decelerating brackets for
    unbounded g versus linearly growing lower bounds for bounded g."""
    t0 = time.perf_counter()
    target = exp_power_target(1.0, 1.5)
    k = 2
    Ns = (10, 20, 40)
    details: dict = {}
    bd_sqrt = hitting.BirthDeathModel(target, balancing.get("sqrt"))
    mids = []
    ok = True
    for N in Ns:
        est = hitting.expected_hitting(bd_sqrt, N=N, k=k)
        mids.append(est.midpoint)
        ok &= est.width <= 0.05 * est.midpoint  # bracket tight at each N
    details["midpoints"] = mids
    increments = np.diff(mids)
    ok &= bool(np.all(increments > 0.0) and increments[-1] < increments[0])
    details["increments_decelerate"] = [float(v) for v in increments]

    bd_min = hitting.BirthDeathModel(target, balancing.get("min"))
    lam_bar = 1.0  # sup of min(1, t)
    sums = []
    for N in Ns:
        s = sum(bd_min.a(n + 1) for n in range(k, N))
        sums.append(s)
        ok &= s > 2.0 * (N - k - 1) / lam_bar
    # exact linear growth: increments proportional to Delta N
    ok &= abs((sums[2] - sums[1]) - 2.0 * (sums[1] - sums[0])) <= 1e-9
    details["bounded_g_lower_bounds"] = sums
    return CriterionResult(10, "uniform-ergodicity signature", ok,
                           time.perf_counter() - t0, details)


def criterion_11(cfg) -> CriterionResult:
    """Diffusion limit: KS to the Langevin reference strictly decreasing and
    below the frozen threshold at the smallest sigma."""
    t0 = time.perf_counter()
    dcfg = cfg["diffusion"]
    exp = diffusion.DiffusionExperiment(
        target=std_normal_target(1),
        g=balancing.get("barker"),
        sigmas=tuple(dcfg["sigmas"]),
        horizon=float(dcfg["horizon"]),
        n_samples=int(dcfg["n_samples"]),
        x0=np.zeros(1),
    )
    table = diffusion.convergence_experiment(exp, master_seed=int(dcfg["master_seed"]))
    ks = table.ks_values
    ok = table.strictly_decreasing and ks[-1] < float(dcfg["ks_final_threshold"])
    return CriterionResult(11, "diffusion limit marginals", ok,
                           time.perf_counter() - t0,
                           {"ks_vs_langevin": ks,
                            "threshold": dcfg["ks_final_threshold"]})


def criterion_12(cfg) -> CriterionResult:
    """Estimator consistency at the 1e6-event budget plus the paired
    variance ordering over 50 seeds."""
    t0 = time.perf_counter()
    ecfg = cfg["estimators"]
    models = _models(cfg)
    target, kernel = models["five_state"]
    oracle = RatioOracle(target, kernel)
    g = balancing.get("sqrt")
    f = lambda s: float(s)  # noqa: E731
    budget = int(ecfg["budget_steps"])
    seed = cfg["master_seeds"]["estimators"]

    root = np.random.SeedSequence(entropy=seed)
    r1, r2 = (np.random.default_rng(c) for c in root.spawn(2))
    states, lams = simulate_skeleton(0, oracle, g, budget, r1)
    taus = r1.exponential(1.0 / lams)
    traj = JumpTrajectory(initial_state=states[0], states=states[1:],
                          times=np.cumsum(taus)[:-1], horizon=float(taus.sum()))
    res = {
        "MC": estimators.estimate_mc(traj, f),
        "IS": estimators.estimate_is(states, lams, f),
        "MH": estimators.estimate_mh(0, oracle, g, budget, r2, f),
    }
    failures = []
    kinds = list(res)
    for i in range(len(kinds)):
        for j in range(i + 1, len(kinds)):
            a, b = res[kinds[i]], res[kinds[j]]
            gap = abs(a.estimate - b.estimate)
            combined = math.hypot(a.se, b.se)
            if gap > 3.0 * combined:
                failures.append(f"{kinds[i]} vs {kinds[j]}: gap {gap:.2e} > 3*{combined:.2e}")

    faceoff = estimators.variance_faceoff(
        oracle, g, f, n_steps=int(ecfg["faceoff_steps"]),
        n_seeds=int(ecfg["faceoff_seeds"]), master_seed=cfg["master_seeds"]["faceoff"],
    )
    if not faceoff.ordering_confirmed(float(ecfg["level"])):
        failures.append(f"IS<=MC ordering not confirmed: p = {faceoff.p_value_is_beats_mc:.4f}")
    return CriterionResult(
        12, "estimator consistency and IS<=MC ordering", not failures,
        time.perf_counter() - t0,
        {"estimates": {k: (v.estimate, v.se) for k, v in res.items()},
         "p_value": faceoff.p_value_is_beats_mc,
         "variances": faceoff.variances,
         "failures": failures},
    )


def criterion_13(cfg) -> CriterionResult:
    """Skew balance + invariance on 50 random lifted instances, and the
    Q-identity degeneration matching the reversible kernel."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg["master_seeds"]["nonrev"])
    gs = [balancing.get(n) for n in ("min", "barker", "sqrt")]
    worst_skew = worst_inv = 0.0
    ok = True
    for _ in range(50):
        chain = nonrev.random_lifted_instance(rng)
        for g in gs:
            kern = nonrev.build_skew_kernel(chain, g)
            rep = nonrev.certify_skew_balance(kern, g, tol=1e-12)
            ok &= rep.ok
            worst_skew = max(worst_skew, rep.values["skew_residual"])
            worst_inv = max(worst_inv, rep.values["invariance_residual"])
    # Q = identity degeneration reproduces the reversible jump weights
    worst_degen = 0.0
    for _ in range(5):
        m = int(rng.integers(3, 8))
        target, kernel = spectral.random_reversible_instance(m, rng)
        sym = 0.5 * (kernel.matrix + kernel.matrix.T)
        sym /= sym.sum(axis=1, keepdims=True)
        kernel = FiniteKernel(sym)
        chain = nonrev.identity_lift(target, kernel)
        oracle = RatioOracle(target, kernel)
        for g in gs:
            J = nonrev.build_skew_kernel(chain, g).J
            for i in range(m):
                rr = rate_exact(i, oracle, g)
                for y, w in zip(rr.neighbors, rr.weights):
                    worst_degen = max(worst_degen, abs(J[i, int(y)] - w))
    ok &= worst_degen <= 1e-14
    return CriterionResult(13, "non-reversible certification", ok,
                           time.perf_counter() - t0,
                           {"worst_skew": worst_skew, "worst_invariance": worst_inv,
                            "worst_degeneration": worst_degen})


CRITERIA = [
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
    criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
    criterion_11, criterion_12, criterion_13,
]


def run_all(cfg: dict | None = None, echo=print) -> list[CriterionResult]:
    """Run every acceptance criterion, printing one pass/fail line each."""
    cfg = cfg or load_config()
    results = []
    for fn in CRITERIA:
        result = fn(cfg)
        results.append(result)
        if echo is not None:
            echo(result.line())
    return results
