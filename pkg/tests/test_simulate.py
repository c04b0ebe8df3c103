"""Trajectory simulators: exact, thinned, replicated; time averages."""

import math

import numpy as np
import pytest
from scipy import stats

from lbjump import balancing, estimators, jumprate, models, simulate
from lbjump.errors import EmptyTrajectory, ExplosionGuard, MissingSupBound, ZeroRate

GMIN = balancing.get("min")
GBARKER = balancing.get("barker")
GSQRT = balancing.get("sqrt")


def uniform_two_state():
    return models.RatioOracle(
        models.FiniteTarget(np.array([0.5, 0.5])),
        models.FiniteKernel(np.array([[0.0, 1.0], [1.0, 0.0]])),
    )


def three_state():
    pi = np.array([0.2, 0.3, 0.5])
    P = np.full((3, 3), 0.5)
    np.fill_diagonal(P, 0.0)
    return models.RatioOracle(models.FiniteTarget(pi), models.FiniteKernel(P))


class TestRunExact:
    def test_trajectory_structure(self):
        traj = simulate.run_exact(0, uniform_two_state(), GBARKER, 25.0,
                                  simulate.SeededStream(1))
        traj.validate()
        assert traj.event_count == len(traj.states)
        hold = traj.holding_times()
        assert np.all(hold >= 0.0) and np.all(hold[:-1] > 0.0)
        assert hold.sum() == pytest.approx(traj.horizon, rel=1e-12)

    def test_uniform_holding_times_are_unit_exponential(self):
        traj = simulate.run_exact(0, uniform_two_state(), GMIN, math.inf,
                                  simulate.SeededStream(7), max_events=10_000)
        hold = traj.holding_times()[:-1]
        assert abs(hold.mean() - 1.0) <= 3.0 / math.sqrt(hold.size)

    def test_pinned_state_exponential_ks(self):
        # completed holding times at one state follow Exp(lambda(x))
        oracle = three_state()
        x = 2
        lam = jumprate.rate_exact(x, oracle, GSQRT).lam
        traj = simulate.run_exact(0, oracle, GSQRT, math.inf,
                                  simulate.SeededStream(2024), max_events=20_000)
        samples = simulate.holding_times_at(traj, x)
        assert samples.size > 3_000
        pvalue = stats.kstest(samples, "expon", args=(0.0, 1.0 / lam)).pvalue
        assert pvalue > 0.01

    def test_degenerate_model_raises(self):
        target = models.FiniteTarget(np.array([1.0]))
        kernel = models.FiniteKernel(np.array([[1.0]]))
        oracle = models.RatioOracle(target, kernel)
        with pytest.raises(ZeroRate):
            simulate.run_exact(0, oracle, GMIN, 10.0, simulate.SeededStream(0))

    def test_event_cap_and_strict_mode(self):
        oracle = uniform_two_state()
        traj = simulate.run_exact(0, oracle, GMIN, math.inf,
                                  simulate.SeededStream(3), max_events=10)
        assert traj.truncated and traj.event_count == 10
        assert traj.horizon == traj.times[-1]
        with pytest.raises(ExplosionGuard):
            simulate.run_exact(0, oracle, GMIN, math.inf,
                               simulate.SeededStream(3), max_events=10, strict=True)

    def test_lattice_occupation_matches_target(self):
        # pi(n) ~ exp(-n^2) from a start high in the tail
        target = models.exp_power_target(1.0, 2.0)
        oracle = models.RatioOracle(target, models.LatticeWalk())
        traj = simulate.run_exact(10, oracle, GSQRT, 20_000.0, simulate.SeededStream(5))
        occ = simulate.occupation_measure(traj)
        log_mass = np.array([target.log_mass(n) for n in range(8)])
        pi = np.exp(log_mass)
        pi /= pi.sum()  # mass beyond 7 is ~1e-25
        tv = 0.5 * sum(abs(occ.get(n, 0.0) - pi[n]) for n in range(7))
        assert tv <= 0.05


class TestReproducibility:
    def test_same_stream_is_bitwise_identical(self):
        oracle = three_state()
        a = simulate.run_exact(0, oracle, GBARKER, 100.0, simulate.SeededStream(11, 4))
        b = simulate.run_exact(0, oracle, GBARKER, 100.0, simulate.SeededStream(11, 4))
        assert a.states == b.states
        assert np.array_equal(a.times, b.times)

    def test_replicas_reproducible_and_distinct(self):
        oracle = three_state()
        first = simulate.run_replicas(0, oracle, GBARKER, 50.0, 4, master_seed=99)
        second = simulate.run_replicas(0, oracle, GBARKER, 50.0, 4, master_seed=99)
        for a, b in zip(first, second):
            assert np.array_equal(a.times, b.times) and a.states == b.states
        assert first[0].times[0] != first[1].times[0]

    def test_replicas_edge_cases(self):
        oracle = three_state()
        assert simulate.run_replicas(0, oracle, GBARKER, 1.0, 0, master_seed=1) == []
        threaded = simulate.run_replicas(0, oracle, GBARKER, 20.0, 4, master_seed=5,
                                         threads=2)
        serial = simulate.run_replicas(0, oracle, GBARKER, 20.0, 4, master_seed=5)
        for a, b in zip(threaded, serial):
            assert np.array_equal(a.times, b.times)

    def test_replica_errors_are_tagged(self):
        target = models.FiniteTarget(np.array([1.0]))
        kernel = models.FiniteKernel(np.array([[1.0]]))
        oracle = models.RatioOracle(target, kernel)
        with pytest.raises(ZeroRate, match="replica 0"):
            simulate.run_replicas(0, oracle, GMIN, 1.0, 2, master_seed=0)


class TestTimeAverage:
    def test_constant_function_is_exact(self):
        traj = simulate.run_exact(0, uniform_two_state(), GMIN, 30.0,
                                  simulate.SeededStream(1))
        assert simulate.time_average(traj, lambda s: 4.25) == 4.25

    def test_uniform_indicator_is_half(self):
        traj = simulate.run_exact(0, uniform_two_state(), GMIN, math.inf,
                                  simulate.SeededStream(8), max_events=40_000)
        res = estimators.estimate_mc(traj, lambda s: 1.0 if s == 0 else 0.0)
        assert abs(res.estimate - 0.5) <= 3.0 * res.se

    def test_three_state_identity_expectation(self):
        oracle = three_state()
        truth = float(np.dot(oracle.target.pi, np.arange(3)))
        traj = simulate.run_exact(0, oracle, GSQRT, math.inf,
                                  simulate.SeededStream(78), max_events=120_000)
        res = estimators.estimate_mc(traj, float)
        assert abs(res.estimate - truth) <= 3.0 * res.se

    def test_jump_count_matches_rate_normalizer(self):
        # from a stationary start, expected events per unit time = Z_lambda
        oracle = three_state()
        z = jumprate.z_lambda_exact(oracle.target, oracle.kernel, GSQRT)
        rng = np.random.default_rng(4)
        horizon = 40.0
        counts = []
        for r in range(300):
            x0 = int(rng.choice(3, p=oracle.target.pi))
            traj = simulate.run_exact(x0, oracle, GSQRT, horizon,
                                      simulate.SeededStream(1000, r))
            counts.append(traj.event_count / horizon)
        counts = np.array(counts)
        se = counts.std(ddof=1) / math.sqrt(counts.size)
        assert abs(counts.mean() - z) <= 3.0 * se


class TestThinning:
    def test_requires_trusted_bound(self):
        oracle = models.RatioOracle(models.std_normal_target(1), models.GaussianWalk(0.5))
        with pytest.raises(MissingSupBound):
            simulate.run_thinning(np.zeros(1), oracle, GSQRT, 5.0, simulate.SeededStream(0))

    def test_gaussian_long_run_moments(self):
        oracle = models.RatioOracle(models.std_normal_target(1), models.GaussianWalk(0.5))
        traj = simulate.run_thinning(np.zeros(1), oracle, GBARKER, 4_000.0,
                                     simulate.SeededStream(123))
        xs = np.array([s[0] for s in traj.visited_states()])
        hold = traj.holding_times()
        mean = float(np.dot(hold, xs) / traj.horizon)
        second = float(np.dot(hold, xs**2) / traj.horizon)
        assert abs(mean) <= 0.1
        assert abs(second - 1.0) <= 0.15

    def test_acceptance_fraction_identity(self):
        # jumps/candidates estimates the time average of lambda(Y)/sup g
        sigma = 0.5
        oracle = models.RatioOracle(models.std_normal_target(1), models.GaussianWalk(sigma))
        traj = simulate.run_thinning(np.zeros(1), oracle, GBARKER, 2_000.0,
                                     simulate.SeededStream(55))
        frac = traj.event_count / traj.candidate_count
        assert 0.0 < frac < 1.0

        nodes, weights = np.polynomial.hermite.hermgauss(101)

        def lam(x):
            y = x + math.sqrt(2.0) * sigma * nodes
            vals = np.exp(GBARKER.log_eval_array(-0.5 * y**2 + 0.5 * x**2))
            return float(np.sum(weights * vals) / math.sqrt(math.pi))

        lam_avg = simulate.time_average(traj, lambda s: lam(s[0]))
        assert abs(frac - lam_avg / GBARKER.sup_bound) <= 0.02

    def test_agrees_with_exact_on_discrete(self):
        # both simulators target the same law; occupation measures must agree
        oracle = three_state()
        n_events = 1_000_000
        exact = simulate.run_exact(0, oracle, GMIN, math.inf,
                                   simulate.SeededStream(60), max_events=n_events)
        thinned = simulate.run_thinning(0, oracle, GMIN, math.inf,
                                        simulate.SeededStream(61), max_events=n_events)
        occ_a = simulate.occupation_measure(exact)
        occ_b = simulate.occupation_measure(thinned)
        tv = 0.5 * sum(abs(occ_a.get(s, 0.0) - occ_b.get(s, 0.0)) for s in range(3))
        assert tv <= 0.02
        # and both sit on the target itself
        tv_target = 0.5 * sum(abs(occ_a.get(s, 0.0) - oracle.target.pi[s]) for s in range(3))
        assert tv_target <= 0.02

    def test_candidate_storage_flag(self):
        oracle = three_state()
        traj = simulate.run_thinning(0, oracle, GMIN, 50.0, simulate.SeededStream(9),
                                     store_candidates=True)
        assert traj.candidates is not None
        assert len(traj.candidates) == traj.candidate_count
        default = simulate.run_thinning(0, oracle, GMIN, 50.0, simulate.SeededStream(9))
        assert default.candidates is None


class TestSkeleton:
    def test_skeleton_lengths_and_rates(self):
        oracle = three_state()
        states, lams = simulate.simulate_skeleton(0, oracle, GSQRT, 500,
                                                  simulate.SeededStream(31))
        assert len(states) == 500 and lams.shape == (500,)
        for s, lam in zip(states[:20], lams[:20]):
            assert lam == pytest.approx(jumprate.rate_exact(s, oracle, GSQRT).lam)


class TestCsvExport:
    def test_round_trip_columns(self, tmp_path):
        oracle = three_state()
        trajs = simulate.run_replicas(0, oracle, GMIN, 10.0, 2, master_seed=3)
        path = tmp_path / "out" / "traj.csv"
        simulate.trajectories_to_csv(trajs, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "replica,event_index,time,state"
        assert len(lines) == 1 + sum(t.event_count + 1 for t in trajs)

    def test_vector_states_flattened(self, tmp_path):
        oracle = models.RatioOracle(models.std_normal_target(2), models.GaussianWalk(0.5, 2))
        traj = simulate.run_thinning(np.zeros(2), oracle, GBARKER, 10.0,
                                     simulate.SeededStream(1))
        path = tmp_path / "traj2d.csv"
        simulate.trajectories_to_csv([traj], path)
        assert path.read_text().splitlines()[0] == "replica,event_index,time,state_0,state_1"

    def test_empty_export_rejected(self, tmp_path):
        with pytest.raises(EmptyTrajectory):
            simulate.trajectories_to_csv([], tmp_path / "x.csv")
