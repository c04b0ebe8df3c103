"""Exact jump rates, the rate normalizer and its universal bound."""

import math

import numpy as np
import pytest

from lbjump import balancing, jumprate, models, spectral
from lbjump.errors import MissingSupBound, TruncationNotConverged, ZeroRate

GMIN = balancing.get("min")
GSQRT = balancing.get("sqrt")
GBARKER = balancing.get("barker")


def uniform_two_state():
    return models.RatioOracle(
        models.FiniteTarget(np.array([0.5, 0.5])),
        models.FiniteKernel(np.array([[0.0, 1.0], [1.0, 0.0]])),
    )


class TestRateExact:
    def test_uniform_two_state_rate_is_one(self):
        oracle = uniform_two_state()
        for g in balancing.builtin_catalog():
            assert jumprate.rate_exact(0, oracle, g).lam == pytest.approx(1.0, abs=1e-15)

    def test_geometric_lattice_hand_values(self):
        oracle = models.RatioOracle(models.exp_power_target(1.0, 1.0), models.LatticeWalk())
        rr = jumprate.rate_exact(3, oracle, GSQRT)
        assert rr.lam == pytest.approx(0.5 * (math.exp(-0.5) + math.exp(0.5)), rel=1e-14)
        # at the origin the left proposal carries weight zero
        rr0 = jumprate.rate_exact(0, oracle, GSQRT)
        assert rr0.lam == pytest.approx(0.5 * math.exp(-0.5), rel=1e-14)
        assert rr0.weights[0] == 0.0

    def test_lambda_is_exact_weight_sum(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            target, kernel = spectral.random_reversible_instance(6, rng)
            oracle = models.RatioOracle(target, kernel)
            rr = jumprate.rate_exact(2, oracle, GBARKER)
            assert rr.lam == float(rr.weights.sum())
            assert rr.jump_distribution().sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(rr.weights >= 0.0)

    def test_weighted_measure_reversibility(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            target, kernel = spectral.random_reversible_instance(7, rng)
            oracle = models.RatioOracle(target, kernel)
            for g in balancing.builtin_catalog():
                rates = [jumprate.rate_exact(x, oracle, g) for x in range(7)]
                for x in range(7):
                    for y, w in zip(rates[x].neighbors, rates[x].weights):
                        back = dict(zip(rates[y].neighbors, rates[y].weights))[x]
                        assert abs(target.pi[x] * w - target.pi[y] * back) <= 1e-12

    def test_zero_rate_raises(self):
        target = models.FiniteTarget(np.array([1.0, 0.0]))
        kernel = models.FiniteKernel(np.array([[0.0, 1.0], [1.0, 0.0]]))
        oracle = models.RatioOracle(target, kernel)
        with pytest.raises(ZeroRate):
            jumprate.rate_exact(0, oracle, GMIN)  # only neighbour has zero mass

    def test_overflow_is_an_error(self):
        oracle = models.RatioOracle(models.exp_power_target(1000.0, 2.0), models.LatticeWalk())
        with pytest.raises(OverflowError):
            jumprate.rate_exact(30, oracle, balancing.get("max"))


class TestZLambda:
    def test_uniform_two_state(self):
        assert jumprate.z_lambda_exact(
            models.FiniteTarget(np.array([0.5, 0.5])),
            models.FiniteKernel(np.array([[0.0, 1.0], [1.0, 0.0]])),
            GMIN,
        ) == pytest.approx(1.0, abs=1e-15)

    def test_three_state_against_dense_double_sum(self):
        pi = np.array([0.1, 0.3, 0.6])
        P = np.full((3, 3), 0.5)
        np.fill_diagonal(P, 0.0)
        target, kernel = models.FiniteTarget(pi), models.FiniteKernel(P)
        # independent oracle: brute-force double sum of g(t(x,y)) gamma(x,y) pi(x)
        brute = 0.0
        for x in range(3):
            for y in range(3):
                if x != y:
                    brute += pi[x] * P[x, y] * min(1.0, (pi[y] * P[y, x]) / (pi[x] * P[x, y]))
        assert jumprate.z_lambda_exact(target, kernel, GMIN) == pytest.approx(brute, rel=1e-14)

    def test_never_exceeds_two_for_nondecreasing(self):
        rng = np.random.default_rng(9)
        for _ in range(15):
            m = int(rng.integers(2, 12))
            target, kernel = spectral.random_reversible_instance(m, rng)
            for g in balancing.builtin_catalog():
                assert jumprate.z_lambda_exact(target, kernel, g) <= 2.0 + 1e-12

    def test_lattice_families_truncate_and_stay_below_two(self):
        walk = models.LatticeWalk()
        for a, beta in ((1.0, 1.0), (1.0, 1.5), (0.5, 1.2)):
            target = models.exp_power_target(a, beta)
            for g in balancing.builtin_catalog():
                z = jumprate.z_lambda_exact(target, walk, g)
                assert 0.0 < z <= 2.0 + 1e-12

    def test_truncation_failure_on_flat_tail(self):
        flat = models.LatticeTarget(lambda n: 0.0, support="N", name="flat")
        with pytest.raises(TruncationNotConverged):
            jumprate.lattice_truncation(flat, n_cap=5_000)


class TestRateBound:
    def test_bounded_entries(self):
        assert jumprate.rate_bound(GMIN) == 1.0
        assert jumprate.rate_bound(GBARKER) == 2.0

    def test_unbounded_raises(self):
        with pytest.raises(MissingSupBound):
            jumprate.rate_bound(GSQRT)

    def test_empirical_bound_refused(self):
        user = balancing.from_callable(lambda t: min(1.0, t), "user_min")
        assert user.sup_bound is not None
        with pytest.raises(MissingSupBound):
            jumprate.rate_bound(user)
