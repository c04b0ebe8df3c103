"""Targets, kernels and the ratio oracle."""

import math

import numpy as np
import pytest

from lbjump import models
from lbjump.errors import (
    ModelValidation,
    OutOfSupport,
    UncountableSupport,
    ZeroBaseProbability,
)

SWAP2 = np.array([[0.0, 1.0], [1.0, 0.0]])


class TestValidation:
    def test_finite_target(self):
        with pytest.raises(ModelValidation):
            models.FiniteTarget(np.array([0.5, 0.6]))
        with pytest.raises(ModelValidation):
            models.FiniteTarget(np.array([1.5, -0.5]))

    def test_finite_kernel_rows(self):
        with pytest.raises(ModelValidation):
            models.FiniteKernel(np.array([[0.5, 0.4], [1.0, 0.0]]))

    def test_mutual_support_required(self):
        # gamma(0,1) > 0 but gamma(1,0) = 0 makes the ratio undefined on a
        # travelled pair; rejected when the oracle is built
        P = np.array([[0.5, 0.5], [0.0, 1.0]])
        with pytest.raises(ModelValidation):
            models.RatioOracle(models.FiniteTarget(np.array([0.5, 0.5])), models.FiniteKernel(P))

    def test_pairing_rules(self):
        with pytest.raises(ModelValidation):
            models.RatioOracle(models.FiniteTarget(np.array([1.0])), models.LatticeWalk())
        with pytest.raises(ModelValidation):
            models.RatioOracle(models.exp_power_target(1.0, 1.0), models.GaussianWalk(1.0))

    def test_exp_power_parameters(self):
        with pytest.raises(ModelValidation):
            models.exp_power_target(-1.0, 1.0)


class TestLogRatio:
    def test_uniform_two_state(self):
        oracle = models.RatioOracle(
            models.FiniteTarget(np.array([0.5, 0.5])), models.FiniteKernel(SWAP2)
        )
        assert oracle.log_ratio(0, 1) == 0.0

    def test_geometric_lattice(self):
        oracle = models.RatioOracle(models.exp_power_target(1.0, 1.0), models.LatticeWalk())
        assert oracle.log_ratio(3, 4) == pytest.approx(-1.0, abs=1e-15)

    def test_asymmetric_finite_example(self):
        # pi = (0.2, 0.8) with the swap proposal: t(0,1) = 0.8/0.2 = 4
        oracle = models.RatioOracle(
            models.FiniteTarget(np.array([0.2, 0.8])), models.FiniteKernel(SWAP2)
        )
        assert oracle.log_ratio(0, 1) == pytest.approx(math.log(4.0), abs=1e-14)

    def test_zero_base_probability(self):
        oracle = models.RatioOracle(
            models.FiniteTarget(np.array([0.5, 0.5])), models.FiniteKernel(SWAP2)
        )
        with pytest.raises(ZeroBaseProbability):
            oracle.log_ratio(0, 0)

    def test_out_of_support(self):
        oracle = models.RatioOracle(models.exp_power_target(1.0, 1.0), models.LatticeWalk())
        with pytest.raises(OutOfSupport):
            oracle.log_ratio(0, -1)
        with pytest.raises(OutOfSupport):
            oracle.log_ratio(-2, -1)

    def test_log_weight_maps_boundary_to_minus_inf(self):
        from lbjump.balancing import get

        oracle = models.RatioOracle(models.exp_power_target(1.0, 1.0), models.LatticeWalk())
        assert oracle.log_weight(get("sqrt"), 0, -1) == -math.inf

    def test_antisymmetry_sweeps(self):
        rng = np.random.default_rng(7)
        # finite instance
        pi = rng.dirichlet(np.ones(8))
        A = rng.random((8, 8))
        np.fill_diagonal(A, 0.0)
        A /= A.sum(axis=1, keepdims=True)
        S = 0.5 * (A + A.T)
        S /= S.sum(axis=1, keepdims=True)
        fin = models.RatioOracle(models.FiniteTarget(pi), models.FiniteKernel(S))
        for _ in range(10_000):
            i, j = rng.integers(0, 8, size=2)
            if i == j:
                continue
            assert abs(fin.log_ratio(i, j) + fin.log_ratio(j, i)) <= 1e-12
        # lattice instance
        lat = models.RatioOracle(models.exp_power_target(1.0, 1.5), models.LatticeWalk())
        for _ in range(10_000):
            n = int(rng.integers(1, 60))
            m = n + 1 if rng.random() < 0.5 else n - 1
            assert abs(lat.log_ratio(n, m) + lat.log_ratio(m, n)) <= 1e-12
        # continuous instance
        con = models.RatioOracle(models.std_normal_target(2), models.GaussianWalk(0.7, 2))
        for _ in range(10_000):
            x, y = rng.standard_normal(2), rng.standard_normal(2)
            assert abs(con.log_ratio(x, y) + con.log_ratio(y, x)) <= 1e-12

    def test_symmetric_kernel_equals_mass_difference(self):
        # second code path: symmetric finite proposal reduces to the mass ratio
        pi = np.array([0.1, 0.2, 0.3, 0.4])
        sym = np.full((4, 4), 1.0 / 3.0)
        np.fill_diagonal(sym, 0.0)
        oracle = models.RatioOracle(models.FiniteTarget(pi), models.FiniteKernel(sym))
        for i in range(4):
            for j in range(4):
                if i != j:
                    expected = math.log(pi[j]) - math.log(pi[i])
                    assert oracle.log_ratio(i, j) == pytest.approx(expected, abs=1e-14)


class TestNeighborhood:
    def test_lattice_boundary_kept_raw(self):
        # the out-of-support left proposal is returned as-is: weight handling
        # happens downstream through g(0) = 0
        assert models.neighborhood(models.LatticeWalk(1.0), 0) == [(-1, 0.5), (1, 0.5)]

    def test_lattice_fractional_step(self):
        got = models.neighborhood(models.LatticeWalk(0.5), 2.0)
        assert got == [(1.5, 0.5), (2.5, 0.5)]

    def test_finite_row_support(self):
        kern = models.FiniteKernel(SWAP2)
        assert models.neighborhood(kern, 1) == [(0, 1.0)]

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(3)
        A = rng.random((6, 6))
        A /= A.sum(axis=1, keepdims=True)
        kern = models.FiniteKernel(A)
        for x in range(6):
            total = sum(p for _, p in models.neighborhood(kern, x))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_has_no_enumeration(self):
        with pytest.raises(UncountableSupport):
            models.neighborhood(models.GaussianWalk(1.0), np.zeros(1))


class TestSampleBase:
    def test_lattice_frequencies(self):
        rng = np.random.default_rng(11)
        kern = models.LatticeWalk(1.0)
        draws = np.array([models.sample_base(kern, 5, rng) for _ in range(100_000)])
        assert set(np.unique(draws)) == {4, 6}
        freq = np.mean(draws == 4)
        assert abs(freq - 0.5) <= 3.0 * math.sqrt(0.25 / draws.size)

    def test_deterministic_row(self):
        rng = np.random.default_rng(1)
        kern = models.FiniteKernel(np.array([[0.0, 1.0, 0.0], [1.0, 0, 0], [1, 0, 0]]))
        assert all(models.sample_base(kern, 0, rng) == 1 for _ in range(50))

    def test_gaussian_moments(self):
        rng = np.random.default_rng(5)
        kern = models.GaussianWalk(1.0, 1)
        draws = np.array([models.sample_base(kern, np.zeros(1), rng)[0] for _ in range(100_000)])
        assert abs(draws.mean()) <= 3.0 / math.sqrt(draws.size)


class TestDescriptors:
    def test_round_trips(self):
        target = models.FiniteTarget(np.array([0.2, 0.8]))
        again = models.target_from_descriptor(target.descriptor())
        np.testing.assert_allclose(again.pi, target.pi)

        lat = models.exp_power_target(1.0, 1.5)
        again = models.target_from_descriptor(lat.descriptor())
        assert again.log_mass(7) == lat.log_mass(7)

        for kern in (models.FiniteKernel(SWAP2), models.LatticeWalk(0.5), models.GaussianWalk(0.3, 2)):
            again = models.kernel_from_descriptor(kern.descriptor())
            assert type(again) is type(kern)

    def test_oracle_from_descriptor(self):
        oracle = models.oracle_from_descriptor(
            {
                "target": {"kind": "lattice", "family": "exp_power", "a": 1.0, "beta": 1.0},
                "kernel": {"kind": "lattice_walk", "h": 1.0},
            }
        )
        assert oracle.log_ratio(3, 4) == pytest.approx(-1.0)

    def test_unknown_kinds_rejected(self):
        with pytest.raises(ModelValidation):
            models.target_from_descriptor({"kind": "weird"})
        with pytest.raises(ModelValidation):
            models.kernel_from_descriptor({"kind": "weird"})
        with pytest.raises(ModelValidation):
            models.target_from_descriptor({"kind": "lattice", "family": "weird"})
