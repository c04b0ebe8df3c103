"""Generators, Dirichlet forms, spectral gaps and decay certificates."""

import math

import numpy as np
import pytest
from scipy import optimize

from lbjump import balancing, models, spectral
from lbjump.errors import DimensionMismatch, PremiseViolated, SupportMismatch

GMIN = balancing.get("min")
GBARKER = balancing.get("barker")


def two_state():
    return (
        models.FiniteTarget(np.array([0.5, 0.5])),
        models.FiniteKernel(np.array([[0.0, 1.0], [1.0, 0.0]])),
    )


class TestBuildGenerator:
    def test_two_state_matrix(self):
        gen = spectral.build_generator(*two_state(), GBARKER)
        np.testing.assert_allclose(gen.L, [[-1.0, 1.0], [1.0, -1.0]], atol=1e-15)

    def test_three_state_elementwise_oracle(self):
        pi = np.array([0.2, 0.3, 0.5])
        P = np.full((3, 3), 0.5)
        np.fill_diagonal(P, 0.0)
        gen = spectral.build_generator(models.FiniteTarget(pi), models.FiniteKernel(P), GMIN)
        # independent elementwise construction
        expected = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                if i != j:
                    expected[i, j] = min(1.0, (pi[j] * P[j, i]) / (pi[i] * P[i, j])) * P[i, j]
            expected[i, i] = -expected[i].sum()
        np.testing.assert_allclose(gen.L, expected, atol=1e-15)

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            spectral.GeneratorMatrix(L=np.array([[-1.0, 0.5], [1.0, -1.0]]),
                                     pi=np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            spectral.GeneratorMatrix(L=np.array([[1.0, -1.0], [-1.0, 1.0]]),
                                     pi=np.array([0.5, 0.5]))

    def test_reversibility_random_instances(self):
        rng = np.random.default_rng(123)
        for _ in range(25):
            m = int(rng.integers(2, 21))
            target, kernel = spectral.random_reversible_instance(m, rng)
            for g in balancing.builtin_catalog():
                gen = spectral.build_generator(target, kernel, g)
                flux = gen.pi[:, None] * gen.L
                assert np.max(np.abs(flux - flux.T)) <= 1e-12


class TestDirichletForm:
    def test_constants_are_annihilated(self):
        gen = spectral.build_generator(*two_state(), GBARKER)
        assert spectral.dirichlet_form(gen, [3.0, 3.0]) == pytest.approx(0.0, abs=1e-15)

    def test_two_state_hand_value_both_paths(self):
        gen = spectral.build_generator(*two_state(), GMIN)
        assert spectral.dirichlet_form(gen, [0.0, 1.0]) == pytest.approx(0.5, abs=1e-14)
        assert spectral.dirichlet_form_edges(gen, [0.0, 1.0]) == pytest.approx(0.5, abs=1e-14)

    def test_quadratic_scaling(self):
        gen = spectral.build_generator(*two_state(), GBARKER)
        f = np.array([0.3, -1.2])
        assert spectral.dirichlet_form(gen, 2.0 * f) == pytest.approx(
            4.0 * spectral.dirichlet_form(gen, f), rel=1e-13
        )

    def test_two_path_agreement_random(self):
        rng = np.random.default_rng(77)
        for _ in range(30):
            m = int(rng.integers(3, 15))
            target, kernel = spectral.random_reversible_instance(m, rng)
            gen = spectral.build_generator(target, kernel, GBARKER)
            f = rng.standard_normal(m)
            a = spectral.dirichlet_form(gen, f)
            b = spectral.dirichlet_form_edges(gen, f)
            assert abs(a - b) <= 1e-10 * max(1.0, abs(a))

    def test_dimension_mismatch(self):
        gen = spectral.build_generator(*two_state(), GMIN)
        with pytest.raises(DimensionMismatch):
            spectral.dirichlet_form(gen, [1.0, 2.0, 3.0])


class TestSpectralGap:
    def test_two_state_gap(self):
        gen = spectral.build_generator(*two_state(), GMIN)
        report = spectral.spectral_gap(gen)
        assert report.gap == pytest.approx(2.0, abs=1e-12)
        assert report.spectrum[0] == pytest.approx(0.0, abs=1e-12)

    def test_complete_graph_uniform(self):
        for m in (4, 7):
            pi = np.full(m, 1.0 / m)
            P = np.full((m, m), 1.0 / (m - 1))
            np.fill_diagonal(P, 0.0)
            gen = spectral.build_generator(models.FiniteTarget(pi), models.FiniteKernel(P), GMIN)
            assert spectral.spectral_gap(gen).gap == pytest.approx(m / (m - 1), rel=1e-12)

    def test_gap_matches_polished_rayleigh_search(self):
        # independent variational oracle: best of many random vectors,
        # polished by a general-purpose minimizer
        rng = np.random.default_rng(5)
        target, kernel = spectral.random_reversible_instance(5, rng)
        gen = spectral.build_generator(target, kernel, GBARKER)
        pi = gen.pi

        def rayleigh(f):
            f = f - np.dot(pi, f)
            var = float(np.dot(pi, f * f))
            return spectral.dirichlet_form(gen, f) / var if var > 1e-300 else math.inf

        candidates = rng.standard_normal((100_000, 5))
        best = min(candidates, key=rayleigh)
        polished = optimize.minimize(rayleigh, best, method="Nelder-Mead",
                                     options={"xatol": 1e-12, "fatol": 1e-14,
                                              "maxiter": 20_000})
        gap = spectral.spectral_gap(gen).gap
        assert abs(polished.fun - gap) <= 1e-6

    def test_achieving_test_function(self):
        rng = np.random.default_rng(8)
        target, kernel = spectral.random_reversible_instance(6, rng)
        gen = spectral.build_generator(target, kernel, GMIN)
        rep = spectral.spectral_gap(gen)
        f = rep.test_function
        f = f - np.dot(gen.pi, f)
        quotient = spectral.dirichlet_form(gen, f) / float(np.dot(gen.pi, f * f))
        assert quotient == pytest.approx(rep.gap, rel=1e-9)

    def test_bounded_generator_norm(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            target, kernel = spectral.random_reversible_instance(8, rng)
            gen = spectral.build_generator(target, kernel, GBARKER)
            f = rng.standard_normal(8)
            norm_L = math.sqrt(float(np.dot(gen.pi, (gen.L @ f) ** 2)))
            norm_f = math.sqrt(float(np.dot(gen.pi, f * f)))
            assert norm_L <= 2.0 * GBARKER.sup_bound * norm_f + 1e-12


class TestGapSandwich:
    def test_min_gives_equal_gaps(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            target, kernel = spectral.random_reversible_instance(6, rng)
            cert = spectral.gap_sandwich_check(target, kernel, GMIN)
            assert cert.ok
            assert cert.values["gap_L"] == pytest.approx(cert.values["gap_P"], abs=1e-9)

    def test_two_state_barker(self):
        cert = spectral.gap_sandwich_check(*two_state(), GBARKER)
        assert cert.values["gap_L"] == pytest.approx(2.0, abs=1e-12)
        assert cert.values["gap_P"] == pytest.approx(2.0, abs=1e-12)
        assert cert.ok

    def test_random_ten_state_instances(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            target, kernel = spectral.random_reversible_instance(10, rng)
            for g in (GMIN, GBARKER):
                assert spectral.gap_sandwich_check(target, kernel, g).ok

    def test_mh_kernel_shape(self):
        kern = spectral.mh_kernel(*two_state())
        np.testing.assert_allclose(kern.P, [[0.0, 1.0], [1.0, 0.0]], atol=1e-15)


class TestComparison:
    def test_max_and_sqrt_dominate_min(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            target, kernel = spectral.random_reversible_instance(7, rng)
            for g1 in (balancing.get("max"), balancing.get("sqrt")):
                assert spectral.comparison_check(target, kernel, g1, GMIN, 1.0).ok

    def test_equal_functions_equal_gaps(self):
        rng = np.random.default_rng(13)
        target, kernel = spectral.random_reversible_instance(6, rng)
        cert = spectral.comparison_check(target, kernel, GBARKER, GBARKER, 1.0)
        assert cert.ok
        assert cert.values["gap_1"] == pytest.approx(cert.values["gap_2"], abs=1e-12)

    def test_premise_violation_detected(self):
        rng = np.random.default_rng(14)
        target, kernel = spectral.random_reversible_instance(6, rng)
        with pytest.raises(PremiseViolated):
            spectral.comparison_check(target, kernel, GMIN, balancing.get("max"), 1.0)


class TestTvDecay:
    def test_stationary_start_is_flat(self):
        gen = spectral.build_generator(*two_state(), GMIN)
        cert = spectral.tv_decay_check(gen, gen.pi, [0.1, 1.0, 5.0])
        assert cert.ok
        assert all(tv == pytest.approx(0.0, abs=1e-12) for _, tv, _ in cert.values["curve"])

    def test_two_state_equality(self):
        # point start on the uniform 2-state chain: TV(t) = bound(t) exactly
        gen = spectral.build_generator(*two_state(), GMIN)
        assert spectral.chi_squared([1.0, 0.0], gen.pi) == pytest.approx(1.0, abs=1e-14)
        for t in (0.1, 0.7, 2.0, 5.0):
            tv = spectral.tv_distance(spectral.evolve_distribution(gen, [1.0, 0.0], t), gen.pi)
            assert tv == pytest.approx(0.5 * math.exp(-2.0 * t), abs=1e-12)

    def test_random_instances_bounded(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            m = int(rng.integers(3, 9))
            target, kernel = spectral.random_reversible_instance(m, rng)
            gen = spectral.build_generator(target, kernel, GBARKER)
            mu0 = np.zeros(m)
            mu0[int(rng.integers(m))] = 1.0
            assert spectral.tv_decay_check(gen, mu0, [0.1, 0.5, 1.0, 2.0, 5.0]).ok

    def test_evolution_is_stochastic_and_converges(self):
        rng = np.random.default_rng(21)
        target, kernel = spectral.random_reversible_instance(5, rng)
        gen = spectral.build_generator(target, kernel, GBARKER)
        mu0 = np.array([1.0, 0, 0, 0, 0])
        mu_t = spectral.evolve_distribution(gen, mu0, 0.7)
        assert mu_t.sum() == pytest.approx(1.0, abs=1e-12)
        far = spectral.evolve_distribution(gen, mu0, 200.0)
        np.testing.assert_allclose(far, gen.pi, atol=1e-10)

    def test_support_mismatch(self):
        with pytest.raises(SupportMismatch):
            spectral.chi_squared([0.5, 0.5], [1.0, 0.0])
