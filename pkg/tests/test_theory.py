import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softmode.errors import ParameterError
from softmode.schedule import make_schedule, schedule_from_integral
from softmode.scores import PrototypeSet
from softmode.spectral import analytic_dispersion
from softmode.theory import (
    MASS_CONVENTIONS,
    critical_time,
    critical_times,
    effective_mass,
    gl_coefficients,
    mass,
    prototype_jacobian,
    prototype_jacobian_spectrum,
    stiffness_constant,
    theory_table,
    two_prototype_r,
)

SCHED = make_schedule(1.0)


class TestCoefficients:
    def test_tree_level_zero_at_log26(self):
        assert abs(gl_coefficients(2, 2, SCHED, np.log(26.0)).r) <= 1e-12

    @pytest.mark.parametrize("t", [0.3, 1.0, 3.0, 7.0])
    def test_integer_arithmetic(self, t):
        a2, s2 = SCHED.alpha2(t), SCHED.sigma2(t)
        c = gl_coefficients(2, 2, SCHED, t)
        assert c.kappa == pytest.approx(25 * a2 / s2**2, rel=1e-14)
        assert c.u == pytest.approx(15625 * a2**2 / (3 * s2**4), rel=1e-14)
        assert stiffness_constant(2, 2) == 25.0

    def test_convention_offsets(self):
        t = 1.7
        tree = mass(2, 2, SCHED, t, "tree-level")
        assert mass(2, 2, SCHED, t, "main-text") == pytest.approx(tree + 0.5, abs=1e-14)
        assert mass(2, 2, SCHED, t, "reverse-flow") == pytest.approx(tree - 0.5, abs=1e-14)
        with pytest.raises(ParameterError):
            mass(2, 2, SCHED, t, "loop-level")


class TestCriticalTime:
    def test_tree_level_closed_form(self):
        assert abs(critical_time(2, 2, SCHED) - np.log(26.0)) <= 1e-12
        assert abs(critical_time(0, 1, SCHED) - np.log(2.0)) <= 1e-12

    def test_main_text_root(self):
        # r = 1/2 + 1/s - 25 (1 - s)/s^2 = 0  <=>  s^2 + 52 s - 50 = 0, solved here without the package
        s = max(np.roots([1.0, 52.0, -50.0]).real)
        expected = -np.log(1.0 - s)
        assert critical_time(2, 2, SCHED, "main-text") == pytest.approx(expected, abs=1e-12)
        assert 2.88 <= expected <= 2.90

    def test_reverse_flow_root(self):
        s = min(r for r in np.roots([1.0, -52.0, 50.0]).real if 0 < r < 1)
        assert critical_time(2, 2, SCHED, "reverse-flow") == pytest.approx(-np.log(1.0 - s), abs=1e-12)

    @pytest.mark.parametrize("convention", MASS_CONVENTIONS)
    @pytest.mark.parametrize("K,d", [(1, 1), (1, 2), (2, 2), (3, 2)])
    def test_mass_vanishes_at_critical_time(self, convention, K, d):
        t_c = critical_time(K, d, SCHED, convention)
        assert abs(mass(K, d, SCHED, t_c, convention)) <= 1e-12 * max(1.0, 1 / SCHED.sigma2(t_c))

    def test_beta_scaling(self):
        assert critical_time(2, 2, make_schedule(2.0)) == pytest.approx(np.log(26.0) / 2, abs=1e-14)

    def test_ordering(self):
        tc = critical_times(2, 2, SCHED)
        assert tc["main-text"] < tc["tree-level"] < tc["reverse-flow"]

    def test_single_site_reverse_flow(self):
        # -1/2 + (2 s - 1)/s^2 = 0  <=>  s^2 - 4 s + 2 = 0
        s = 2.0 - np.sqrt(2.0)
        assert critical_time(0, 1, SCHED, "reverse-flow") == pytest.approx(-np.log1p(-s), abs=1e-12)

    def test_time_dependent_beta_rejected(self):
        with pytest.raises(ParameterError):
            critical_time(2, 2, schedule_from_integral(lambda t: t**2, lambda t: 2 * t))


class TestEffectiveMass:
    def test_examples(self):
        c = gl_coefficients(2, 2, SCHED, 1.0)
        assert effective_mass(c, 0.0) == c.r
        from softmode.theory import GLCoefficients

        assert effective_mass(GLCoefficients(1.0, -3.0, 1.0, 1.0, "tree-level"), 1.0) == 0.0
        with pytest.raises(ParameterError):
            effective_mass(c, -0.1)

    @given(st.floats(0.01, 30.0), st.floats(0.0, 10.0))
    def test_never_below_bare_mass(self, t, var):
        c = gl_coefficients(2, 2, SCHED, t)
        assert effective_mass(c, var) >= c.r

    def test_table_exposes_both_crossings(self):
        times = np.geomspace(10.0, 0.5, 400)
        bare = theory_table(2, 2, SCHED, times, "tree-level")
        assert np.array_equal(bare[:, 4], bare[:, 1])
        shifted = theory_table(2, 2, SCHED, times, "tree-level", variances=np.full_like(times, 1e-4))
        assert np.all(shifted[:, 4] >= shifted[:, 1]) and np.array_equal(shifted[:, 1], bare[:, 1])


class TestPrototypeJacobian:
    def test_single_unit_prototype(self):
        N = 6
        mu = np.zeros(N)
        mu[2] = 1.0
        t = np.log(2.0)  # sigma^2 = 1/2
        eig = prototype_jacobian_spectrum(PrototypeSet(mu[None]), SCHED, t)
        assert eig[-1] == pytest.approx(1.5, abs=1e-12)
        assert np.allclose(eig[:-1], -2.5, atol=1e-12)
        dense = np.linalg.eigvalsh(prototype_jacobian(PrototypeSet(mu[None]), SCHED, t))
        assert np.allclose(np.sort(dense), eig, atol=1e-12)

    def test_zero_prototype(self):
        t = 0.9
        eig = prototype_jacobian_spectrum(PrototypeSet(np.zeros((1, 5))), SCHED, t)
        assert np.allclose(eig, -(0.5 + 1 / SCHED.sigma2(t)), atol=1e-14)

    @pytest.mark.parametrize("as_written", [True, False])
    def test_orthogonal_prototypes_are_eigenvectors(self, as_written):
        N = 8
        mus = np.zeros((2, N))
        mus[0, :4] = 1.0
        mus[1, 4:] = [1.0, -1.0, 2.0, 0.5]
        t = 0.7
        J = prototype_jacobian(PrototypeSet(mus), SCHED, t, as_written)
        for mu in mus:
            ratio = (J @ mu) / mu[np.argmax(np.abs(mu))]
            lam = ratio[np.argmax(np.abs(mu))]
            assert np.allclose(J @ mu, lam * mu, atol=1e-12)
        dense = np.sort(np.linalg.eigvalsh(J))
        assert np.allclose(prototype_jacobian_spectrum(PrototypeSet(mus), SCHED, t, as_written), dense, atol=1e-10)

    def test_alpha_variant_differs(self):
        mus = np.ones((1, 3))
        t = 1.0
        a = prototype_jacobian_spectrum(PrototypeSet(mus), SCHED, t, as_written=True)[-1]
        b = prototype_jacobian_spectrum(PrototypeSet(mus), SCHED, t, as_written=False)[-1]
        s2 = SCHED.sigma2(t)
        assert a - b == pytest.approx(3 * (1 - SCHED.alpha2(t)) / s2**2, rel=1e-12)


class TestTwoPrototype:
    def test_no_data(self):
        t = np.geomspace(1e-3, 30, 50)
        s2 = SCHED.sigma2(t)
        assert np.allclose(two_prototype_r(SCHED, t, 0.0), (s2 + 2) / (2 * s2)) and np.all(two_prototype_r(SCHED, t, 0.0) > 0)

    def test_root(self):
        s2 = max(np.roots([1.0, 2.0, -2.0]).real)
        t = -np.log1p(-s2)
        assert abs(two_prototype_r(SCHED, t, 1.0)) <= 1e-12
        assert abs(s2 - 0.7321) < 1e-4

    def test_high_noise(self):
        assert two_prototype_r(SCHED, 60.0, 0.3) == pytest.approx(1.5 - 0.3, abs=1e-12)


class TestConsistency:
    def test_zero_mode_is_minus_mass(self):
        ts = np.random.default_rng(1).uniform(0.05, 30.0, 100)
        for t in ts:
            lam0 = analytic_dispersion(2, 2, SCHED, [0.0, 0.0], t)
            r = mass(2, 2, SCHED, t, "main-text")
            assert abs(lam0 + r) <= 1e-12 * max(1.0, abs(r))

    @pytest.mark.parametrize("t", [0.5, 1.0, 3.0, 5.0])
    @pytest.mark.parametrize("K", [1, 2, 3])
    def test_kappa_from_finite_differences(self, t, K):
        def second(h):
            lam = lambda k: float(analytic_dispersion(K, 2, SCHED, [k, 0.0], t))  # noqa: E731
            return (lam(h) + lam(-h) - 2 * lam(0.0)) / (h * h)

        h = 1e-2
        curvature = (4 * second(h / 2) - second(h)) / 3  # Richardson
        kappa = gl_coefficients(K, 2, SCHED, t).kappa
        assert -curvature / 2 == pytest.approx(kappa, rel=1e-6)

    @pytest.mark.parametrize("t", [1.0, 3.0, 5.0])
    def test_small_k_remainder_is_fourth_order(self, t):
        r = mass(2, 2, SCHED, t, "main-text")
        kappa = gl_coefficients(2, 2, SCHED, t).kappa
        ks = 0.2 / 2.0 ** np.arange(5)  # 0.2 .. 0.0125
        rem = np.array([float(analytic_dispersion(2, 2, SCHED, [k, 0.0], t)) + r + kappa * k * k for k in ks])
        scaled = np.abs(rem) / ks**4
        assert np.all(scaled <= 2 * scaled[0])
        assert 12 <= rem[-2] / rem[-1] <= 20


def test_theory_table_columns():
    times = np.array([5.0, np.log(26.0), 1.0])
    table = theory_table(2, 2, SCHED, times)
    assert table.shape == (3, 5)
    assert abs(table[1, 1]) <= 1e-12 and np.array_equal(table[:, 1], table[:, 4])
