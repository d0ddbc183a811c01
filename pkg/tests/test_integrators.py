import math

import numpy as np
import pytest

from adlangevin import (
    ConfigurationError,
    ForceModel,
    ForceSample,
    PhaseState,
    RngStream,
    ThermostatParams,
    compile_scheme,
    initial_xi,
    make_stepper,
    step_A,
    step_adaptive_brownian,
    step_B,
    step_D,
    step_msgld,
    step_O,
    step_sgld,
    step_sgnht_n,
    step_sgnht_s,
    step_splitting,
)
from adlangevin.integrators import OU_SERIES_THRESHOLD, ou_variance_factor
from adlangevin.models import Cosine, GaussianMeanModel, Harmonic, InjectedNoise

NOISELESS = ThermostatParams(beta=1.0, sigma_a=0.0, mu=10.0)


class Flat(Harmonic):
    def __init__(self, n_dof=1):
        super().__init__(stiffness=0.0, n_dof=n_dof)


class NoLaplacian(ForceModel):
    n_dof = 1

    def force(self, q, rng=None, *, want_cov=False):
        return ForceSample(-np.asarray(q))

    def gradient(self, q):
        return np.asarray(q)


class Anharmonic(ForceModel):
    """U = q^4/4 + q^2/2 in each coordinate; a nonlinear clean test force."""

    def __init__(self, n_dof=2):
        self.n_dof = n_dof

    def force(self, q, rng=None, *, want_cov=False):
        return ForceSample(-(q**3 + q))


# -- A --

def test_step_a_zero_momentum():
    s = step_A(PhaseState([1.0], [0.0], 0.0), 0.1)
    np.testing.assert_array_equal(s.q, [1.0])


def test_step_a_linear_drift():
    s = step_A(PhaseState([0.0], [2.0], 0.0), 0.5)
    np.testing.assert_allclose(s.q, [1.0])
    np.testing.assert_array_equal(s.p, [2.0])


def test_step_a_mass_and_reversibility():
    rng = np.random.default_rng(1)
    params = ThermostatParams(mass=np.array([1.0, 2.0, 4.0]))
    s = PhaseState(rng.normal(size=3), rng.normal(size=3), 0.7)
    t = step_A(s, 0.3, params)
    np.testing.assert_allclose(t.q - s.q, 0.3 * s.p / params.mass)
    back = step_A(t, -0.3, params)
    np.testing.assert_allclose(back.q, s.q, rtol=0, atol=1e-15)


# -- B --

def test_step_b_constant_kick():
    s = step_B(PhaseState([0.0], [0.0], 0.0), 0.1, ForceSample(np.array([-1.0])))
    np.testing.assert_allclose(s.p, [-0.1])


def test_step_b_zero_force():
    s = PhaseState([0.4], [0.2], 0.1)
    t = step_B(s, 0.1, np.zeros(1))
    np.testing.assert_array_equal(t.p, s.p)
    np.testing.assert_array_equal(t.q, s.q)


def test_step_b_noise_scales_with_h_squared():
    # Flat potential, sigma = 1: each kick adds h * sigma * R, so Var = h^2 sigma^2.
    model = InjectedNoise(Flat(), sigma=1.0)
    rng = RngStream(21)
    h, n = 0.01, 10**5
    s = PhaseState([0.0], [0.0], 0.0)
    dp = np.empty(n)
    for k in range(n):
        p0 = s.p[0]
        s = step_B(s, h, model.force(s.q, rng))
        dp[k] = s.p[0] - p0
    assert abs(dp.var() / (h * h) - 1.0) < 0.03


# -- O --

def test_step_o_pure_decay():
    s = step_O(PhaseState([0.0], [2.0], 1.0), 0.1, NOISELESS, None)
    np.testing.assert_allclose(s.p, [2 * math.exp(-0.1)], rtol=1e-15)
    assert s.p[0] == pytest.approx(1.80967, abs=1e-5)


def test_step_o_zero_friction_variance():
    params = ThermostatParams(sigma_a=3.0)
    s = PhaseState(np.zeros((10**5, 1)), np.zeros((10**5, 1)), 0.0)
    p = step_O(s, 0.04, params, RngStream(2)).p
    assert abs(p.var() / 0.36 - 1.0) < 0.03


def test_step_o_negative_friction():
    factor = ou_variance_factor(-0.5, 0.1)
    np.testing.assert_allclose(factor, (1 - math.exp(0.1)) / -1.0, rtol=1e-14)
    assert factor > 0
    s = step_O(PhaseState([0.0], [1.0], -0.5), 0.1, NOISELESS, None)
    np.testing.assert_allclose(s.p, [math.exp(0.05)], rtol=1e-15)


@pytest.mark.parametrize("xi", [-0.5, 0.0, 1e-7, 2.0])
def test_step_o_moments(xi):
    h, sigma_a, p0, n = 0.1, 1.5, 0.8, 200_000
    params = ThermostatParams(sigma_a=sigma_a)
    s = PhaseState(np.zeros((n, 1)), np.full((n, 1), p0), xi)
    p = step_O(s, h, params, RngStream(3, (int(xi * 1e7) % 1000,))).p[:, 0]
    mean = math.exp(-xi * h) * p0
    var = sigma_a**2 * (h if xi == 0 else -math.expm1(-2 * xi * h) / (2 * xi))
    assert abs(p.mean() - mean) < 3 * math.sqrt(var / n)
    # Var of the sample variance for Gaussian data is 2 var^2 / (n - 1).
    assert abs(p.var(ddof=1) - var) < 3 * var * math.sqrt(2 / (n - 1))


def test_ou_factor_is_continuous_at_series_threshold():
    h = 0.5
    for x in (OU_SERIES_THRESHOLD * 0.999, OU_SERIES_THRESHOLD * 1.001):
        for sign in (1, -1):
            xi = sign * x / h
            exact = math.expm1(-2 * xi * h) / (-2 * xi)
            assert ou_variance_factor(xi, h) == pytest.approx(exact, rel=1e-12)
    assert ou_variance_factor(0.0, h) == h


# -- D --

def test_step_d_fixed_point():
    s = PhaseState([0.0, 0.0], [1.0, 1.0], 0.4)
    np.testing.assert_allclose(step_D(s, 0.1, ThermostatParams()).xi, 0.4)


def test_step_d_heating_and_cooling():
    s = step_D(PhaseState([0.0], [2.0], 0.0), 0.1, ThermostatParams(mu=10.0))
    assert float(s.xi) == pytest.approx(0.03)
    s = step_D(PhaseState([0.0], [0.0], 0.0), 1.0, ThermostatParams(mu=1.0))
    assert float(s.xi) == pytest.approx(-1.0)


# -- schemes --

def test_compile_badodab():
    s = compile_scheme("BADODAB")
    assert s.symmetric and s.reuses_force
    assert len(s) == 7
    assert s.fractions == (0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5)
    assert compile_scheme("SGNHT-S").letters == s.letters


@pytest.mark.parametrize("spec", ["BADODAB", "ABDODBA", "BAODOAB", "BAOAB", "BAB", "OBADABO", "AABBODD"])
def test_fractions_sum_to_one_per_letter(spec):
    s = compile_scheme(spec)
    for letter in set(s.letters):
        total = sum(f for l, f in zip(s.letters, s.fractions) if l == letter)
        assert total == pytest.approx(1.0, abs=1e-15)


def test_compile_pad_and_bab():
    assert not compile_scheme("PAD").symmetric
    assert not compile_scheme("SGNHT-N").symmetric
    assert compile_scheme("BAB").symmetric
    assert not compile_scheme("BAOD").symmetric


@pytest.mark.parametrize("bad", ["", "BAX", "bap", "PADO"])
def test_compile_rejects_bad_letters(bad):
    with pytest.raises(ConfigurationError):
        compile_scheme(bad)


def test_sgnht_n_hand_evaluated_step():
    params = ThermostatParams(sigma_a=0.0, mu=10.0)
    s, report = step_sgnht_n(PhaseState([1.0], [0.0], 0.0), 0.1, Harmonic(), params, RngStream(0))
    np.testing.assert_allclose(s.p, [-0.1])
    np.testing.assert_allclose(s.q, [0.99])
    assert float(s.xi) == pytest.approx(0.1 / 10 * (0.01 - 1.0))
    assert report.force_evaluations == 1 and not report.diverged


def test_sgnht_n_euler_friction_decay():
    params = ThermostatParams(sigma_a=0.0, mu=1e12)
    s = PhaseState([0.0], [1.0], 2.0)
    for _ in range(5):
        s, _ = step_sgnht_n(s, 0.1, Flat(), params, RngStream(0))
    np.testing.assert_allclose(s.p, [(1 - 0.1 * 2.0) ** 5], rtol=1e-9)


def test_badodab_equals_explicit_composition():
    model = Anharmonic()
    params = ThermostatParams(sigma_a=0.0, mu=3.0)
    s = PhaseState([0.3, -1.1], [0.5, 0.2], 0.7)
    h = 0.07
    got, _ = step_sgnht_s(s, h, model, params, RngStream(0))
    t = step_B(s, h / 2, model.force(s.q))
    t = step_A(t, h / 2, params)
    t = step_D(t, h / 2, params)
    t = step_O(t, h, params, None)
    t = step_D(t, h / 2, params)
    t = step_A(t, h / 2, params)
    t = step_B(t, h / 2, model.force(t.q))
    np.testing.assert_allclose(got.q, t.q, rtol=1e-15)
    np.testing.assert_allclose(got.p, t.p, rtol=1e-15)
    np.testing.assert_allclose(got.xi, t.xi, rtol=1e-15)


def test_badodab_reduces_to_velocity_verlet():
    model = Harmonic()
    params = ThermostatParams(sigma_a=0.0, mu=1e300)
    h = 0.1
    s = PhaseState([1.0], [0.0], 0.0)
    q, p = 1.0, 0.0
    energies = []
    for _ in range(1000):
        s, _ = step_sgnht_s(s, h, model, params, RngStream(0))
        p -= 0.5 * h * q
        q += h * p
        p -= 0.5 * h * q
        energies.append(0.5 * (s.q[0] ** 2 + s.p[0] ** 2))
    np.testing.assert_allclose([s.q[0], s.p[0]], [q, p], rtol=1e-12, atol=1e-14)
    assert abs(float(s.xi)) < 1e-250
    # Verlet's shadow energy keeps the error O(h^2) with no drift.
    err = np.abs(np.array(energies) - 0.5)
    assert err.max() < h**2
    assert abs(np.mean(err[:100]) - np.mean(err[-100:])) < 1e-3


def test_force_evaluations_per_step():
    model = Harmonic()
    params = ThermostatParams(sigma_a=1.0)
    rng = RngStream(4)
    scheme = compile_scheme("BADODAB")
    s = PhaseState([1.0], [0.0], 0.5)
    counts = []
    for _ in range(10):
        s, report = step_splitting(s, 0.05, scheme, model, params, rng)
        counts.append(report.force_evaluations)
    assert counts == [2] + [1] * 9
    _, report = step_splitting(s, 0.05, scheme, model, params, rng, reuse_force=False)
    assert report.force_evaluations == 2
    _, report = step_splitting(s, 0.05, compile_scheme("ABDODBA"), model, params, rng)
    assert report.force_evaluations == 1


def test_force_reuse_leaves_clean_trajectories_unchanged():
    model = Anharmonic(n_dof=3)
    params = ThermostatParams(sigma_a=2.0, mu=5.0)
    start = PhaseState(np.full((4, 3), 0.2), np.zeros((4, 3)), 1.0)
    out = []
    for reuse in (True, False):
        stepper = make_stepper("BADODAB", reuse_force=reuse)
        rng = RngStream(9)
        s = start
        for _ in range(200):
            s, _ = stepper(s, 0.05, model, params, rng)
        out.append(s)
    np.testing.assert_array_equal(out[0].q, out[1].q)
    np.testing.assert_array_equal(out[0].p, out[1].p)
    np.testing.assert_array_equal(out[0].xi, out[1].xi)


@pytest.mark.parametrize("spec", ["BADODAB", "ABDODBA", "BAODOAB", "BAOAB", "BAB"])
def test_symmetric_schemes_are_reversible_without_noise(spec):
    model = Anharmonic(n_dof=2)
    params = ThermostatParams(sigma_a=0.0, mu=2.0)
    scheme = compile_scheme(spec)
    s0 = PhaseState([0.4, -0.9], [1.2, 0.3], 0.6)
    s1, _ = step_splitting(s0, 0.05, scheme, model, params, RngStream(0), reuse_force=False)
    s2, _ = step_splitting(s1, -0.05, scheme, model, params, RngStream(0), reuse_force=False)
    np.testing.assert_allclose(s2.q, s0.q, rtol=0, atol=1e-14)
    np.testing.assert_allclose(s2.p, s0.p, rtol=0, atol=1e-14)
    np.testing.assert_allclose(s2.xi, s0.xi, rtol=0, atol=1e-14)


def test_pad_is_not_reversible():
    model = Anharmonic(n_dof=2)
    params = ThermostatParams(sigma_a=0.0, mu=2.0)
    scheme = compile_scheme("PAD")
    s0 = PhaseState([0.4, -0.9], [1.2, 0.3], 0.6)
    s1, _ = step_splitting(s0, 0.05, scheme, model, params, RngStream(0))
    s2, _ = step_splitting(s1, -0.05, scheme, model, params, RngStream(0))
    assert np.max(np.abs(s2.p - s0.p)) > 1e-6


def test_divergence_is_flagged():
    params = ThermostatParams(sigma_a=0.0)
    s = PhaseState([np.inf], [0.0], 0.0)
    with np.errstate(invalid="ignore"):
        _, report = step_sgnht_s(s, 0.1, Harmonic(), params, RngStream(0))
    assert report.diverged


# -- first-order methods --

def test_sgld_diffusion_moment():
    n, h = 10**5, 0.02
    s = PhaseState(np.zeros((n, 1)), np.zeros((n, 1)), 0.0)
    t = step_sgld(s, h, Flat(), ThermostatParams(), RngStream(5))
    assert abs(t.q.var() / (2 * h) - 1.0) < 0.03
    np.testing.assert_array_equal(t.p, s.p)


def test_sgld_harmonic_variance_close_to_one():
    # Exact stationary variance of the Euler chain is 1/(1 - h/2).
    h, n_rep, n_steps = 0.01, 2000, 2000
    rng = RngStream(6)
    s = PhaseState(rng.normals((n_rep, 1)), np.zeros((n_rep, 1)), 0.0)
    for _ in range(n_steps):
        s = step_sgld(s, h, Harmonic(), ThermostatParams(), rng)
    assert abs(s.q.var() - 1 / (1 - h / 2)) < 0.1


def test_sgld_identity_without_force_or_noise():
    s = PhaseState([0.7], [0.0], 0.0)
    t = step_sgld(s, 0.1, Flat(), ThermostatParams(beta=np.inf), RngStream(0))
    np.testing.assert_array_equal(t.q, s.q)


class ZeroCov(Harmonic):
    def force(self, q, rng=None, *, want_cov=False):
        f = super().force(q, rng)
        f.cov_estimate = np.zeros_like(q) if want_cov else None
        return f


def test_msgld_matches_sgld_when_covariance_vanishes():
    s = PhaseState(np.linspace(-1, 1, 6)[:, None], np.zeros((6, 1)), 0.0)
    a = step_msgld(s, 0.05, ZeroCov(), ThermostatParams(), RngStream(8))
    b = step_sgld(s, 0.05, ZeroCov(), ThermostatParams(), RngStream(8))
    np.testing.assert_array_equal(a.q, b.q)


def test_msgld_noise_multiplier_for_gaussian_mean():
    data = np.random.default_rng(3).normal(size=100)
    data = (data - data.mean()) / data.std(ddof=1)  # VarX = 1 exactly
    model = GaussianMeanModel(data, minibatch=10)
    cov = model.force(np.zeros(1), RngStream(0), want_cov=True).cov_estimate
    np.testing.assert_allclose(cov, [990.0])
    assert 1 - 0.001 / 4 * cov[0] == pytest.approx(1 - 0.2475)


def test_msgld_requires_covariance():
    with pytest.raises(ConfigurationError):
        step_msgld(PhaseState([0.0], [0.0], 0.0), 0.1, NoLaplacian(), ThermostatParams(), RngStream(0))


def test_adaptive_brownian_chi():
    # With sigma = 0 and xi = 0 only the friction moves: xi += h (q^2 - 1).
    model = Harmonic()
    for q0 in (0.0, 0.5, 2.0):
        s = step_adaptive_brownian(PhaseState([q0], [0.0], 0.0), 0.1, model, ThermostatParams(), RngStream(0))
        assert float(s.xi) == pytest.approx(0.1 * (q0**2 - 1.0))
        np.testing.assert_array_equal(s.q, [q0])


def test_adaptive_brownian_noiseless_descent():
    s = PhaseState([2.0], [0.0], 1.0)
    for _ in range(2000):
        s = step_adaptive_brownian(s, 0.01, Harmonic(), ThermostatParams(beta=np.inf), RngStream(0))
    assert abs(s.q[0]) < 1e-6


def test_adaptive_brownian_requires_laplacian():
    with pytest.raises(ConfigurationError):
        step_adaptive_brownian(PhaseState([0.0], [0.0], 0.0), 0.1, NoLaplacian(), ThermostatParams(), RngStream(0))


def test_make_stepper_names():
    for name in ("BADODAB", "PAD", "SGNHT-S", "SGNHT-N", "ABDODBA", "BAODOAB", "BAOAB", "BAB", "SGLD", "mSGLD", "adaptive-brownian"):
        assert callable(make_stepper(name))
    with pytest.raises(ConfigurationError):
        make_stepper("RK4")


def test_initial_xi():
    params = ThermostatParams(beta=1.0, sigma_a=3.0)
    assert initial_xi("BADODAB", params) == pytest.approx(4.5)
    assert initial_xi("BADODAB", params, Cosine(), h=0.1) == pytest.approx(4.5)
    noisy = InjectedNoise(Harmonic(), sigma=2.0)
    assert initial_xi("PAD", params, noisy, h=0.1) == pytest.approx((4.0 * 0.1 + 9.0) / 2)
    assert initial_xi("adaptive-brownian", params, noisy) == pytest.approx(2.0)
