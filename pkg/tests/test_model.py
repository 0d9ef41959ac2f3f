import math

import numpy as np
import pytest

from beamlab.model import (ModelParams, coeff_eval, derive_params, gamma_eval,
                           r_inverse, small_rates)


def test_canonical_derived_constants():
    d = derive_params(ModelParams(0.0, 0.0, 1.0, 2.5))
    assert d.theta == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert d.p_crit == pytest.approx(3.0)
    assert d.nu == pytest.approx(2.0)
    assert d.varsigma == pytest.approx(1.0)
    assert d.mu == pytest.approx(1.0)
    assert d.A0 == pytest.approx(1.0)
    assert d.assumption_i and d.assumption_ii and d.assumption_iii


def test_supercritical_power_fails_assumption_ii():
    d = derive_params(ModelParams(0.0, 0.0, 1.0, 3.5))
    assert not d.assumption_ii
    assert d.p_crit == pytest.approx(3.0)


def test_cross_params_derived():
    d = derive_params(ModelParams(1.0, 0.0, 1.0, 1.8))
    assert d.theta == pytest.approx(0.625)
    assert d.p_crit == pytest.approx(2.0)
    assert d.mu == pytest.approx(0.5)
    assert d.varsigma == pytest.approx(0.5)
    assert d.assumption_i and d.assumption_ii and d.assumption_iii


def test_beta_boundary_fails_assumption_i():
    d = derive_params(ModelParams(0.0, -1.0, 1.0, 2.0))
    assert not d.assumption_i


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        ModelParams(0.0, 0.0, -1.0, 2.5)
    with pytest.raises(ValueError):
        ModelParams(0.0, 0.0, 1.0, 1.0)


def test_admissible_region_pins_theta(rng):
    """Whenever all three assumptions hold, theta lands in (1/2, 3/4)."""
    count = 0
    while count < 1000:
        alpha = rng.uniform(-0.4, 3.0)
        hi = min(2.0 * alpha + 1.0, alpha + 1.0)
        if hi <= -1.0 + 1e-6:
            continue
        beta = rng.uniform(-1.0 + 1e-6, hi - 1e-6)
        kappa = alpha - beta + 1.0
        lo_p = 1.0 + 4.0 * (1.0 - beta) / (3.0 * kappa)
        hi_p = 1.0 + 2.0 * (1.0 - beta) / kappa
        x = (1.0 - beta) / kappa
        if x < 0.25:
            hi_p = min(hi_p, 1.0 / (1.0 - 4.0 * (1.0 - beta) / (3.0 * kappa)))
        if hi_p <= lo_p:
            continue
        p = rng.uniform(lo_p + 1e-9, hi_p - 1e-9)
        d = derive_params(ModelParams(alpha, beta, 1.0, p))
        if not (d.assumption_i and d.assumption_ii and d.assumption_iii):
            continue
        assert 0.5 < d.theta < 0.75
        count += 1


def test_coeff_eval_constant_coefficients():
    c = coeff_eval(ModelParams(0.0, 0.0, 1.0, 2.5), 3.0)
    assert c.a == c.b == c.r == 1.0
    assert c.R == pytest.approx(3.0)
    assert c.s == pytest.approx(math.log(4.0))
    assert c.epsilon == pytest.approx(0.0, abs=1e-15)


def test_coeff_eval_growing_diffusivity_at_zero():
    c = coeff_eval(ModelParams(1.0, 0.0, 1.0, 1.8), 0.0)
    assert c.R == pytest.approx(0.0)
    assert c.epsilon == pytest.approx(1.0 - math.sqrt(2.0), rel=1e-12)


def test_clock_starts_at_zero():
    for mp in (ModelParams(0.5, 0.2, 2.0, 2.0), ModelParams(2.0, -0.5, 0.3, 1.5)):
        c = coeff_eval(mp, 0.0)
        assert c.R == pytest.approx(0.0)
        assert c.s == pytest.approx(0.0)


def test_clock_monotone_and_invertible():
    mp = ModelParams(1.0, 0.0, 1.0, 1.8)
    ts = np.linspace(0.0, 100.0, 501)
    Rs = np.array([coeff_eval(mp, t).R for t in ts])
    ss = np.array([coeff_eval(mp, t).s for t in ts])
    assert np.all(np.diff(Rs) > 0)
    assert np.all(np.diff(ss) > 0)
    for t in (0.0, 0.37, 5.0, 99.0, 1e4):
        back = r_inverse(mp, coeff_eval(mp, t).R)
        assert back == pytest.approx(t, rel=1e-12, abs=1e-12)


def test_epsilon_product_bounded():
    mp = ModelParams(1.0, 0.0, 1.0, 1.8)
    prods = [abs(coeff_eval(mp, t).epsilon) * (1.0 + t)
             for t in np.geomspace(1.0, 1e4, 200)]
    assert max(prods) < 10.0


def test_small_rates_constant_coefficients():
    mp = ModelParams(0.0, 0.0, 1.0, 2.5)
    r2 = small_rates(mp, 2.0)
    assert r2.c1 == pytest.approx(math.exp(-2.0), rel=1e-12)
    assert r2.c2 == 0.0
    r0 = small_rates(mp, 0.0)
    assert r0.c1 == pytest.approx(1.0)
    assert r0.c3 == pytest.approx(1.0)


def test_small_rates_envelopes_stay_in_fixed_interval():
    mp = ModelParams(1.0, 0.0, 1.0, 1.8)
    kappa = mp.kappa
    e1 = []
    e3 = []
    for s in np.linspace(1.0, 12.0, 45):
        r = small_rates(mp, s)
        assert r.c1 > 0 and r.c3 > 0
        e1.append(r.c1 * math.exp(s * (mp.beta + 1.0) / kappa))
        e3.append(r.c3 * math.exp(s * (2.0 * mp.alpha - mp.beta + 1.0) / kappa))
    for env in (e1, e3):
        assert min(env) > 0.1
        assert max(env) < 10.0
        assert max(env) / min(env) < 5.0


def test_small_rates_derivative_closed_forms():
    mp = ModelParams(1.0, 0.0, 1.0, 1.8)
    ds = 1e-5
    for s in (1.0, 3.0, 7.0):
        r = small_rates(mp, s)
        c1_fd = (small_rates(mp, s + ds).c1 - small_rates(mp, s - ds).c1) / (2 * ds)
        c3_fd = (small_rates(mp, s + ds).c3 - small_rates(mp, s - ds).c3) / (2 * ds)
        assert r.c1_prime == pytest.approx(c1_fd, rel=1e-6)
        assert r.c3_prime == pytest.approx(c3_fd, rel=1e-6)


class TestGammaEval:
    def test_odd_slope_vanishes_at_origin(self, canonical_params, canonical_profile):
        for t in (1.0, 5.0, 40.0):
            g = gamma_eval(canonical_params, canonical_profile, t, np.array([0.0]))
            assert g.gamma_x[0] == 0.0

    def test_unit_clock_reduces_to_profile(self, canonical_params, canonical_profile):
        # alpha = beta = 0, b0 = 1 gives R0(t) = t, so at t = 1 the prefactor is 1
        g = gamma_eval(canonical_params, canonical_profile, 1.0, np.array([0.0]))
        assert g.gamma[0] == pytest.approx(canonical_profile.omega0, rel=1e-12)

    def test_time_derivatives_match_finite_differences(self, canonical_params,
                                                       canonical_profile):
        xs = np.linspace(-8.0, 8.0, 41)
        t, dt = 7.0, 1e-4
        gm = gamma_eval(canonical_params, canonical_profile, t - dt, xs)
        g0 = gamma_eval(canonical_params, canonical_profile, t, xs)
        gp = gamma_eval(canonical_params, canonical_profile, t + dt, xs)
        gt_fd = (gp.gamma - gm.gamma) / (2 * dt)
        gtt_fd = (gp.gamma - 2 * g0.gamma + gm.gamma) / dt**2
        assert np.max(np.abs(gt_fd - g0.gamma_t)) < 1e-7
        assert np.max(np.abs(gtt_fd - g0.gamma_tt)) < 1e-5

    def test_space_derivatives_match_finite_differences(self, canonical_params,
                                                        canonical_profile):
        xs = np.linspace(-8.0, 8.0, 641)
        dx = xs[1] - xs[0]
        g = gamma_eval(canonical_params, canonical_profile, 7.0, xs)
        gxx_fd = (g.gamma[2:] - 2 * g.gamma[1:-1] + g.gamma[:-2]) / dx**2
        assert np.max(np.abs(gxx_fd - g.gamma_xx[1:-1])) < 2e-4 * np.max(np.abs(g.gamma_xx))
        gx4_fd = (g.gamma_xx[2:] - 2 * g.gamma_xx[1:-1] + g.gamma_xx[:-2]) / dx**2
        assert np.max(np.abs(gx4_fd - g.gamma_xxxx[1:-1])) < 2e-3 * np.max(np.abs(g.gamma_xxxx))

    def test_source_is_ansatz_defect(self, canonical_params, canonical_profile):
        # exact power laws: the coefficient-mismatch terms vanish identically
        xs = np.linspace(-10.0, 10.0, 21)
        g = gamma_eval(canonical_params, canonical_profile, 12.0, xs)
        assert np.array_equal(g.source, -g.gamma_tt - g.gamma_xxxx)

    def test_below_minimum_time_rejected(self, canonical_params, canonical_profile):
        with pytest.raises(ValueError):
            gamma_eval(canonical_params, canonical_profile, 0.5, np.array([0.0]))
