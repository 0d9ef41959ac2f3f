import math

import numpy as np
import pytest

from beamlab.beam_solver import PhysicalState, SpatialGrid
from beamlab.model import ModelParams, coeff_eval, derive_params
from beamlab.selfsim import (SelfSimilarDomainError, SelfSimilarState,
                             structural_terms, to_selfsimilar)

PARAMS = ModelParams(0.0, 0.0, 1.0, 2.5)


def ansatz_state(params, profile, t, grid):
    """Exact self-similar ansatz (u, u_t) sampled on the grid."""
    derived = derive_params(params)
    sample = coeff_eval(params, t)
    Rp1 = sample.R + 1.0
    xs = grid.xs
    y = xs / math.sqrt(Rp1)
    om = profile.eval(y, 0)
    om1 = profile.eval(y, 1)
    u = derived.A0 * Rp1 ** (-derived.theta) * om
    w_comb = derived.theta * om + 0.5 * y * om1
    ut = -derived.A0 * sample.r * Rp1 ** (-derived.theta - 1.0) * w_comb
    return PhysicalState(t, grid, u, ut)


def synthetic_selfsim(y, f, fy, fyy, s=5.0, t=None, g=None, gy=None):
    zeros = np.zeros_like(y)
    if t is None:
        t = math.exp(s) - 1.0  # constant-coefficient clock
    return SelfSimilarState(s=s, t=t, y_grid=y, f=f, fy=fy, fyy=fyy,
                            fyyy=zeros, fyyyy=zeros,
                            g=zeros if g is None else g,
                            gy=zeros if gy is None else gy)


class TestTransform:
    def test_ansatz_round_trip(self, canonical_params, canonical_profile):
        grid = SpatialGrid.symmetric(60.0, 1201)
        state = ansatz_state(canonical_params, canonical_profile, 10.0, grid)
        y = np.linspace(-15.0, 15.0, 1501)
        ss = to_selfsimilar(canonical_params, canonical_profile, state, y)
        assert np.max(np.abs(ss.f)) <= 1e-8
        assert np.max(np.abs(ss.g)) <= 1e-8

    def test_resampling_is_fourth_order(self, canonical_params, canonical_profile):
        # transform a closed-form gaussian and compare the field values; the
        # cubic resampling should converge at O(dx^4)
        errs = []
        t = 10.0
        sample = coeff_eval(canonical_params, t)
        derived = derive_params(canonical_params)
        stretch = math.sqrt(sample.R + 1.0)
        y = np.linspace(-3.0, 3.0, 501)
        for n in (601, 1201):
            grid = SpatialGrid.symmetric(60.0, n)
            u = np.exp(-grid.xs**2)
            state = PhysicalState(t, grid, u, np.zeros_like(u))
            ss = to_selfsimilar(canonical_params, canonical_profile, state, y)
            exact = ((sample.R + 1.0) ** derived.theta / derived.A0
                     * np.exp(-(y * stretch) ** 2)
                     - canonical_profile.eval(y, 0))
            errs.append(np.max(np.abs(ss.f - exact)))
        assert errs[0] / errs[1] > 10.0   # ~16 for clean fourth order

    def test_domain_violation_raises(self, canonical_params, canonical_profile):
        grid = SpatialGrid.symmetric(60.0, 1201)
        state = ansatz_state(canonical_params, canonical_profile, 40.0, grid)
        y = np.linspace(-15.0, 15.0, 301)   # 15 * sqrt(41) > 60
        with pytest.raises(SelfSimilarDomainError):
            to_selfsimilar(canonical_params, canonical_profile, state, y)


class TestStructuralTerms:
    def test_zero_deviation(self, canonical_params, canonical_profile):
        y = np.linspace(-10.0, 10.0, 801)
        zeros = np.zeros_like(y)
        ss = synthetic_selfsim(y, zeros, zeros, zeros, s=4.0)
        terms = structural_terms(canonical_params, canonical_profile, ss)
        assert np.max(np.abs(terms.L_of_f)) == 0.0
        assert np.max(np.abs(terms.N_of_f)) <= 1e-16
        assert np.max(np.abs(terms.k)) <= 1e-16
        # constant coefficients make the drift defect vanish: h = h1
        assert np.array_equal(terms.h, terms.h1)
        assert np.max(np.abs(terms.h2)) == 0.0

    def test_forcing_splits_off_profile_power(self, cross_profile):
        params = ModelParams(1.0, 0.0, 1.0, 1.8)
        y = np.linspace(-10.0, 10.0, 801)
        zeros = np.zeros_like(y)
        s = 5.0
        # invert s = log(R+1) for the growing-diffusivity clock
        from beamlab.model import r_inverse
        t = r_inverse(params, math.expm1(s))
        ss = synthetic_selfsim(y, zeros, zeros, zeros, s=s, t=t)
        terms = structural_terms(params, cross_profile, ss)
        eps = coeff_eval(params, t).epsilon
        om_p = cross_profile.eval(y, 0) ** params.p
        np.testing.assert_allclose(terms.h2, eps * om_p, rtol=1e-12)

    def test_nonlinear_identity(self, canonical_params, canonical_profile):
        y = np.linspace(-12.0, 12.0, 1001)
        f = 0.1 * np.exp(-(y**2))
        ss = synthetic_selfsim(y, f, -2 * y * f, (4 * y**2 - 2) * f, s=4.0)
        terms = structural_terms(canonical_params, canonical_profile, ss)
        target = (canonical_params.p
                  * canonical_profile.eval(y, 0) ** (canonical_params.p - 1.0) * f)
        rel = np.abs(terms.N_of_f - terms.k - target) / (np.abs(target) + 1e-30)
        assert np.max(rel) <= 1e-10

    def test_nonlinear_remainder_is_quadratic(self, canonical_params,
                                              canonical_profile):
        y = np.linspace(-12.0, 12.0, 1001)
        om = canonical_profile.eval(y, 0)
        ratios = []
        for eps in (1e-2, 1e-3):
            f = eps * om
            ss = synthetic_selfsim(y, f, np.zeros_like(y), np.zeros_like(y), s=4.0)
            terms = structural_terms(canonical_params, canonical_profile, ss)
            ratios.append(np.max(np.abs(terms.N_of_f)) / eps**2)
        assert ratios[0] == pytest.approx(ratios[1], rel=0.05)


class TestRemainderScaling:
    def test_forcing_envelope_bounded(self, canonical_analysis, canonical_derived):
        # ||h||_{H^{0,1}} e^{mu s} stays within a narrow band along the run
        assert canonical_analysis.h_envelope_ratio < 3.0

    def test_forcing_gradient_envelope_bounded(self, canonical_analysis,
                                               canonical_derived):
        samples = canonical_analysis.energy_samples
        mu = canonical_derived.mu
        vals = [e.norm_hy_L2 * math.exp(mu * e.s) for e in samples
                if math.isfinite(e.norm_hy_L2)]
        assert max(vals) / min(vals) < 3.0

    def test_nonlinear_bound_constant_stable(self, canonical_analysis):
        # ||k|| <= C ||f|| with C stable across snapshots
        assert canonical_analysis.k_bound_ratio < 3.0
