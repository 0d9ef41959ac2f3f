import numpy as np
import pytest

from beamlab.profile import (FittedAsymptotics, ProfileSolution, ProfileSolveError,
                             export_profile_csv, fit_asymptotics, profile_residual,
                             solve_profile)

THETA = 2.0 / 3.0


def constant_profile(p=2.5, theta=THETA, n=101):
    """The spatially constant equilibrium, an exact algebraic root of the ODE."""
    c = theta ** (1.0 / (p - 1.0))
    z = np.linspace(0.0, 25.0, n)
    zero = np.zeros_like(z)
    return ProfileSolution(p=p, theta=theta, varsigma=1.0, omega0=c, c0=c,
                           z_grid=z, omega=np.full_like(z, c), omega1=zero,
                           omega2=zero, omega3=zero, omega4=zero,
                           residual_max=0.0, turning_index=0,
                           tail_lead=c, tail_corr=0.0)


def test_constant_profile_residual_is_algebraic_zero():
    sol = constant_profile()
    assert profile_residual(sol) <= 1e-14
    assert (THETA ** (1 / 1.5)) == pytest.approx(0.76314, abs=5e-6)


def test_corrupted_curvature_is_detected():
    sol = constant_profile()
    sol.omega2 = sol.omega2 + 1.0  # destroy the stored curvature
    assert profile_residual(sol) >= 0.5


def test_canonical_solve_contract(canonical_profile, canonical_profile_timed):
    sol, elapsed = canonical_profile_timed
    assert elapsed <= 10.0
    assert sol.residual_max <= 1e-8
    assert sol.c0 == pytest.approx(1.0, rel=1e-6)
    assert sol.omega.min() > 0.0
    assert sol.turning_index == 0
    assert np.all(sol.omega1[1:] < 0.0)
    # golden center amplitude, frozen from the first converged solve
    assert sol.omega0 == pytest.approx(0.6242839689, abs=1e-7)


def test_corrupted_canonical_curvature(canonical_profile):
    broken = ProfileSolution(
        p=canonical_profile.p, theta=canonical_profile.theta,
        varsigma=canonical_profile.varsigma, omega0=canonical_profile.omega0,
        c0=canonical_profile.c0, z_grid=canonical_profile.z_grid,
        omega=canonical_profile.omega, omega1=canonical_profile.omega1,
        omega2=np.zeros_like(canonical_profile.omega2),
        omega3=canonical_profile.omega3, omega4=canonical_profile.omega4,
        residual_max=0.0, turning_index=0,
        tail_lead=canonical_profile.tail_lead,
        tail_corr=canonical_profile.tail_corr)
    assert profile_residual(broken) >= THETA * canonical_profile.omega.min()


def test_tail_constant_monotone_in_amplitude(canonical_profile):
    a0 = canonical_profile.omega0
    c0s = [solve_profile(2.5, THETA, omega0=a).c0
           for a in (0.95 * a0, a0, 1.05 * a0)]
    assert c0s[0] < c0s[1] < c0s[2]


def test_amplitude_dichotomy_errors():
    with pytest.raises(ProfileSolveError):
        solve_profile(2.5, THETA, omega0=0.05)          # crosses zero
    with pytest.raises(ProfileSolveError):
        solve_profile(2.5, THETA, omega0=0.99)          # above equilibrium, grows


def test_parity_of_evaluation(canonical_profile):
    zs = np.array([0.3, 1.7, 9.4, 24.0, 30.0])
    for deriv in range(5):
        left = canonical_profile.eval(-zs, deriv)
        right = canonical_profile.eval(zs, deriv)
        sign = -1.0 if deriv % 2 else 1.0
        np.testing.assert_allclose(left, sign * right, rtol=0, atol=0)


def test_evaluator_matches_grid(canonical_profile):
    sol = canonical_profile
    idx = [10, 100, 2000, 4000]
    for deriv, arr in enumerate((sol.omega, sol.omega1, sol.omega2, sol.omega3,
                                 sol.omega4)):
        vals = sol.eval(sol.z_grid[idx], deriv)
        np.testing.assert_allclose(vals, arr[idx], rtol=1e-12, atol=1e-12)


def test_derivative_consistency_refines_at_second_order(canonical_profile):
    def fd_error(sol):
        dz = sol.z_grid[1] - sol.z_grid[0]
        fd = (sol.omega[2:] - sol.omega[:-2]) / (2 * dz)
        return np.max(np.abs(fd - sol.omega1[1:-1]))

    coarse = solve_profile(2.5, THETA, omega0=canonical_profile.omega0, n_nodes=1001)
    fine = solve_profile(2.5, THETA, omega0=canonical_profile.omega0, n_nodes=2001)
    e_c, e_f = fd_error(coarse), fd_error(fine)
    assert 3.0 < e_c / e_f < 5.0


def test_tail_formula_continuity(canonical_profile):
    sol = canonical_profile
    lead = sol.c0 * sol.z_max ** (-2 * sol.theta)
    assert abs(sol.eval(sol.z_max) - lead) / lead <= 0.02


def test_fit_asymptotics_canonical(canonical_profile):
    fit = fit_asymptotics(canonical_profile, (15.0, 25.0))
    assert isinstance(fit, FittedAsymptotics)
    assert abs(fit.tail_rate_omega - (-2 * THETA)) <= 0.02
    assert fit.rate_combo == pytest.approx(-(2 * THETA + 2.0), rel=0.05)
    assert 0.95 <= fit.ratio_d2 <= 1.05
    assert np.isfinite(fit.ratio_d3) and np.isfinite(fit.ratio_d4)


def test_fit_window_validation(canonical_profile):
    with pytest.raises(ValueError):
        fit_asymptotics(canonical_profile, (24.99, 25.0))   # < 10 nodes
    with pytest.raises(ValueError):
        fit_asymptotics(canonical_profile, (20.0, 30.0))    # beyond grid


def test_solver_input_validation():
    with pytest.raises(ValueError):
        solve_profile(2.5, THETA)                      # no target
    with pytest.raises(ValueError):
        solve_profile(2.5, THETA, c0=1.0, omega0=0.6)  # both targets
    with pytest.raises(ValueError):
        solve_profile(2.5, THETA, c0=1.0, z_max=10.0)
    with pytest.raises(ValueError):
        solve_profile(2.5, THETA, c0=1.0, tol=1e-6)


def test_csv_export_roundtrip(canonical_profile, tmp_path):
    path = tmp_path / "profile.csv"
    export_profile_csv(canonical_profile, path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert data.dtype.names == ("z", "omega", "omega1", "omega2", "omega3", "omega4")
    np.testing.assert_allclose(data["omega"], canonical_profile.omega, rtol=1e-15)
