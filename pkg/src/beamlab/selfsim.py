"""Transform physical trajectories into parabolic self-similar variables.

With s = log(R(t)+1) and y = x / sqrt(R(t)+1), the fields

    v(s,y) = e^{theta s} u / A0,          w(s,y) = e^{(theta+1)s} u_t / (A0 r(t)),
    f = v - Omega,                        g = w + theta*Omega + (y/2) Omega',

measure the deviation from the profile ansatz.  All y-derivatives are chain
rules of finite-difference x-derivatives resampled by cubic splines; nothing
is re-differenced on the stretched grid, so interpolation and differencing
errors do not compound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .model import ModelParams, coeff_eval, derive_params, small_rates

__all__ = [
    "SelfSimilarDomainError",
    "SelfSimilarState",
    "StructuralTerms",
    "to_selfsimilar",
    "structural_terms",
    "export_selfsim_csv",
]


class SelfSimilarDomainError(RuntimeError):
    """Requested y-window maps outside the physical grid."""


@dataclass
class SelfSimilarState:
    s: float
    t: float
    y_grid: np.ndarray
    f: np.ndarray
    fy: np.ndarray
    fyy: np.ndarray
    fyyy: np.ndarray
    fyyyy: np.ndarray
    g: np.ndarray
    gy: np.ndarray

    def scaled(self, c: float) -> "SelfSimilarState":
        """The state with every field multiplied by c (homogeneity probes)."""
        return SelfSimilarState(
            self.s, self.t, self.y_grid, c * self.f, c * self.fy, c * self.fyy,
            c * self.fyyy, c * self.fyyyy, c * self.g, c * self.gy)


@dataclass
class StructuralTerms:
    """Linearization, nonlinear remainder and forcing terms on the y-grid."""

    s: float
    y_grid: np.ndarray
    L_of_f: np.ndarray
    N_of_f: np.ndarray
    k: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h: np.ndarray


def _x_derivatives(u: np.ndarray, dx: float):
    """Central second-order d/dx..d4/dx4 with nearest-value edge padding.

    Transforms only evaluate with a margin to the ends, so the padded entries
    never reach the resampling window.
    """
    ux = np.empty_like(u)
    ux[1:-1] = (u[2:] - u[:-2]) / (2.0 * dx)
    ux[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx)
    ux[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dx)

    uxx = np.empty_like(u)
    uxx[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
    uxx[0], uxx[-1] = uxx[1], uxx[-2]

    uxxx = np.empty_like(u)
    uxxx[2:-2] = (u[4:] - 2.0 * u[3:-1] + 2.0 * u[1:-3] - u[:-4]) / (2.0 * dx**3)
    uxxx[:2], uxxx[-2:] = uxxx[2], uxxx[-3]

    uxxxx = np.empty_like(u)
    uxxxx[2:-2] = (u[4:] - 4.0 * u[3:-1] + 6.0 * u[2:-2] - 4.0 * u[1:-3] + u[:-4]) / dx**4
    uxxxx[:2], uxxxx[-2:] = uxxxx[2], uxxxx[-3]
    return ux, uxx, uxxx, uxxxx


def to_selfsimilar(params: ModelParams, profile, state, y_grid: np.ndarray) -> SelfSimilarState:
    """Map one physical snapshot to (f, g) and their y-derivatives."""
    derived = derive_params(params)
    theta, A0 = derived.theta, derived.A0
    sample = coeff_eval(params, state.t)
    s = sample.s
    stretch = np.sqrt(sample.R + 1.0)

    y_grid = np.asarray(y_grid, dtype=float)
    x_eval = y_grid * stretch
    xs = state.grid.xs
    if x_eval.min() < xs[0] or x_eval.max() > xs[-1]:
        raise SelfSimilarDomainError(
            f"y-window maps to |x| <= {abs(x_eval).max():.2f}, beyond the grid "
            f"half-width {xs[-1]:.2f} at s={s:.3f}")

    ux, uxx, uxxx, uxxxx = _x_derivatives(state.u, state.grid.dx)
    wx = np.empty_like(state.ut)
    wx[1:-1] = (state.ut[2:] - state.ut[:-2]) / (2.0 * state.grid.dx)
    wx[0] = wx[1]
    wx[-1] = wx[-2]

    def resample(arr: np.ndarray) -> np.ndarray:
        return CubicSpline(xs, arr)(x_eval)

    u_y = resample(state.u)
    ux_y = resample(ux)
    uxx_y = resample(uxx)
    uxxx_y = resample(uxxx)
    uxxxx_y = resample(uxxxx)
    ut_y = resample(state.ut)
    wx_y = resample(wx)

    om = profile.eval(y_grid, 0)
    om1 = profile.eval(y_grid, 1)
    om2 = profile.eval(y_grid, 2)
    om3 = profile.eval(y_grid, 3)
    om4 = profile.eval(y_grid, 4)

    Rp1 = sample.R + 1.0
    f = Rp1**theta / A0 * u_y - om
    fy = Rp1 ** (theta + 0.5) / A0 * ux_y - om1
    fyy = Rp1 ** (theta + 1.0) / A0 * uxx_y - om2
    fyyy = Rp1 ** (theta + 1.5) / A0 * uxxx_y - om3
    fyyyy = Rp1 ** (theta + 2.0) / A0 * uxxxx_y - om4
    g = Rp1 ** (theta + 1.0) / (A0 * sample.r) * ut_y + theta * om + 0.5 * y_grid * om1
    gy = (Rp1 ** (theta + 1.5) / (A0 * sample.r) * wx_y
          + (theta + 0.5) * om1 + 0.5 * y_grid * om2)

    return SelfSimilarState(s=s, t=state.t, y_grid=y_grid, f=f, fy=fy, fyy=fyy,
                            fyyy=fyyy, fyyyy=fyyyy, g=g, gy=gy)


def structural_terms(params: ModelParams, profile, state: SelfSimilarState) -> StructuralTerms:
    """Evaluate the linear part, nonlinear remainder and forcing at one s."""
    derived = derive_params(params)
    theta, p = derived.theta, params.p
    rates = small_rates(params, state.s)
    eps = coeff_eval(params, state.t).epsilon

    y = state.y_grid
    om = profile.eval(y, 0)
    om1 = profile.eval(y, 1)
    om2 = profile.eval(y, 2)
    om4 = profile.eval(y, 4)
    om_pm1 = om ** (p - 1.0)
    om_p = om_pm1 * om

    f = state.f
    L_of_f = state.fyy + 0.5 * y * state.fy + theta * f - p * om_pm1 * f

    vfull = f + om
    power = np.abs(vfull) ** (p - 1.0) * vfull
    k = -(power - om_p)
    N_of_f = -(power - om_p - p * om_pm1 * f)

    w_comb = theta * om + 0.5 * y * om1
    h1 = (-rates.c1 * ((theta + 1.0) * w_comb
                       + 0.5 * y * ((theta + 0.5) * om1 + 0.5 * y * om2))
          + rates.c2 * w_comb - rates.c3 * om4)
    h2 = eps * power
    return StructuralTerms(s=state.s, y_grid=y, L_of_f=L_of_f, N_of_f=N_of_f,
                           k=k, h1=h1, h2=h2, h=h1 + h2)


def export_selfsim_csv(state: SelfSimilarState, terms: StructuralTerms, path) -> None:
    data = np.column_stack([state.y_grid, state.f, state.fy, state.fyy, state.fyyy,
                            state.fyyyy, state.g, state.gy, terms.h, terms.k])
    np.savetxt(path, data, delimiter=",",
               header="y,f,fy,fyy,fyyy,fyyyy,g,gy,h,k", comments="", fmt="%.16g")
