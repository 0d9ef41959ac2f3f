"""Corrective weight built from the profile.

The weight

    q(y) = e^{y^2/4} * Integral_y^inf e^{-r^2/4} (Omega(r)^-2 - Omega(0)^-2) dr

(even extension for y < 0) is what makes the linearized quadratic form
coercive where the bare polynomial weight fails.  Overflow control: the
integral is always evaluated in the substituted form

    q(y) = Integral_0^inf e^{-(u^2/4 + u*y/2)} (Omega(y+u)^-2 - Omega(0)^-2) du,

never as e^{y^2/4} times a separately computed tail integral (both factors
leave double range for y around 40).

q' and q'' are reconstructed from the differentiated closed forms

    q'(y)  = (y/2) q(y) - (Omega(y)^-2 - Omega(0)^-2),
    q''(y) = (y/2) q'(y) + q(y)/2 + 2 Omega(y)^-3 Omega'(y),

so the differential inequality verified by `weight_inequality_margin` reduces
analytically to the sign of Omega' and the quadrature enters only through q
itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

__all__ = [
    "WeightQuadratureError",
    "WeightFunction",
    "build_weight",
    "weight_inequality_margin",
    "weight_bound_constants",
    "tail_correction_report",
    "export_weight_csv",
]


class WeightQuadratureError(RuntimeError):
    """The weight quadrature failed to converge or produced a negative value."""


@dataclass
class WeightFunction:
    """q, q', q'' on a uniform half-grid, with fitted sandwich constants."""

    theta: float
    y_grid: np.ndarray
    q: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    c_lower: float = 0.0
    c_upper: float = 0.0
    c_d1: float = 0.0
    c_d2: float = 0.0
    _interps: list = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self._interps = [PchipInterpolator(self.y_grid, arr, extrapolate=False)
                         for arr in (self.q, self.q1, self.q2)]

    @property
    def y_max(self) -> float:
        return float(self.y_grid[-1])

    def eval(self, y, deriv: int = 0):
        """Evaluate q (deriv=0), q' (1) or q'' (2); q is even, q' odd."""
        y_arr = np.asarray(y, dtype=float)
        scalar = y_arr.ndim == 0
        ay = np.abs(np.atleast_1d(y_arr))
        out = np.empty_like(ay)
        inside = ay <= self.y_max
        out[inside] = self._interps[deriv](ay[inside])
        if (~inside).any():
            # power continuation matched at the grid end
            exp = 4.0 * self.theta - 1.0 - deriv
            edge = (self.q[-1], self.q1[-1], self.q2[-1])[deriv]
            out[~inside] = edge * (ay[~inside] / self.y_max) ** exp
        if deriv == 1:
            out = out * np.sign(np.atleast_1d(y_arr))
        return float(out[0]) if scalar else out


def _quad_node(profile, inv2_0: float, y: float) -> float:
    # truncate where the Gaussian factor alone is ~1e-16 of the peak
    upper = -y + math.sqrt(y * y + 180.0)

    def integrand(u: float) -> float:
        om = profile.eval(y + u)
        return math.exp(-0.25 * u * u - 0.5 * u * y) * (om**-2 - inv2_0)

    out = quad(integrand, 0.0, upper, epsabs=1e-10, epsrel=1e-9,
               limit=400, full_output=1)
    val, err = out[0], out[1]
    # The integrand is piecewise polynomial with thousands of breakpoints, so
    # quad's error estimate saturates near 1e-8 of the value.  That is ample:
    # the inequality margin cancels q algebraically and every q-dependent
    # check downstream carries percent-level tolerances.
    if err > 1e-7 * (1.0 + abs(val)):
        raise WeightQuadratureError(f"quadrature error {err:.2e} too large at y={y}")
    return val


def build_weight(profile, y_max: float = 20.0, n_nodes: int = 2001) -> WeightFunction:
    """Quadrature of q on [0, y_max] plus identity reconstruction of q', q''."""
    if profile.z_max < y_max:
        raise ValueError("profile grid must reach at least y_max (tail margin)")
    y_grid = np.linspace(0.0, y_max, n_nodes)
    inv2_0 = float(profile.eval(0.0)) ** -2

    q = np.array([_quad_node(profile, inv2_0, y) for y in y_grid])
    if q.min() <= 0.0:
        raise WeightQuadratureError("weight is not positive: upstream profile defect")

    om = profile.eval(y_grid, 0)
    om1 = profile.eval(y_grid, 1)
    q1 = 0.5 * y_grid * q - (om**-2 - inv2_0)
    q2 = 0.5 * y_grid * q1 + 0.5 * q + 2.0 * om**-3 * om1

    w = WeightFunction(theta=profile.theta, y_grid=y_grid, q=q, q1=q1, q2=q2)
    w.c_lower, w.c_upper, w.c_d1, w.c_d2 = weight_bound_constants(w, profile.theta)
    return w


def weight_inequality_margin(w: WeightFunction, profile) -> float:
    """Max over the grid of q'' + (2 Om'/Om - y/2) q' - (y Om'/Om + 1/2) q.

    Nonpositivity is the coercivity inequality; the margin should sit at the
    quadrature floor (<= 1e-8) for a valid weight.
    """
    y = w.y_grid
    om = profile.eval(y, 0)
    om1 = profile.eval(y, 1)
    ratio = om1 / om
    lhs = w.q2 + (2.0 * ratio - 0.5 * y) * w.q1 - (y * ratio + 0.5) * w.q
    return float(np.max(lhs))


def weight_bound_constants(w: WeightFunction, theta: float):
    """Tightest grid constants for the sandwich and derivative growth bounds."""
    base = 1.0 + np.abs(w.y_grid) ** (4.0 * theta - 1.0)
    c_lower = float(np.min(w.q / base))
    c_upper = float(np.max(w.q / base))
    c_d1 = float(np.max(np.abs(w.y_grid * w.q1) / base))
    c_d2 = float(np.max(np.abs(w.q2) / base))
    return c_lower, c_upper, c_d1, c_d2


def tail_correction_report(w: WeightFunction, profile,
                           window: tuple[float, float] = (10.0, 20.0)) -> dict:
    """Compare the two candidate correction exponents for the q tail.

    The leading law is q ~ (2/c0^2) y^(4*theta-1); the stated correction order
    is y^(4*theta-3) while the integration-by-parts derivation produces
    y^(4*theta-1-2*varsigma).  Both single-term corrections are fitted by
    least squares and their residuals reported (they coincide when
    varsigma = 1).
    """
    theta = w.theta
    vs = profile.varsigma
    mask = (w.y_grid >= window[0]) & (w.y_grid <= window[1])
    y = w.y_grid[mask]
    lead = (2.0 / profile.c0**2) * y ** (4.0 * theta - 1.0)
    resid = w.q[mask] - lead

    out = {"window": list(window)}
    for label, expo in (("exponent_4th_minus_3", 4.0 * theta - 3.0),
                        ("exponent_4th_minus_1_minus_2vs", 4.0 * theta - 1.0 - 2.0 * vs)):
        basis = y**expo
        amp = float(basis @ resid / (basis @ basis))
        rms = float(np.sqrt(np.mean((resid - amp * basis) ** 2)))
        out[label] = {"exponent": expo, "amplitude": amp, "rms": rms}
    a = out["exponent_4th_minus_3"]["rms"]
    b = out["exponent_4th_minus_1_minus_2vs"]["rms"]
    out["better_model"] = ("4theta-3" if a <= b else "4theta-1-2varsigma")
    return out


def export_weight_csv(w: WeightFunction, path) -> None:
    data = np.column_stack([w.y_grid, w.q, w.q1, w.q2])
    np.savetxt(path, data, delimiter=",", header="y,q,q1,q2", comments="", fmt="%.16g")
