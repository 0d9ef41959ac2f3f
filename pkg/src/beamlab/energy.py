"""Weighted norms, energy functionals, identity checks and decay fits.

Conventions
-----------
- Weighted L2 norm of order ell:   ||u||^2 = Integral (1 + |y|^{2 ell}) u^2 dy
  for ell >= 1.  At ell = 0 the literal weight would equal 2; the plain
  Sobolev norm (weight 1) is used instead so that H^{k,0} = H^k.
- All functionals are trapezoid quadratures on the state's y-grid.

Identity checks
---------------
The rescaled system with prefactors c1 = r^2 e^{-s}/a, c2 = r'/a,
c3 = e^{-s}/a and drift exponents (l, m) admits exact balance laws for

    E1n = 1/2 Int y^{2n} (f_y^2 + c3 f_yy^2 + c1 g^2),
    E2n = 1/2 Int y^{2n} (f^2 + c1 f g),

whose s-derivatives equal explicit quadratic forms plus a forcing pairing.
`identity_check` measures d/ds of the functional by a three-point stencil on
neighbouring snapshots (robust to slightly nonuniform s spacing) against that
analytic right-hand side; the forcing entering the rearranged system is k + h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ModelParams, derive_params, small_rates
from .selfsim import SelfSimilarState, StructuralTerms

__all__ = [
    "EnergyWeights",
    "EnergySample",
    "DecayReport",
    "weighted_norm",
    "phi",
    "energy_suite",
    "lg_functional",
    "identity_series",
    "identity_check",
    "fit_decay",
    "coercivity_margin",
]


@dataclass(frozen=True)
class EnergyWeights:
    rho: float = 10.0
    vartheta: float = 0.1
    zeta: float = 0.1
    omega_w: float = 0.1

    def __post_init__(self) -> None:
        if min(self.rho, self.vartheta, self.zeta, self.omega_w) <= 0.0:
            raise ValueError("all energy weights must be positive")


@dataclass(frozen=True)
class EnergySample:
    s: float
    t: float
    phi: float
    e2_01: float
    e_q: float
    e_rho: float
    e1_01: float
    e2_1_0: float
    e1_1_0: float
    e_full: float
    norm_g_L21: float
    norm_fyy_L2: float
    norm_gy_L2: float
    norm_h_H01: float
    norm_hy_L2: float
    norm_k_L21: float
    norm_f_L21: float
    sup_error: float
    edge_fraction: float


@dataclass(frozen=True)
class DecayReport:
    mu0: float
    intercept: float
    rms_residual: float
    window: tuple


def _weight(y: np.ndarray, ell: int) -> np.ndarray:
    if ell == 0:
        return np.ones_like(y)
    return 1.0 + np.abs(y) ** (2 * ell)


def weighted_norm(y: np.ndarray, derivs: Sequence[np.ndarray], ell: int = 0,
                  k: int | None = None) -> float:
    """H^{k, ell} norm of a field given [d^0, ..., d^k] on the grid y.

    `k` defaults to the highest order supplied; asking for more than the
    provided derivative arrays is an error.
    """
    if len(derivs) == 0:
        raise ValueError("at least the order-zero field is required")
    if k is None:
        k = len(derivs) - 1
    if k >= len(derivs):
        raise ValueError(f"missing derivative order: need {k + 1} arrays, "
                         f"got {len(derivs)}")
    w = _weight(y, ell)
    total = 0.0
    for arr in derivs[: k + 1]:
        if arr is None:
            raise ValueError("missing derivative order in weighted_norm")
        total += np.trapezoid(w * np.asarray(arr) ** 2, y)
    return math.sqrt(total)


def phi(state: SelfSimilarState, params: ModelParams, s: float | None = None) -> float:
    """The master quadratic form combining f through fyyy and g, gy."""
    rates = small_rates(params, state.s if s is None else s)
    y = state.y_grid
    w1 = 1.0 + y**2
    val = np.trapezoid(w1 * (state.f**2 + state.fy**2), y)
    val += np.trapezoid(state.fyy**2, y)
    val += rates.c3 * np.trapezoid(y**2 * state.fyy**2 + state.fyyy**2, y)
    val += rates.c1 * np.trapezoid(w1 * state.g**2, y)
    val += rates.c1 * np.trapezoid(state.gy**2, y)
    return float(val)


def energy_suite(state: SelfSimilarState, params: ModelParams, profile, weight_fn,
                 weights: EnergyWeights, terms: StructuralTerms | None = None,
                 sup_error: float = math.nan) -> EnergySample:
    """Every functional of the decay ledger at one snapshot."""
    if terms is None:
        from .selfsim import structural_terms

        terms = structural_terms(params, profile, state)
    rates = small_rates(params, state.s)
    c1, c3 = rates.c1, rates.c3
    y = state.y_grid
    f, g = state.f, state.g
    w1 = 1.0 + y**2
    q = weight_fn.eval(y)

    e2_01 = 0.5 * np.trapezoid(w1 * f**2, y) + c1 * np.trapezoid(w1 * f * g, y)
    e_q = 0.5 * np.trapezoid(q * f**2, y) + c1 * np.trapezoid(q * f * g, y)
    e_rho = e2_01 + weights.rho * e_q
    e1_01 = (0.5 * np.trapezoid(w1 * state.fy**2, y)
             + 0.5 * c3 * np.trapezoid(w1 * state.fyy**2, y)
             + 0.5 * c1 * np.trapezoid(w1 * g**2, y))
    e2_1_0 = 0.5 * np.trapezoid(state.fy**2, y) + c1 * np.trapezoid(state.fy * state.gy, y)
    e1_1_0 = (0.5 * np.trapezoid(state.fyy**2, y)
              + 0.5 * c3 * np.trapezoid(state.fyyy**2, y)
              + 0.5 * c1 * np.trapezoid(state.gy**2, y))
    e_full = (e_rho + weights.vartheta * e1_01 + weights.zeta * e2_1_0
              + weights.omega_w * e1_1_0)

    norm_h = weighted_norm(y, [terms.h], 1)
    norm_hy = weighted_norm(y, [np.gradient(terms.h, y)], 0)
    norm_k = weighted_norm(y, [terms.k], 1)

    # share of the leading weighted integrand sitting at the window edge,
    # an honest bound proxy for what truncation at |y| <= y_max discards
    integrand = w1 * (f**2 + state.fy**2)
    total = float(np.trapezoid(integrand, y))
    edge = float(integrand[0] + integrand[-1]) * (y[-1] - y[0]) / max(len(y) - 1, 1)
    edge_fraction = edge / total if total > 0.0 else 0.0

    return EnergySample(
        s=state.s, t=state.t, phi=phi(state, params),
        e2_01=float(e2_01), e_q=float(e_q), e_rho=float(e_rho),
        e1_01=float(e1_01), e2_1_0=float(e2_1_0), e1_1_0=float(e1_1_0),
        e_full=float(e_full),
        norm_g_L21=weighted_norm(y, [g], 1),
        norm_fyy_L2=weighted_norm(y, [state.fyy], 0),
        norm_gy_L2=weighted_norm(y, [state.gy], 0),
        norm_h_H01=float(norm_h), norm_hy_L2=float(norm_hy),
        norm_k_L21=float(norm_k),
        norm_f_L21=weighted_norm(y, [f], 1),
        sup_error=sup_error, edge_fraction=edge_fraction,
    )


def lg_functional(state: SelfSimilarState, params: ModelParams, which: str,
                  n: int) -> float:
    """E1n or E2n evaluated at one snapshot."""
    rates = small_rates(params, state.s)
    y = state.y_grid
    yw = y ** (2 * n) if n else np.ones_like(y)
    if which == "E1":
        integrand = 0.5 * (state.fy**2 + rates.c3 * state.fyy**2 + rates.c1 * state.g**2)
    elif which == "E2":
        # the cross term carries the full c1 (consistent with the balance law
        # and with the order-(0,1) functional; a half there breaks both)
        integrand = 0.5 * state.f**2 + rates.c1 * state.f * state.g
    else:
        raise ValueError("which must be 'E1' or 'E2'")
    return float(np.trapezoid(yw * integrand, y))


def _lg_rhs(state: SelfSimilarState, terms: StructuralTerms, params: ModelParams,
            which: str, n: int, l: float, m: float) -> float:
    """Analytic d/ds of E1n / E2n for the rearranged system with forcing k + h."""
    rates = small_rates(params, state.s)
    c1, c2, c3 = rates.c1, rates.c2, rates.c3
    c1p, c3p = rates.c1_prime, rates.c3_prime
    y = state.y_grid
    f, fy, fyy, g, gy = state.f, state.fy, state.fyy, state.g, state.gy
    forcing = terms.k + terms.h
    yw = y ** (2 * n) if n else np.ones_like(y)

    def integ(arr: np.ndarray) -> float:
        return float(np.trapezoid(arr, y))

    if which == "E1":
        val = (-integ(yw * g**2)
               + (l - (2 * n - 1) / 4.0) * integ(yw * fy**2)
               + (l - (2 * n - 3) / 4.0) * c3 * integ(yw * fyy**2)
               + (m - (2 * n + 1) / 4.0) * c1 * integ(yw * g**2)
               + (0.5 * c1p - c2) * integ(yw * g**2)
               + 0.5 * c3p * integ(yw * fyy**2)
               + integ(yw * forcing * g))
        if n >= 1:
            val += (-2.0 * n * integ(y ** (2 * n - 1) * fy * g)
                    - 4.0 * n * c3 * integ(y ** (2 * n - 1) * fyy * gy)
                    - 2.0 * n * (2 * n - 1) * c3 * integ(y ** (2 * n - 2) * fyy * g))
        return val

    if which == "E2":
        val = (-integ(yw * fy**2)
               + (l - (2 * n + 1) / 4.0) * integ(yw * f**2)
               + (m + l - (2 * n + 1) / 2.0) * c1 * integ(yw * f * g)
               - c3 * integ(yw * fyy**2)
               + c1 * integ(yw * g**2)
               - c2 * integ(yw * f * g)
               + c1p * integ(yw * f * g)
               + integ(yw * forcing * f))
        if n >= 1:
            val += (-2.0 * n * (2 * n - 1) * c3 * integ(y ** (2 * n - 2) * fyy * f)
                    + 2.0 * n * (2 * n - 1) * c3 * integ(y ** (2 * n - 2) * fy**2)
                    + n * (2 * n - 1) * integ(y ** (2 * n - 2) * f**2))
        return val

    raise ValueError("which must be 'E1' or 'E2'")


def identity_series(trajectory: Sequence[tuple[SelfSimilarState, StructuralTerms]],
                    params: ModelParams, which: str = "E2", n: int = 0,
                    l: float | None = None, m: float | None = None,
                    floor: float = 1e-12):
    """Per-sample relative mismatch of the balance law on interior snapshots."""
    if len(trajectory) < 3:
        raise ValueError("identity check needs at least 3 samples")
    derived = derive_params(params)
    l = derived.theta if l is None else l
    m = derived.theta + 1.0 if m is None else m

    s_vals = np.array([st.s for st, _ in trajectory])
    e_vals = np.array([lg_functional(st, params, which, n) for st, _ in trajectory])

    mism = np.empty(len(trajectory) - 2)
    for j in range(1, len(trajectory) - 1):
        s0, s1, s2 = s_vals[j - 1 : j + 2]
        e0, e1, e2 = e_vals[j - 1 : j + 2]
        # three-point derivative, exact on quadratics for nonuniform spacing
        dds = (e0 * (s1 - s2) / ((s0 - s1) * (s0 - s2))
               + e1 * (2 * s1 - s0 - s2) / ((s1 - s0) * (s1 - s2))
               + e2 * (s1 - s0) / ((s2 - s0) * (s2 - s1)))
        rhs = _lg_rhs(trajectory[j][0], trajectory[j][1], params, which, n, l, m)
        mism[j - 1] = abs(dds - rhs) / (abs(rhs) + floor)
    return s_vals[1:-1], mism


def identity_check(trajectory, params: ModelParams, which: str = "E2", n: int = 0,
                   l: float | None = None, m: float | None = None,
                   floor: float = 1e-12) -> float:
    """Max relative mismatch of the chosen balance law over the trajectory."""
    _, mism = identity_series(trajectory, params, which, n, l, m, floor)
    return float(np.max(mism))


def fit_decay(samples: Sequence[tuple[float, float]],
              window: tuple[float, float]) -> DecayReport:
    """Least squares on log(value) over an s-window; -slope is the rate."""
    pts = [(s, v) for s, v in samples if window[0] <= s <= window[1]]
    if len(pts) < 2:
        raise ValueError("fewer than 2 samples in the fit window")
    s = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.any(v <= 0.0):
        raise ValueError("non-positive values in decay-fit window")
    if s[-1] - s[0] < 1.0:
        raise ValueError("decay-fit window spans less than 1 in s")
    slope, intercept = np.polyfit(s, np.log(v), 1)
    resid = np.log(v) - (slope * s + intercept)
    return DecayReport(mu0=float(-slope), intercept=float(intercept),
                       rms_residual=float(np.sqrt(np.mean(resid**2))),
                       window=(float(s[0]), float(s[-1])))


def coercivity_margin(theta: float, M: float) -> float:
    """(theta + 3/4)/M^2 + (theta - 3/4)/2 — nonpositive once M is large enough."""
    return (theta + 0.75) / M**2 + (theta - 0.75) / 2.0
