"""IMEX integrator for the damped beam equation on a truncated interval.

First-order form in (u, w = u_t):

    u_t = w
    w_t = -b(t) w + a(t) u_xx - u_xxxx - |u|^(p-1) u

The linear stiff part (fourth-order term, a(t) u_xx, damping) is advanced by
a trapezoidal step with coefficients frozen at t + dt/2; the nonlinearity is
explicit at the half step through the extrapolation u + (dt/2) w.  Eliminating
w^{n+1} leaves one pentadiagonal solve per step in the interior u-unknowns:

    [(1+kB) I + k^2 (D4 - A D2)] u^{n+1} = (1+kB) u^n - k^2 L u^n
                                           + dt w^n + k dt N_half + bc terms,

with k = dt/2, A = a(t+dt/2), B = b(t+dt/2), L = D4 - A D2.

Boundary closure is simply supported: u and u_xx take prescribed end values
(zero by default), which fixes one ghost node per side and keeps D4 pentadiagonal.
For runs launched from the profile ansatz the end values follow the ansatz
itself (`ProfileBoundary`); a homogeneous clamp instead leaves an O(L^(-2*theta))
mismatch against the fat algebraic tail that never decays and buries the
convergence measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .model import ModelParams, gamma_eval

__all__ = [
    "GridCompatibilityError",
    "NumericalBlowupError",
    "SpatialGrid",
    "PhysicalState",
    "PerturbationSpec",
    "BoundaryData",
    "HomogeneousBoundary",
    "ProfileBoundary",
    "BeamSolver",
    "initialize",
    "apply_spatial_operator",
    "step",
    "evolve",
    "export_snapshot_csv",
]


class GridCompatibilityError(RuntimeError):
    """Initial data incompatible with the truncated-domain boundary values."""


class NumericalBlowupError(RuntimeError):
    """NaN/amplitude guard tripped during time stepping."""


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 257:
            raise ValueError("n must be at least 257")
        if not math.isclose(self.x_min, -self.x_max):
            raise ValueError("grid must be symmetric about 0")
        if self.x_max <= 0.0:
            raise ValueError("x_max must be positive")

    @classmethod
    def symmetric(cls, L: float, n: int) -> "SpatialGrid":
        return cls(x_min=-L, x_max=L, n=n)

    @property
    def L(self) -> float:
        return self.x_max

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    def coverage_ratio(self, R_plus_1: float) -> float:
        """Width of the resolved self-similar window, L / sqrt(R(t)+1)."""
        return self.L / math.sqrt(R_plus_1)


@dataclass
class PhysicalState:
    t: float
    grid: SpatialGrid
    u: np.ndarray
    ut: np.ndarray

    def copy(self) -> "PhysicalState":
        return PhysicalState(self.t, self.grid, self.u.copy(), self.ut.copy())


@dataclass(frozen=True)
class PerturbationSpec:
    """Gaussian bump added to the profile ansatz at start time."""

    amplitude: float = 0.0
    width: float = 1.0
    applies_to: str = "u"
    shape: str = "gaussian"

    def __post_init__(self) -> None:
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be nonnegative")
        if self.width <= 0.0:
            raise ValueError("width must be positive")
        if self.applies_to not in ("u", "ut", "both"):
            raise ValueError("applies_to must be 'u', 'ut' or 'both'")
        if self.shape != "gaussian":
            raise ValueError("only the gaussian bump shape is supported")

    def bump(self, xs: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * (xs / self.width) ** 2)


class BoundaryData:
    """Time-dependent simply-supported end data: values, curvatures, velocities."""

    def values(self, t: float) -> tuple[float, float]:
        raise NotImplementedError

    def curvatures(self, t: float) -> tuple[float, float]:
        raise NotImplementedError

    def velocities(self, t: float) -> tuple[float, float]:
        raise NotImplementedError


class HomogeneousBoundary(BoundaryData):
    """u = u_xx = 0 at both ends."""

    def values(self, t: float) -> tuple[float, float]:
        return (0.0, 0.0)

    curvatures = values
    velocities = values


HOMOGENEOUS = HomogeneousBoundary()


class ProfileBoundary(BoundaryData):
    """End data following the profile ansatz (even in x, so both ends agree)."""

    def __init__(self, params: ModelParams, profile, L: float) -> None:
        self.params = params
        self.profile = profile
        self.L = L
        self._xs = np.array([L])

    def _fields(self, t: float):
        return gamma_eval(self.params, self.profile, t, self._xs)

    def values(self, t: float) -> tuple[float, float]:
        v = float(self._fields(t).gamma[0])
        return (v, v)

    def curvatures(self, t: float) -> tuple[float, float]:
        c = float(self._fields(t).gamma_xx[0])
        return (c, c)

    def velocities(self, t: float) -> tuple[float, float]:
        v = float(self._fields(t).gamma_t[0])
        return (v, v)


def _ghosts(u: np.ndarray, dx: float, values, curvatures):
    """One ghost node per side from u = value, u_xx = curvature at the ends."""
    uL, uR = values
    cL, cR = curvatures
    gl = 2.0 * uL - u[1] + dx * dx * cL
    gr = 2.0 * uR - u[-2] + dx * dx * cR
    return gl, gr


def apply_spatial_operator(state: PhysicalState, params: ModelParams | None = None,
                           boundary: BoundaryData = HOMOGENEOUS):
    """Second-order u_xx and 5-point u_xxxx with the simply-supported closure.

    The coefficient factors a(t) are applied by the stepper, not here.  End
    entries carry the prescribed curvature (u_xx) and a closure padding
    (u_xxxx) that the interior scheme never reads.
    """
    u = state.u
    dx = state.grid.dx
    t = state.t
    gl, gr = _ghosts(u, dx, boundary.values(t), boundary.curvatures(t))
    cL, cR = boundary.curvatures(t)

    uxx = np.empty_like(u)
    uxx[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
    uxx[0], uxx[-1] = cL, cR

    uxxxx = np.empty_like(u)
    uxxxx[2:-2] = (u[4:] - 4.0 * u[3:-1] + 6.0 * u[2:-2] - 4.0 * u[1:-3] + u[:-4]) / dx**4
    uxxxx[1] = (gl - 4.0 * u[0] + 6.0 * u[1] - 4.0 * u[2] + u[3]) / dx**4
    uxxxx[-2] = (gr - 4.0 * u[-1] + 6.0 * u[-2] - 4.0 * u[-3] + u[-4]) / dx**4
    uxxxx[0], uxxxx[-1] = uxxxx[1], uxxxx[-2]
    return uxx, uxxxx


def initialize(params: ModelParams, profile, t0: float, grid: SpatialGrid,
               pert: PerturbationSpec, boundary: BoundaryData = HOMOGENEOUS,
               boundary_tol: float = 1e-6) -> PhysicalState:
    """Profile ansatz plus gaussian bump, with end nodes set to the boundary data.

    Raises GridCompatibilityError when the raw data disagrees with the imposed
    end values by more than boundary_tol of the peak, which is the signature
    of a grid too small for the ansatz support.
    """
    xs = grid.xs
    g = gamma_eval(params, profile, t0, xs)
    bump = pert.amplitude * pert.bump(xs)
    u = g.gamma + (bump if pert.applies_to in ("u", "both") else 0.0)
    ut = g.gamma_t + (bump if pert.applies_to in ("ut", "both") else 0.0)

    uL, uR = boundary.values(t0)
    peak = float(np.max(np.abs(u))) or 1.0
    mismatch = max(abs(u[0] - uL), abs(u[-1] - uR))
    if mismatch > boundary_tol * peak:
        raise GridCompatibilityError(
            f"boundary mismatch {mismatch:.3e} exceeds {boundary_tol:.1e} of peak "
            f"{peak:.3e}: grid too small for the ansatz support")
    u[0], u[-1] = uL, uR
    vL, vR = boundary.velocities(t0)
    ut[0], ut[-1] = vL, vR
    return PhysicalState(t=t0, grid=grid, u=u, ut=ut)


class BeamSolver:
    """Owns grid, coefficients and boundary data; advances PhysicalState."""

    def __init__(self, params: ModelParams, grid: SpatialGrid,
                 boundary: BoundaryData = HOMOGENEOUS,
                 nonlinearity: bool = True) -> None:
        self.params = params
        self.grid = grid
        self.boundary = boundary
        self.nonlinearity = nonlinearity
        dx = grid.dx
        m = grid.n - 2
        self._m = m
        self._dx = dx
        # interior pentadiagonal stencil diagonals for D4 and tridiagonal D2
        d4_diag = np.full(m, 6.0 / dx**4)
        d4_diag[0] = d4_diag[-1] = 5.0 / dx**4
        self._d4_diag = d4_diag
        self._d4_off1 = -4.0 / dx**4
        self._d4_off2 = 1.0 / dx**4
        self._d2_diag = -2.0 / dx**2
        self._d2_off1 = 1.0 / dx**2

    def _coeffs(self, t: float) -> tuple[float, float]:
        op = 1.0 + t
        return (op**self.params.alpha, self.params.b0 * op**self.params.beta)

    def _bc_vectors(self, t: float):
        """Interior-RHS contributions of the prescribed end data at time t."""
        dx = self._dx
        uL, uR = self.boundary.values(t)
        cL, cR = self.boundary.curvatures(t)
        e2 = np.zeros(self._m)
        e4 = np.zeros(self._m)
        e2[0] = uL / dx**2
        e2[-1] = uR / dx**2
        e4[0] = (-2.0 * uL + dx * dx * cL) / dx**4
        e4[1] = uL / dx**4
        e4[-1] = (-2.0 * uR + dx * dx * cR) / dx**4
        e4[-2] = uR / dx**4
        return e2, e4

    def step(self, state: PhysicalState, dt: float) -> PhysicalState:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        p = self.params.p
        t = state.t
        k = 0.5 * dt
        A, B = self._coeffs(t + k)

        uxx, uxxxx = apply_spatial_operator(state, self.params, self.boundary)
        lin_n = uxxxx[1:-1] - A * uxx[1:-1]

        rhs = ((1.0 + k * B) * state.u[1:-1] - k * k * lin_n + dt * state.ut[1:-1])
        if self.nonlinearity:
            uh = state.u + k * state.ut
            rhs += k * dt * (-(np.abs(uh) ** (p - 1.0) * uh))[1:-1]
        e2, e4 = self._bc_vectors(t + dt)
        rhs += k * k * (A * e2 - e4)

        m = self._m
        ab = np.zeros((5, m))
        kk = k * k
        ab[0, 2:] = kk * self._d4_off2
        ab[1, 1:] = kk * (self._d4_off1 - A * self._d2_off1)
        ab[2, :] = (1.0 + k * B) + kk * (self._d4_diag - A * self._d2_diag)
        ab[3, :-1] = ab[1, 1:]
        ab[4, :-2] = ab[0, 2:]

        try:
            u_new_int = solve_banded((2, 2), ab, rhs)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise NumericalBlowupError(f"singular banded system at t={t}") from exc
        if not np.all(np.isfinite(u_new_int)):
            raise NumericalBlowupError(f"non-finite update at t={t} (dt={dt})")

        t_new = t + dt
        u_new = np.empty_like(state.u)
        u_new[1:-1] = u_new_int
        u_new[0], u_new[-1] = self.boundary.values(t_new)
        ut_new = np.empty_like(state.ut)
        ut_new[1:-1] = (2.0 / dt) * (u_new_int - state.u[1:-1]) - state.ut[1:-1]
        ut_new[0], ut_new[-1] = self.boundary.velocities(t_new)
        return PhysicalState(t=t_new, grid=state.grid, u=u_new, ut=ut_new)

    def evolve(self, state: PhysicalState, t_end: float, sample_times,
               dt: float, observer=None,
               amplitude_cap: float | None = None) -> list[PhysicalState]:
        """Fixed-dt stepping with snapshots at the nearest step to each time."""
        if t_end <= state.t:
            raise ValueError("t_end must exceed the state time")
        n_steps = int(round((t_end - state.t) / dt))
        targets = sorted({min(max(int(round((tau - state.t) / dt)), 0), n_steps)
                          for tau in sample_times})
        snapshots: list[PhysicalState] = []

        def record(snapshot: PhysicalState) -> None:
            snap = snapshot.copy()
            snapshots.append(snap)
            if observer is not None:
                observer(snap)

        if targets and targets[0] == 0:
            record(state)
            targets = targets[1:]
        current = state
        for i in range(1, n_steps + 1):
            current = self.step(current, dt)
            if amplitude_cap is not None:
                peak = float(np.max(np.abs(current.u)))
                if peak > amplitude_cap:
                    raise NumericalBlowupError(
                        f"amplitude {peak:.3e} exceeded cap {amplitude_cap:.3e} "
                        f"at t={current.t:.4f}")
            if targets and i == targets[0]:
                record(current)
                targets = targets[1:]
        return snapshots


def step(state: PhysicalState, dt: float, params: ModelParams,
         boundary: BoundaryData = HOMOGENEOUS,
         nonlinearity: bool = True) -> PhysicalState:
    return BeamSolver(params, state.grid, boundary, nonlinearity).step(state, dt)


def evolve(state: PhysicalState, t_end: float, sample_times, params: ModelParams,
           dt: float, boundary: BoundaryData = HOMOGENEOUS, observer=None,
           nonlinearity: bool = True,
           amplitude_cap: float | None = None) -> list[PhysicalState]:
    solver = BeamSolver(params, state.grid, boundary, nonlinearity)
    return solver.evolve(state, t_end, sample_times, dt, observer, amplitude_cap)


def export_snapshot_csv(state: PhysicalState, path) -> None:
    data = np.column_stack([state.grid.xs, state.u, state.ut])
    np.savetxt(path, data, delimiter=",", header="x,u,ut", comments="", fmt="%.16g")
