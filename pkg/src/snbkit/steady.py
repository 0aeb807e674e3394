"""Exact T-periodic steady states and the duty-cycle residual.

A candidate periodic solution is parameterized by the switching time d:
propagate stage S1 over [0, d] and stage S2 over [d, T] and close the
loop. The scalar residual ``y(d) - h(d)`` then selects the duty cycles at
which the switching condition is actually met; its sign-change roots are
the T-periodic solutions. Two such roots merging is the saddle-node
scenario for the converter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matnum
from .errors import DegenerateOrbitError, UnsupportedSchemeError
from .model import ConverterModel

# duty range scanned for periodic solutions, as a fraction of T; the
# endpoints are duty saturation (border collision), not saddle-node
DUTY_MARGIN = 1e-4

_COND_LIMIT = 1e13


@dataclass(frozen=True)
class PeriodicOrbit:
    """One T-periodic solution candidate at switching time d.

    ``x0_0`` is the state at the clock edge, ``x0_d`` at the switching
    instant; ``xdot_minus`` / ``xdot_plus`` are the state slopes just
    before and after the switch, and ``residual`` is y(d) - h(d) (zero on
    an actual solution).
    """

    d: float
    D: float
    x0_0: np.ndarray
    x0_d: np.ndarray
    xdot_minus: np.ndarray
    xdot_plus: np.ndarray
    y0_d: float
    residual: float


def ramp_value(m: ConverterModel, d: float) -> float:
    """Un-wrapped ramp value at 0 <= d <= T (no sawtooth reset at d = T)."""
    return m.ramp.offset + m.hdot * d


def _solve_orbit(m: ConverterModel, d: float):
    """x0(d) together with the stage maps, via the two-stage loop closure."""
    e1, p1 = matnum.expm_pair(m.A1, d)
    e2, p2 = matnum.expm_pair(m.A2, m.T - d)
    loop = np.eye(m.n) - e1 @ e2
    if np.linalg.cond(loop) > _COND_LIMIT:
        raise DegenerateOrbitError(
            f"open-loop return map has a unit multiplier at d = {d:.6g}"
        )
    rhs = e1 @ (p2 @ (m.B2 @ m.u)) + p1 @ (m.B1 @ m.u)
    return np.linalg.solve(loop, rhs), e1, p1, e2, p2


def orbit_state_at_d(m: ConverterModel, d: float) -> np.ndarray:
    """State x0(d) at the switching instant of the d-parameterized orbit."""
    if not 0.0 <= d <= m.T:
        raise ValueError(f"need 0 <= d <= T, got d = {d}")
    x0d, *_ = _solve_orbit(m, d)
    return x0d


def buck_orbit_state(m: ConverterModel, d: float) -> np.ndarray:
    """x0(d) through the single-matrix buck shortcut.

    Valid only when the buck invariants hold (shared plant matrix,
    source driving stage S1 only); agrees with the general formula and
    serves as an independent cross-check of it.
    """
    if m.topology != "buck":
        raise UnsupportedSchemeError("buck_orbit_state needs a buck model")
    a = m.A1
    e1, _ = matnum.expm_pair(a, d)
    et, _ = matnum.expm_pair(a, m.T)
    b11 = m.B1[:, 0]
    b12 = m.B1[:, 1]
    vs, vr = m.u
    lhs = np.linalg.solve(np.eye(m.n) - et, np.linalg.solve(a, (e1 - np.eye(m.n)) @ b11) * vs)
    return lhs - np.linalg.solve(a, b12) * vr


def boost_state_kernel(m: ConverterModel, d: float) -> np.ndarray:
    """Kernel X(d) with x0(d) = X(d) B1 u, available whenever B1 == B2."""
    if not np.array_equal(m.B1, m.B2):
        raise UnsupportedSchemeError("state kernel needs B1 == B2")
    e1, p1 = matnum.expm_pair(m.A1, d)
    e2, p2 = matnum.expm_pair(m.A2, m.T - d)
    loop = np.eye(m.n) - e1 @ e2
    if np.linalg.cond(loop) > _COND_LIMIT:
        raise DegenerateOrbitError(
            f"open-loop return map has a unit multiplier at d = {d:.6g}"
        )
    return np.linalg.solve(loop, e1 @ p2 + p1)


def residual(m: ConverterModel, d: float) -> float:
    """Switching-condition residual r(d) = y(d) - h(d) on the d-orbit.

    Reported in the units of y (volts for voltage feedback, amperes for
    current-mode). A root of r is a T-periodic solution candidate.
    """
    x0d = orbit_state_at_d(m, d)
    return float(m.Crow @ x0d + m.Drow @ m.u - ramp_value(m, d))


def residual_curve(m: ConverterModel, d_grid: np.ndarray) -> np.ndarray:
    """r(d) on a uniformly spaced grid of switching times.

    Uses cumulative products of one per-step transition matrix per stage,
    which keeps a 2000-point scan cheap. Accumulated roundoff is far below
    bracketing needs; exact refinement should go through :func:`residual`.
    """
    d_grid = np.asarray(d_grid, dtype=float)
    steps = np.diff(d_grid)
    if len(d_grid) < 2 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ValueError("residual_curve needs a uniform grid with >= 2 points")
    npts = len(d_grid)
    n = m.n
    step = float(steps[0])

    def _cumulative(a, t0, dt):
        e0, p0 = matnum.expm_pair(a, t0)
        es, ps = matnum.expm_pair(a, dt)
        exps = np.empty((npts, n, n))
        ints = np.empty((npts, n, n))
        e, p = e0, p0
        for k in range(npts):
            exps[k], ints[k] = e, p
            e, p = e @ es, e @ ps + p
        return exps, ints

    e1s, p1s = _cumulative(m.A1, float(d_grid[0]), step)
    # stage-2 horizons T - d shrink with d: accumulate from the far end
    e2r, p2r = _cumulative(m.A2, m.T - float(d_grid[-1]), step)
    e2s, p2s = e2r[::-1], p2r[::-1]

    loop = np.eye(n) - e1s @ e2s
    rhs = e1s @ (p2s @ (m.B2 @ m.u))[..., None] + p1s @ (m.B1 @ m.u)[:, None]
    x0d = np.linalg.solve(loop, rhs)[..., 0]
    y = x0d @ m.Crow + m.Drow @ m.u
    return y - (m.ramp.offset + m.hdot * d_grid)


def make_orbit(m: ConverterModel, d: float) -> PeriodicOrbit:
    """Expand a switching time into a full PeriodicOrbit record."""
    x0d, _, _, e2, p2 = _solve_orbit(m, d)
    x00 = e2 @ x0d + p2 @ (m.B2 @ m.u)
    xdot_minus = m.A1 @ x0d + m.B1 @ m.u
    xdot_plus = m.A2 @ x0d + m.B2 @ m.u
    y0d = float(m.Crow @ x0d + m.Drow @ m.u)
    return PeriodicOrbit(
        d=float(d),
        D=float(d / m.T),
        x0_0=x00,
        x0_d=x0d,
        xdot_minus=xdot_minus,
        xdot_plus=xdot_plus,
        y0_d=y0d,
        residual=y0d - ramp_value(m, d),
    )


def periodic_solutions(
    m: ConverterModel,
    n_grid: int = 2000,
    duty_margin: float = DUTY_MARGIN,
    tol: float | None = None,
) -> list[PeriodicOrbit]:
    """All sign-change-isolated roots of the residual, as full orbits.

    Scans d over (duty_margin*T, (1-duty_margin)*T) on n_grid points and
    bisects each bracket on the exact residual down to width ``tol``
    (default 1e-12 * T). An empty list is a valid answer (no T-periodic
    solution in the scanned duty range).
    """
    T = m.T
    if tol is None:
        tol = 1e-12 * T
    grid = np.linspace(duty_margin * T, (1.0 - duty_margin) * T, n_grid)
    curve = residual_curve(m, grid)
    roots: list[float] = []
    for k in range(n_grid - 1):
        if curve[k] == 0.0:
            roots.append(float(grid[k]))
            continue
        if curve[k] * curve[k + 1] >= 0.0:
            continue
        a, b = float(grid[k]), float(grid[k + 1])
        fa, fb = residual(m, a), residual(m, b)
        if fa * fb > 0.0:
            # scan/exact disagreement within roundoff: root sits at a grid
            # point; widen by one cell on the smaller-magnitude side
            if abs(fa) < abs(fb) and k > 0:
                a = float(grid[k - 1])
                fa = residual(m, a)
            elif k + 2 < n_grid:
                b = float(grid[k + 2])
                fb = residual(m, b)
            if fa * fb > 0.0:
                continue
        roots.append(matnum.bisect_root(residual_of(m), a, b, fa, fb, tol))
    if curve[-1] == 0.0:
        roots.append(float(grid[-1]))
    return [make_orbit(m, d) for d in sorted(roots)]


def residual_of(m: ConverterModel):
    """The residual as a plain scalar function of d (for root finders)."""
    return lambda d: residual(m, d)


def buck_steadystate_snb_residual(m: ConverterModel, d: float) -> float:
    """Steady-state flat-slope condition for the buck, scaled by T.

    Equals T * dr/dd: crosses zero exactly where two duty-cycle roots of
    the residual merge. Defined only on models with the buck invariants.
    """
    if m.topology != "buck":
        raise UnsupportedSchemeError(
            "steady-state flat-slope shortcut needs the buck invariants"
        )
    a = m.A1
    e1, _ = matnum.expm_pair(a, d)
    et, _ = matnum.expm_pair(a, m.T)
    vs = m.u[0]
    slope = m.Crow @ np.linalg.solve(np.eye(m.n) - et, e1 @ m.B1[:, 0]) * vs
    return float(m.T * slope - m.ramp.amplitude)
