"""Stroboscopic simulation, bifurcation sweeps and precise SNB location.

The clock-to-clock map propagates stage S1 until the feedback signal
meets the ramp, then stage S2 to the end of the period. Sweeps do NOT
iterate that map to find branches: unstable solutions are invisible to
simulation, so every branch point comes from root finding on the
steady-state residual, with the map only used as an independent
cross-check (``fd_jacobian``). Simulation is strictly two-stage
continuous-conduction: inductor-current zero crossings are not
intercepted, so discontinuous-mode attractors are out of scope.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import matnum, sdstab, steady
from .errors import (
    NoSnbInBracketError,
    NonConvergenceError,
    NumericError,
    SingularMatrixError,
)
from .model import BUCK, ConverterModel, with_param
from .sdstab import Classification, StabilityReport
from .steady import PeriodicOrbit

logger = logging.getLogger(__name__)

EVENT_SUBINTERVALS = 64
EVENT_TOL_FRACTION = 1e-12


@dataclass(frozen=True)
class BranchPoint:
    """One periodic solution found during a parameter sweep."""

    param: float
    d: float
    D: float
    x0_0: np.ndarray
    v_o: float
    classification: Classification
    max_multiplier: complex


@dataclass(frozen=True)
class SweepResult:
    param_name: str
    param_values: np.ndarray
    branches: list[BranchPoint]

    def at(self, param: float) -> list[BranchPoint]:
        return [b for b in self.branches if b.param == param]


@dataclass(frozen=True)
class SnbPoint:
    """Located saddle-node point: parameter, duty ratio, solver residual."""

    param_star: float
    D_star: float
    residual_norm: float


def _stage1_output(m: ConverterModel, x: np.ndarray, t: float) -> float:
    """y(t) - h(t) while riding stage S1 from state x at the clock edge."""
    e, p = matnum.expm_pair(m.A1, t)
    xt = e @ x + p @ (m.B1 @ m.u)
    return float(m.Crow @ xt + m.Drow @ m.u - (m.ramp.offset + m.hdot * t))


def strobe_step(m: ConverterModel, x) -> tuple[np.ndarray, float]:
    """One clock period of the switched dynamics from state x.

    Stage S1 runs while y(t) > h(t); the first crossing is bracketed on a
    64-subinterval grid of the period and bisected to 1e-12 * T. With
    y(0) <= h(0) the period starts switched (d_event = 0); with no
    crossing the switch stays on (d_event = T).
    """
    x = np.asarray(x, dtype=float)
    T = m.T
    sub = T / EVENT_SUBINTERVALS
    g0 = _stage1_output(m, x, 0.0)
    d_event = None
    if g0 <= 0.0:
        d_event = 0.0
    else:
        e_sub, p_sub = matnum.expm_pair(m.A1, sub)
        drive = p_sub @ (m.B1 @ m.u)
        xk = x.copy()
        g_prev, t_prev = g0, 0.0
        for k in range(1, EVENT_SUBINTERVALS + 1):
            xk = e_sub @ xk + drive
            tk = k * sub
            gk = float(m.Crow @ xk + m.Drow @ m.u - (m.ramp.offset + m.hdot * tk))
            if gk <= 0.0:
                if gk == 0.0:
                    d_event = tk
                else:
                    d_event = matnum.bisect_root(
                        lambda t: _stage1_output(m, x, t),
                        t_prev, tk, g_prev, gk, EVENT_TOL_FRACTION * T,
                    )
                break
            g_prev, t_prev = gk, tk
        if d_event is None:
            d_event = T
    e1, p1 = matnum.expm_pair(m.A1, d_event)
    xd = e1 @ x + p1 @ (m.B1 @ m.u)
    e2, p2 = matnum.expm_pair(m.A2, T - d_event)
    x_next = e2 @ xd + p2 @ (m.B2 @ m.u)
    if not np.isfinite(x_next).all():
        raise OverflowError(f"state diverged within one period from {x}")
    return x_next, float(d_event)


def simulate(m: ConverterModel, x0, n_periods: int) -> list[tuple[int, np.ndarray, float]]:
    """Iterate the clock-to-clock map, logging (period, state, d_event).

    Entry k holds the state after k periods and the switching time during
    period k.
    """
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    x = np.asarray(x0, dtype=float)
    log = []
    for k in range(1, n_periods + 1):
        x, d_event = strobe_step(m, x)
        log.append((k, x.copy(), d_event))
    return log


def branch_sweep(m: ConverterModel, param_name: str, lo: float, hi: float,
                 steps: int) -> SweepResult:
    """Periodic solutions and their stability over a parameter range.

    Every parameter value gets an independent residual root scan; each
    root is expanded, linearized and classified. Failures at individual
    points (degenerate orbits, grazing) are logged and skipped, never
    fatal. Branch records are ordered by parameter, then by duty ratio.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    values = np.linspace(lo, hi, steps)
    branches: list[BranchPoint] = []
    for p in values:
        try:
            mp = with_param(m, param_name, float(p))
            orbits = steady.periodic_solutions(mp)
        except (NumericError, ValueError) as exc:
            logger.warning("sweep: skipping %s = %.6g (%s)", param_name, p, exc)
            continue
        for orb in orbits:
            try:
                rep = sdstab.stability_report(mp, orb)
            except NumericError as exc:
                logger.warning(
                    "sweep: no stability report at %s = %.6g, D = %.4f (%s)",
                    param_name, p, orb.D, exc,
                )
                continue
            lam = rep.multipliers[np.argmax(np.abs(rep.multipliers))]
            branches.append(BranchPoint(
                param=float(p),
                d=orb.d,
                D=orb.D,
                x0_0=orb.x0_0,
                v_o=mp.output_voltage(orb.x0_0),
                classification=rep.classification,
                max_multiplier=complex(lam),
            ))
    branches.sort(key=lambda b: (b.param, b.D))
    return SweepResult(param_name=param_name, param_values=values, branches=branches)


def _root_count(m: ConverterModel, param_name: str, p: float) -> int:
    return len(steady.periodic_solutions(with_param(m, param_name, p)))


def _snb_condition(mp: ConverterModel, D: float) -> float:
    """Second equation of the fold system: flat slope of the residual.

    The buck slope condition is available in closed form; elsewhere a
    central difference of the residual is used.
    """
    if mp.topology == BUCK:
        return sdstab.snb_slope_residual(mp, D)
    h = 1e-6 * D
    T = mp.T
    return (steady.residual(mp, (D + h) * T) - steady.residual(mp, (D - h) * T)) / (2.0 * h * T)


def locate_snb(m: ConverterModel, param_name: str, bracket: tuple[float, float],
               d_guess: float | None = None) -> SnbPoint:
    """Locate a saddle-node point inside a parameter bracket.

    Verifies that the number of periodic solutions changes across the
    bracket (a branch merge), then solves residual = 0 together with the
    flat-slope condition by 2-D Newton in (duty ratio, parameter). If
    Newton fails, falls back to bisection on the root count to a
    parameter tolerance of 1e-6 * bracket width.
    """
    lo, hi = bracket
    if not lo < hi:
        raise ValueError(f"bad bracket [{lo}, {hi}]")
    n_lo = _root_count(m, param_name, lo)
    n_hi = _root_count(m, param_name, hi)
    if n_lo == n_hi:
        raise NoSnbInBracketError(
            f"root count does not change over {param_name} in [{lo:.6g}, {hi:.6g}] "
            f"({n_lo} solutions at both ends)"
        )

    # initial point: the parameter endpoint (or interior probe) with the
    # richer root structure, duty at the midpoint of the closest root pair
    D0, p0 = d_guess, None
    probes = np.linspace(lo, hi, 7)
    best_gap = np.inf
    for p in probes:
        try:
            sols = steady.periodic_solutions(with_param(m, param_name, float(p)))
        except NumericError:
            continue
        if len(sols) >= 2:
            duties = sorted(o.D for o in sols)
            gaps = np.diff(duties)
            k = int(np.argmin(gaps))
            if gaps[k] < best_gap:
                best_gap = float(gaps[k])
                p0 = float(p)
                if d_guess is None:
                    D0 = 0.5 * (duties[k] + duties[k + 1])
    if p0 is None:
        p0 = 0.5 * (lo + hi)
    if D0 is None:
        D0 = 0.5
    if d_guess is not None and d_guess > 1.0:
        D0 = d_guess / m.T  # accept a switching time as the guess

    scale_r, scale_s = _fold_scales(m, param_name, p0, D0)

    def fold_system(D, p):
        mp = with_param(m, param_name, p)
        r = steady.residual(mp, D * mp.T)
        s = _snb_condition(mp, D)
        return r / scale_r, s / scale_s

    try:
        D_star, p_star = matnum.newton_2d(fold_system, (D0, p0), tol=1e-8, max_iter=60)
        if not 0.0 < D_star < 1.0:
            raise NonConvergenceError("fold left the duty interval", best=(D_star, p_star))
        res = fold_system(D_star, p_star)
        return SnbPoint(param_star=p_star, D_star=D_star,
                        residual_norm=float(np.max(np.abs(res))))
    except (NumericError, ValueError) as exc:
        logger.info("locate_snb: Newton failed (%s); bisecting on root count", exc)
        return _locate_by_root_count(m, param_name, lo, hi, n_lo)


def _fold_scales(m, param_name, p0, D0):
    mp = with_param(m, param_name, p0)
    r_probe, s_probe = [], []
    for D in (0.9 * D0, D0, min(1.1 * D0, 0.999)):
        try:
            r_probe.append(abs(steady.residual(mp, D * mp.T)))
            s_probe.append(abs(_snb_condition(mp, D)))
        except NumericError:
            continue
    scale_r = max(max(r_probe, default=0.0), 1e-9)
    scale_s = max(max(s_probe, default=0.0), 1e-9)
    return scale_r, scale_s


def _locate_by_root_count(m, param_name, lo, hi, n_lo):
    tol = 1e-6 * (hi - lo)
    a, b = lo, hi
    while (b - a) > tol:
        mid = 0.5 * (a + b)
        if _root_count(m, param_name, mid) == n_lo:
            a = mid
        else:
            b = mid
    p_star = 0.5 * (a + b)
    # duty from the flat-slope point on the richer side
    rich = a if _root_count(m, param_name, a) > _root_count(m, param_name, b) else b
    sols = steady.periodic_solutions(with_param(m, param_name, rich))
    if len(sols) >= 2:
        duties = sorted(o.D for o in sols)
        gaps = np.diff(duties)
        k = int(np.argmin(gaps))
        d_star = 0.5 * (duties[k] + duties[k + 1])
    elif sols:
        d_star = sols[0].D
    else:
        raise NoSnbInBracketError(
            f"no periodic solution near {param_name} = {p_star:.6g}"
        )
    mp = with_param(m, param_name, p_star)
    res = abs(steady.residual(mp, d_star * mp.T))
    return SnbPoint(param_star=p_star, D_star=d_star, residual_norm=float(res))


def fd_jacobian(m: ConverterModel, orb: PeriodicOrbit, eps: float = 1e-6) -> np.ndarray:
    """Map derivative at the orbit's fixed point by central differences.

    Differentiates one full strobe_step (event location included) around
    x0(0); serves as the independent oracle for the closed-form Jacobian.
    """
    if not 1e-8 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-8, 1e-3], got {eps}")
    x0 = np.asarray(orb.x0_0, dtype=float)
    n = len(x0)
    jac = np.empty((n, n))
    for j in range(n):
        h = eps * max(abs(x0[j]), 1.0)
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        fp, _ = strobe_step(m, xp)
        fm, _ = strobe_step(m, xm)
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac


def refine_stability_boundary(
    m: ConverterModel,
    param_name: str,
    lo: float,
    hi: float,
    orbit_pick: str = "min_d",
    margin_tol: float = 1e-9,
) -> tuple[float, float, StabilityReport]:
    """Bisect a parameter interval onto a |multiplier| = 1 crossing.

    Follows one orbit per parameter value (``orbit_pick``: the lowest- or
    highest-duty root) and bisects on max |multiplier| - 1. Returns the
    critical parameter, the orbit duty there and its stability report,
    whose classification tells the bifurcation type apart.
    """
    if orbit_pick not in ("min_d", "max_d"):
        raise ValueError("orbit_pick must be 'min_d' or 'max_d'")

    def probe(p):
        mp = with_param(m, param_name, p)
        sols = steady.periodic_solutions(mp)
        if not sols:
            raise NoSnbInBracketError(f"no periodic solution at {param_name} = {p:.6g}")
        orb = sols[0] if orbit_pick == "min_d" else sols[-1]
        rep = sdstab.stability_report(mp, orb)
        return rep, orb

    rep_lo, _ = probe(lo)
    rep_hi, _ = probe(hi)
    if rep_lo.margin * rep_hi.margin > 0:
        raise NoSnbInBracketError(
            f"max|multiplier| - 1 does not change sign over "
            f"[{lo:.6g}, {hi:.6g}] ({rep_lo.margin:.3g} and {rep_hi.margin:.3g})"
        )
    a, b, f_a = lo, hi, rep_lo.margin
    rep, orb = rep_lo, None
    while (b - a) > 1e-12 * max(abs(lo), abs(hi)):
        mid = 0.5 * (a + b)
        rep, orb = probe(mid)
        if abs(rep.margin) <= margin_tol:
            return mid, orb.D, rep
        if f_a * rep.margin <= 0:
            b = mid
        else:
            a, f_a = mid, rep.margin
    p = 0.5 * (a + b)
    rep, orb = probe(p)
    return p, orb.D, rep
