"""Sampled-data small-signal stability and slope-based SNB prediction.

The clock-to-clock map of the switched converter is linearized around a
periodic orbit into ``x_{n+1} = Phi x_n``; the Floquet multipliers
(eigenvalues of Phi) classify the orbit. A multiplier at +1 marks the
saddle-node boundary, and eliminating it from det(I - Phi) = 0 yields the
slope-based critical condition S(D) = hdot. The "S plot" samples S over a
duty grid; its crossings with the ramp slope locate the bifurcation
without any parameter sweep.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from . import matnum, steady
from .errors import GrazingError, NumericError, UnsupportedSchemeError
from .model import BOOST, BUCK, CMC_OPEN, MULTILOOP, VMC, ConverterModel
from .steady import PeriodicOrbit

logger = logging.getLogger(__name__)

CLASSIFY_TOL = 1e-3

_CROSS_CHECK_REL = 1e-6  # specialized vs general slope form
_VARIANT_REL = 1e-8  # the two equivalent general forms


class Classification(Enum):
    STABLE = "stable"
    SADDLE_NODE_CRITICAL = "saddle_node_critical"
    PERIOD_DOUBLING_CRITICAL = "period_doubling_critical"
    NEIMARK_CRITICAL = "neimark_critical"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class StabilityReport:
    """Jacobian, multipliers and the resulting label for one orbit."""

    Phi: np.ndarray
    multipliers: np.ndarray
    classification: Classification
    margin: float  # max |multiplier| - 1


@dataclass(frozen=True)
class PlotSeries:
    """A sampled diagnostic curve over a duty-ratio grid.

    ``reference_level`` is the threshold the curve is compared against
    (ramp slope for the S plot, -1 for L1, ...). ``imag_values`` is only
    populated for the complex-valued H plot.
    """

    kind: str
    grid: np.ndarray
    values: np.ndarray
    reference_level: float
    imag_values: np.ndarray | None = None


@dataclass(frozen=True)
class NoSnb:
    """Closed-form verdict that no saddle-node bifurcation can occur."""

    reason: str


def jacobian(m: ConverterModel, orb: PeriodicOrbit) -> np.ndarray:
    """Clock-to-clock Jacobian of the sampled-data map at a periodic orbit.

    Closed form: the stage transition matrices with a rank-one correction
    from the switching-time sensitivity. Requires a transversal crossing;
    a vanishing ``ydot(d-) - hdot`` denominator means the feedback signal
    grazes the ramp and raises GrazingError.
    """
    ydot_minus = float(m.Crow @ orb.xdot_minus)
    den = ydot_minus - m.hdot
    scale = max(abs(ydot_minus), abs(m.hdot), 1.0)
    if abs(den) < 1e-12 * scale:
        raise GrazingError(
            f"switching condition tangent at d = {orb.d:.6g} "
            f"(ydot - hdot = {den:.3g})"
        )
    e1, _ = matnum.expm_pair(m.A1, orb.d)
    e2, _ = matnum.expm_pair(m.A2, m.T - orb.d)
    correction = np.outer(orb.xdot_minus - orb.xdot_plus, m.Crow) / den
    return e2 @ (np.eye(m.n) - correction) @ e1


def classify(multipliers, tol: float = CLASSIFY_TOL) -> Classification:
    """Label a multiplier set; critical classes win over stable/unstable."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam = np.asarray(multipliers, dtype=complex)
    if np.any(np.abs(lam - 1.0) <= tol):
        return Classification.SADDLE_NODE_CRITICAL
    if np.any(np.abs(lam + 1.0) <= tol):
        return Classification.PERIOD_DOUBLING_CRITICAL
    complex_pair = np.abs(lam.imag) > tol
    if np.any(complex_pair & (np.abs(np.abs(lam) - 1.0) <= tol)):
        return Classification.NEIMARK_CRITICAL
    if np.max(np.abs(lam)) < 1.0:
        return Classification.STABLE
    return Classification.UNSTABLE


def stability_report(m: ConverterModel, orb: PeriodicOrbit, tol: float = CLASSIFY_TOL) -> StabilityReport:
    phi = jacobian(m, orb)
    lam = matnum.eigenvalues(phi)
    return StabilityReport(
        Phi=phi,
        multipliers=lam,
        classification=classify(lam, tol),
        margin=float(np.max(np.abs(lam)) - 1.0),
    )


def _slope_terms(m: ConverterModel, D: float):
    """Orbit slopes and the inverse-map kernel shared by the slope forms."""
    d = D * m.T
    orb = steady.make_orbit(m, d)
    delta = orb.xdot_minus - orb.xdot_plus
    w = np.eye(m.n) - scipy.linalg.expm(-m.A2 * (m.T - d)) @ scipy.linalg.expm(-m.A1 * d)
    return d, orb, delta, w


def s_value(m: ConverterModel, D: float) -> float:
    """Slope-based critical function S(D) on the duty-D orbit.

    S(D) = hdot is the exact saddle-node boundary. The general form is
    always evaluated; when the topology allows a specialized matrix form
    (single-matrix for buck, state-kernel form for boost) the two are
    cross-checked and a disagreement beyond 1e-6 relative is a hard error,
    since it indicates a violated model invariant.
    """
    if not 0.0 < D < 1.0:
        raise ValueError(f"need 0 < D < 1, got {D}")
    d, orb, delta, w = _slope_terms(m, D)
    ydot_minus = float(m.Crow @ orb.xdot_minus)
    term = float(m.Crow @ np.linalg.solve(w, delta))
    general = ydot_minus - term
    scale = abs(ydot_minus) + abs(term)

    special = None
    if m.topology == BUCK:
        et, _ = matnum.expm_pair(m.A1, m.T)
        e1, _ = matnum.expm_pair(m.A1, d)
        special = float(
            m.Crow @ np.linalg.solve(np.eye(m.n) - et, e1 @ m.B1[:, 0]) * m.u[0]
        )
    elif np.array_equal(m.B1, m.B2):
        kernel = steady.boost_state_kernel(m, d)
        lam_mat = np.eye(m.n) + (m.A1 - np.linalg.solve(w, m.A1 - m.A2)) @ kernel
        special = float(m.Crow @ lam_mat @ (m.B1 @ m.u))
    if special is not None:
        scale = max(scale, abs(special), 1e-300)
        if abs(general - special) > _CROSS_CHECK_REL * scale:
            raise NumericError(
                f"slope forms disagree at D = {D:.6g}: general = {general:.12g}, "
                f"specialized = {special:.12g} (model invariant violated?)"
            )
    return general


def snb_slope_residual(m: ConverterModel, D: float) -> float:
    """Exact saddle-node condition S(D) - hdot.

    Evaluates both equivalent slope formulations (pre-switch and
    post-switch slopes) and requires them to agree to 1e-8 relative; a
    root of this residual is a duty ratio at which a sampled-data
    multiplier sits at +1.
    """
    s = s_value(m, D)
    d, orb, delta, _ = _slope_terms(m, D)
    ydot_plus = float(m.Crow @ orb.xdot_plus)
    ring = scipy.linalg.expm(m.A2 * (m.T - d)) @ scipy.linalg.expm(m.A1 * d) - np.eye(m.n)
    term = float(m.Crow @ np.linalg.solve(ring, delta))
    variant = ydot_plus - term
    scale = max(abs(s), abs(ydot_plus) + abs(term), 1e-300)
    if abs(s - variant) > _VARIANT_REL * scale:
        raise NumericError(
            f"equivalent slope forms disagree at D = {D:.6g}: "
            f"{s:.12g} vs {variant:.12g}"
        )
    return s - m.hdot


def critical_vs(m: ConverterModel, D: float) -> float:
    """Source voltage at which the duty-D orbit sits on the SNB boundary.

    Solves S(D) = hdot for vs, exploiting that the slope kernel scales
    linearly with the source column.
    """
    if not 0.0 < D < 1.0:
        raise ValueError(f"need 0 < D < 1, got {D}")
    d = D * m.T
    if m.topology == BUCK:
        et, _ = matnum.expm_pair(m.A1, m.T)
        e1, _ = matnum.expm_pair(m.A1, d)
        den = float(m.Crow @ np.linalg.solve(np.eye(m.n) - et, e1 @ m.B1[:, 0]))
        num = m.hdot
    elif np.array_equal(m.B1, m.B2):
        kernel = steady.boost_state_kernel(m, d)
        w = np.eye(m.n) - scipy.linalg.expm(-m.A2 * (m.T - d)) @ scipy.linalg.expm(-m.A1 * d)
        lam_mat = np.eye(m.n) + (m.A1 - np.linalg.solve(w, m.A1 - m.A2)) @ kernel
        den = float(m.Crow @ lam_mat @ m.B1[:, 0])
        num = m.hdot - float(m.Crow @ lam_mat @ m.B1[:, 1]) * m.u[1]
    else:
        raise UnsupportedSchemeError("critical_vs needs buck or B1 == B2 invariants")
    value = num / den if den != 0.0 else np.inf
    if not np.isfinite(value):
        raise NumericError(
            f"no critical source voltage at D = {D:.6g}: slope kernel vanishes"
        )
    return value


def buck_approx_S(m: ConverterModel, D: float) -> float:
    """Three-term low-frequency approximation of S(D) for the buck.

    Valid when the plant poles sit well below the switching frequency
    (RC and sqrt(LC) both much larger than T); used for design-oriented
    closed forms rather than exact prediction.
    """
    if m.topology != BUCK:
        raise UnsupportedSchemeError("buck_approx_S needs a buck model")
    b11 = m.B1[:, 0]
    vs = m.u[0]
    T = m.T
    c_ainv_b = float(m.Crow @ np.linalg.solve(m.A1, b11))
    c_b = float(m.Crow @ b11)
    c_a_b = float(m.Crow @ m.A1 @ b11)
    poly = (1.0 - 6.0 * D + 6.0 * D * D) / 12.0
    return vs * (-c_ainv_b / T + (0.5 - D) * c_b - poly * c_a_b * T)


def buck_hf_S(m: ConverterModel) -> float:
    """High-switching-frequency limit of the approximate S (first term only).

    Duty-independent; coincides with the state-space-averaged boundary
    condition for the buck.
    """
    if m.topology != BUCK:
        raise UnsupportedSchemeError("buck_hf_S needs a buck model")
    vs = m.u[0]
    return vs * (-float(m.Crow @ np.linalg.solve(m.A1, m.B1[:, 0])) / m.T)


def closed_form_snb_duty(m: ConverterModel):
    """Design-oriented closed-form critical duty ratio, or NoSnb.

    Covers buck cmc_open / vmc / multiloop and boost vmc / cmc_open. The
    returned NoSnb carries the violated feasibility condition. Schemes
    without a closed form (boost cmc_closed, boost multiloop) raise
    UnsupportedSchemeError; the averaged and sampled-data routes handle
    those.
    """
    ps, ctl = m.power, m.control
    hdot = m.hdot
    if m.topology == BUCK:
        K = 2.0 * ps.L / (ps.R * ps.T)
        if ctl.kind == CMC_OPEN:
            duty = (1.0 + K) / 2.0 + ps.L * hdot / ps.vs
            if not 0.0 < duty < 1.0:
                return NoSnb(
                    f"critical duty {duty:.4g} outside (0, 1); "
                    f"needs conduction parameter K = 2L/(RT) < 1, got K = {K:.4g}"
                )
            return duty
        if ctl.kind == VMC:
            # slope margin -1 + T^2 (1 - 6D + 6D^2)/(12 L C) must reach Vh/(kp vs)
            q = 12.0 * ps.L * ps.C * (1.0 + m.ramp.amplitude / (ctl.kp * ps.vs)) / ps.T**2
            disc = 3.0 + 6.0 * q
            lo_root = (3.0 - np.sqrt(disc)) / 6.0
            hi_root = (3.0 + np.sqrt(disc)) / 6.0
            duties = [x for x in (lo_root, hi_root) if 0.0 < x < 1.0]
            if not duties:
                return NoSnb(
                    "proportional voltage loop cannot meet the boundary: "
                    f"T^2 = {ps.T**2:.3g} << 12 L C (1 + Vh/(kp vs)) = {12*ps.L*ps.C*(1+m.ramp.amplitude/(ctl.kp*ps.vs)):.3g}"
                )
            return min(duties)
        if ctl.kind == MULTILOOP:
            if ctl.ki == 0.0:
                return NoSnb("multiloop closed form needs a current gain ki != 0")
            duty = (K + 1.0) / 2.0 + ps.L * hdot / (ps.vs * ctl.ki) + ps.L * ctl.kv / (ps.T * ctl.ki)
            if not 0.0 < duty < 1.0:
                return NoSnb(f"critical duty {duty:.4g} outside (0, 1)")
            return duty
    if m.topology == BOOST:
        rho = ps.r / ps.R
        if ctl.kind == CMC_OPEN:
            return NoSnb(
                "peak inductor current increases monotonically with duty; "
                "a current command selects a single solution"
            )
        if ctl.kind == VMC:
            if rho == 0.0:
                return NoSnb("no SNB below full duty when the inductor has r = 0")
            if m.ramp.amplitude == 0.0:
                # infinite-gain limit of the averaged boundary
                inner = rho
            else:
                kappa_vs = ctl.kp / m.ramp.amplitude * ps.vs
                if kappa_vs < rho:
                    return NoSnb(
                        f"negative radicand: kp vs / Vh = {kappa_vs:.4g} < r/R = {rho:.4g}"
                    )
                inner = np.sqrt((2.0 * rho + kappa_vs / 4.0) * kappa_vs) - rho - kappa_vs / 2.0
            if not 0.0 < inner < 1.0:
                return NoSnb(f"critical duty 1 - sqrt({inner:.4g}) outside (0, 1)")
            return 1.0 - np.sqrt(inner)
    raise UnsupportedSchemeError(
        f"no closed-form critical duty for {m.topology}/{ctl.kind}"
    )


def s_plot(m: ConverterModel, grid) -> PlotSeries:
    """Sample S(D) over a duty grid; reference level is the ramp slope.

    Grid points where the orbit is degenerate or grazing are dropped
    (gaps), not fatal.
    """
    grid = np.asarray(grid, dtype=float)
    kept, values = [], []
    for D in grid:
        try:
            values.append(s_value(m, float(D)))
            kept.append(float(D))
        except NumericError as exc:
            logger.warning("s_plot: skipping D = %.6g (%s)", D, exc)
    return PlotSeries(
        kind="S",
        grid=np.asarray(kept),
        values=np.asarray(values),
        reference_level=m.hdot,
    )
