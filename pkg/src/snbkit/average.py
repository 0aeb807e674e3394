"""State-space-averaged model, its equilibria and the averaged SNB boundary.

Averaging blends the two stages with the duty ratio, ``Aavg = D A1 +
(1-D) A2``; closing the loop through the ramp gain 1/Vh gives a
continuous-time matrix whose zero eigenvalue marks the averaged
saddle-node boundary. The averaged route is trustworthy when switching is
decided by average quantities (voltage-mode); for peak current-mode it
can miss the bifurcation entirely, which is itself a documented outcome.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import matnum
from .errors import NumericError, SingularMatrixError, UnsupportedSchemeError
from .model import BOOST, BUCK, MULTILOOP, VMC, ConverterModel
from .sdstab import NoSnb, PlotSeries

logger = logging.getLogger(__name__)

_COND_LIMIT = 1e13
_CROSS_CHECK_REL = 1e-9


@dataclass(frozen=True)
class AveragedModel:
    """Duty-blended matrices, equilibrium and closed-loop matrix."""

    Aavg: np.ndarray
    Bavg: np.ndarray
    X: np.ndarray
    PhiA: np.ndarray | None  # None when Vh = 0 (loop gain undefined)


def averaged_matrices(m: ConverterModel, D: float):
    aavg = D * m.A1 + (1.0 - D) * m.A2
    bavg = D * m.B1 + (1.0 - D) * m.B2
    return aavg, bavg


def avg_equilibrium(m: ConverterModel, D: float) -> np.ndarray:
    """Equilibrium X = -Aavg^{-1} Bavg u of the averaged dynamics."""
    aavg, bavg = averaged_matrices(m, D)
    if np.linalg.cond(aavg) > _COND_LIMIT:
        raise SingularMatrixError(
            f"averaged matrix singular at D = {D:.6g} (lossless boost at full duty?)"
        )
    return -np.linalg.solve(aavg, bavg @ m.u)


def avg_closed_loop(m: ConverterModel, D: float) -> np.ndarray:
    """Closed-loop averaged matrix (duty perturbation fed back as y/Vh)."""
    if m.ramp.amplitude == 0.0:
        raise UnsupportedSchemeError(
            "averaged loop gain is unbounded with a zero-amplitude ramp; "
            "use the sampled-data analysis instead"
        )
    aavg, _ = averaged_matrices(m, D)
    x = avg_equilibrium(m, D)
    forcing = (m.A1 - m.A2) @ x + (m.B1 - m.B2) @ m.u
    return aavg + np.outer(forcing, m.Crow) / m.ramp.amplitude


def averaged_model(m: ConverterModel, D: float) -> AveragedModel:
    aavg, bavg = averaged_matrices(m, D)
    x = avg_equilibrium(m, D)
    phia = None if m.ramp.amplitude == 0.0 else avg_closed_loop(m, D)
    return AveragedModel(Aavg=aavg, Bavg=bavg, X=x, PhiA=phia)


def avg_snb_residual(m: ConverterModel, D: float) -> float:
    """Averaged saddle-node boundary residual.

    ``Vh + C Aavg^{-1} ((A1 - A2) X + (B1 - B2) u)``: zero exactly when
    the closed-loop averaged matrix has an eigenvalue at the origin.
    Scheme-specialized algebraic forms are evaluated alongside and
    cross-checked to 1e-9 relative.
    """
    aavg, _ = averaged_matrices(m, D)
    if np.linalg.cond(aavg) > _COND_LIMIT:
        raise SingularMatrixError(f"averaged matrix singular at D = {D:.6g}")
    x = avg_equilibrium(m, D)
    forcing = (m.A1 - m.A2) @ x + (m.B1 - m.B2) @ m.u
    vh = m.ramp.amplitude
    base = vh + float(m.Crow @ np.linalg.solve(aavg, forcing))
    _cross_check_scheme_forms(m, D, base)
    return base


def _cross_check_scheme_forms(m: ConverterModel, D: float, base: float) -> None:
    ps, ctl = m.power, m.control
    vh = m.ramp.amplitude
    vs = m.u[0]
    checks = []
    if m.topology == BUCK:
        # duty-independent: Vh + C A^{-1} B11 vs
        form = vh + float(m.Crow @ np.linalg.solve(m.A1, m.B1[:, 0])) * vs
        checks.append(("buck", form))
    elif m.topology == BOOST:
        w = 1.0 - D
        rho = ps.r / ps.R
        if ctl.kind == VMC and vh > 0.0:
            kappa = ctl.kp / vh
            quartic = (rho + w * w) ** 2 + kappa * vs * (w * w - rho)
            checks.append(("boost-vmc", vh * quartic / (rho + w * w) ** 2))
        if ctl.kind == MULTILOOP and ps.r == 0.0 and w != 0.0:
            cubic = (vh / vs) * w * w + 2.0 * ctl.ki / (ps.R * w) + ctl.kv
            checks.append(("boost-multiloop", vs * cubic / (w * w)))
    for name, form in checks:
        scale = max(abs(base), abs(form), 1e-300)
        if abs(base - form) > _CROSS_CHECK_REL * scale:
            raise NumericError(
                f"averaged boundary forms disagree ({name}) at D = {D:.6g}: "
                f"{base:.12g} vs {form:.12g}"
            )


def boost_multiloop_avg_duty(Vh: float, vs: float, ki: float, kv: float, R: float):
    """Averaged critical duty ratios for the multi-loop boost (r = 0).

    The boundary reduces to a cubic in w = 1 - D. All roots with w in
    (0, 1) are returned as duty ratios, ordered by ascending w (no
    information discarded); NoSnb when the cubic has none, e.g. whenever
    both gains are positive.
    """
    if R <= 0 or vs <= 0:
        raise ValueError("R and vs must be positive")
    cubic = lambda w: (Vh / vs) * w**3 + kv * w + 2.0 * ki / R
    roots = matnum.bracketed_roots(cubic, 1e-9, 1.0 - 1e-12, n_grid=4000, tol=1e-13)
    if not roots:
        if ki > 0 and kv > 0:
            return NoSnb("both feedback gains positive: boundary cannot be met")
        return NoSnb("averaged boundary cubic has no root with duty in (0, 1)")
    return [1.0 - w for w in roots]


def avg_residual_plot(m: ConverterModel, grid) -> PlotSeries:
    """Averaged boundary residual over a duty grid (reference level 0)."""
    grid = np.asarray(grid, dtype=float)
    kept, values = [], []
    for D in grid:
        try:
            values.append(avg_snb_residual(m, float(D)))
            kept.append(float(D))
        except NumericError as exc:
            logger.warning("avg_residual_plot: skipping D = %.6g (%s)", D, exc)
    return PlotSeries(
        kind="AvgResidual",
        grid=np.asarray(kept),
        values=np.asarray(values),
        reference_level=0.0,
    )
