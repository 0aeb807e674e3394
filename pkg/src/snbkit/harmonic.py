"""Harmonic-balance and loop-gain SNB prediction for the buck converter.

The switched node voltage is a square wave; writing the feedback loop in
its Fourier series and balancing the switching condition at the crossing
instant turns the saddle-node boundary into a harmonic sum over the HB
gain G(s) sampled at multiples of the switching frequency. The same sum
re-scaled by vs/Vh is the loop-gain form. Three duty-indexed diagnostic
curves come out of this: the complex H plot and the real L1/L2 plots,
whose threshold crossings mark the bifurcation.

Everything here is buck-only: the square-wave forcing picture behind the
derivation does not carry over to the boost power stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from . import matnum
from .errors import UnsupportedSchemeError
from .model import BUCK, CMC_CLOSED, CMC_OPEN, VMC, ControlScheme, ConverterModel, PowerStage
from .sdstab import PlotSeries

DEFAULT_HARMONICS = 200
DEFAULT_TAIL_TOL = 1e-9


@dataclass(frozen=True)
class TransferFunction:
    """Rational transfer function with real coefficients, ascending powers."""

    num: tuple
    den: tuple

    def __post_init__(self):
        num = tuple(float(c) for c in self.num)
        den = tuple(float(c) for c in self.den)
        if not den or not any(den):
            raise ValueError("denominator must be nonzero")
        if not num:
            num = (0.0,)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, s):
        return P.polyval(s, self.num) / P.polyval(s, self.den)

    @property
    def dc_gain(self) -> float:
        return self.num[0] / self.den[0]

    @classmethod
    def constant(cls, k: float) -> "TransferFunction":
        return cls((k,), (1.0,))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            other = TransferFunction.constant(float(other))
        return TransferFunction(
            tuple(P.polymul(self.num, other.num)),
            tuple(P.polymul(self.den, other.den)),
        )

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = TransferFunction.constant(float(other))
        num = P.polyadd(P.polymul(self.num, other.den), P.polymul(other.num, self.den))
        return TransferFunction(tuple(num), tuple(P.polymul(self.den, other.den)))


@dataclass(frozen=True)
class HarmonicConfig:
    """Truncation controls for the infinite harmonic sums.

    Terms stop at ``n_harmonics`` or earlier once a term-magnitude bound
    drops below ``tail_tol`` relative to the running sum; tail_tol = 0
    forces the full count.
    """

    n_harmonics: int = DEFAULT_HARMONICS
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.n_harmonics < 1:
            raise ValueError("n_harmonics must be >= 1")
        if self.tail_tol < 0:
            raise ValueError("tail_tol must be >= 0")


def vd_fourier(vs: float, D: float, n: int) -> complex:
    """Fourier coefficient c_n of the switched-node square wave.

    The wave sits at vs for the on-time fraction D of each period and at
    zero otherwise; c_0 = vs * D and c_{-n} = conj(c_n).
    """
    if not 0.0 <= D <= 1.0:
        raise ValueError(f"need 0 <= D <= 1, got {D}")
    if n == 0:
        return complex(vs * D)
    return vs / (2j * n * np.pi) * (1.0 - np.exp(-2j * n * np.pi * D))


def buck_tf(ps: PowerStage, which: str) -> TransferFunction:
    """Power-stage transfer function from the switched node voltage.

    ``which = "gv"``: to the output voltage (unity DC gain);
    ``which = "gi"``: to the inductor current (DC gain 1/R). ESR Rc enters
    here and only here.
    """
    L, C, R, Rc = ps.L, ps.C, ps.R, ps.Rc
    den = (1.0, L / R + Rc * C, L * C * (1.0 + Rc / R))
    key = which.lower()
    if key == "gv":
        return TransferFunction((1.0, Rc * C), den)
    if key == "gi":
        return TransferFunction((1.0 / R, (1.0 + Rc / R) * C), den)
    raise ValueError(f"which must be 'gv' or 'gi', got {which!r}")


def hb_gain(ps: PowerStage, ctl: ControlScheme, Gc: TransferFunction | None = None) -> TransferFunction:
    """HB gain G(s): switched-node voltage to the negated feedback signal.

    vmc: G = Gc * Gv; cmc_open: G = Gi (current loop has no compensator);
    cmc_closed: G = Gc * Gv + Gi. ``Gc`` defaults to the scheme's
    proportional gain; any rational compensator may be supplied instead.
    Multi-loop state feedback has no HB gain here.
    """
    if ctl.kind == CMC_OPEN:
        if Gc is not None:
            raise ValueError("cmc_open has no compensator slot")
        return buck_tf(ps, "gi")
    if ctl.kind == VMC:
        gc = Gc if Gc is not None else TransferFunction.constant(ctl.kp)
        return gc * buck_tf(ps, "gv")
    if ctl.kind == CMC_CLOSED:
        gc = Gc if Gc is not None else TransferFunction.constant(ctl.kp)
        return gc * buck_tf(ps, "gv") + buck_tf(ps, "gi")
    raise UnsupportedSchemeError(f"no HB gain defined for control kind {ctl.kind!r}")


def hb_sum(G, D: float, ws: float, cfg: HarmonicConfig | None = None) -> float:
    """Two-sided harmonic sum ``sum_n e^{j 2 n pi D} G(j n ws)``, real form.

    Conjugate symmetry folds it to ``G(0) + 2 Re sum_{n>=1} ...``, so the
    result is real by construction.
    """
    if not 0.0 < D < 1.0:
        raise ValueError(f"need 0 < D < 1, got {D}")
    cfg = cfg or HarmonicConfig()
    total = float(np.real(G(0.0)))
    for n in range(1, cfg.n_harmonics + 1):
        gn = G(1j * n * ws)
        total += 2.0 * float(np.real(np.exp(2j * n * np.pi * D) * gn))
        if cfg.tail_tol > 0.0 and 2.0 * abs(gn) < cfg.tail_tol * abs(total):
            break
    return total


def hb_snb_residual(G, D: float, ws: float, vs: float, Vh: float,
                    cfg: HarmonicConfig | None = None) -> float:
    """Harmonic-balance SNB boundary residual vs * hb_sum + Vh."""
    return vs * hb_sum(G, D, ws, cfg) + Vh


def hb_critical_vs(G, D: float, ws: float, Vh: float,
                   cfg: HarmonicConfig | None = None) -> float:
    """Source voltage putting duty D on the HB boundary: -Vh / hb_sum."""
    total = hb_sum(G, D, ws, cfg)
    if total == 0.0:
        raise ZeroDivisionError("harmonic sum vanishes; critical vs undefined")
    return -Vh / total


def h_plot(G, grid, ws: float, vs: float, Vh: float,
           cfg: HarmonicConfig | None = None) -> tuple[PlotSeries, PlotSeries]:
    """One-sided complex harmonic sum H(D) over a duty grid.

    The SNB condition is Re[H(D)] = -(Vh + vs G(0)) / (2 vs), carried as
    the reference level. Returns the full series plus the first-harmonic
    shortcut (n = 1 term only) as a companion.
    """
    cfg = cfg or HarmonicConfig()
    grid = np.asarray(grid, dtype=float)
    g0 = float(np.real(G(0.0)))
    ref = -(Vh + vs * g0) / (2.0 * vs)
    full = np.empty(len(grid), dtype=complex)
    first = np.empty(len(grid), dtype=complex)
    gvals = [G(1j * n * ws) for n in range(1, cfg.n_harmonics + 1)]
    for i, D in enumerate(grid):
        phases = np.exp(2j * np.pi * D * np.arange(1, cfg.n_harmonics + 1))
        terms = phases * gvals
        full[i] = terms.sum()
        first[i] = terms[0]
    series = PlotSeries(kind="H", grid=grid, values=full.real,
                        imag_values=full.imag, reference_level=ref)
    shortcut = PlotSeries(kind="H", grid=grid, values=first.real,
                          imag_values=first.imag, reference_level=ref)
    return series, shortcut


def l_plots(m: ConverterModel, Gc: TransferFunction | None = None,
            grid=None, cfg: HarmonicConfig | None = None):
    """Loop-gain diagnostic plots for a buck model.

    L2 (always available) is the two-sided HB sum with reference -Vh/vs.
    L1 rescales it by vs/Vh with reference -1 and is absent (None) when
    the ramp amplitude is zero, where the loop gain is unbounded.
    """
    if m.topology != BUCK:
        raise UnsupportedSchemeError("loop-gain plots are defined for the buck only")
    if grid is None:
        grid = np.arange(0.01, 0.9901, 0.002)
    grid = np.asarray(grid, dtype=float)
    g = hb_gain(m.power, m.control, Gc)
    ws = m.power.ws
    vs = m.u[0]
    vh = m.ramp.amplitude
    l2_vals = np.array([hb_sum(g, float(D), ws, cfg) for D in grid])
    l2 = PlotSeries(kind="L2", grid=grid, values=l2_vals, reference_level=-vh / vs)
    if vh == 0.0:
        return None, l2
    l1 = PlotSeries(kind="L1", grid=grid, values=l2_vals * vs / vh, reference_level=-1.0)
    return l1, l2


def l2_matrix_form(m: ConverterModel, D: float) -> float:
    """Matrix (time-domain) counterpart of the L2 sum for cross-checks.

    ``-T C (I - e^{A1 T})^{-1} e^{A1 d} B11``, exactly proportional to the
    slope-based boundary function; the truncated L2 sum converges to it.
    """
    if m.topology != BUCK:
        raise UnsupportedSchemeError("matrix L2 form needs a buck model")
    d = D * m.T
    et, _ = matnum.expm_pair(m.A1, m.T)
    e1, _ = matnum.expm_pair(m.A1, d)
    return float(-m.T * (m.Crow @ np.linalg.solve(np.eye(m.n) - et, e1 @ m.B1[:, 0])))
