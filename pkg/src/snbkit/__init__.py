"""Saddle-node bifurcation analysis of PWM DC-DC converters.

Models buck and boost converters under voltage-mode, current-mode and
multi-loop state feedback in one switched-linear form, computes their
exact T-periodic steady states and sampled-data stability, and predicts
the saddle-node bifurcation by several independent routes (steady-state
double roots, Floquet multipliers, slope-based S plot, state-space
averaging, harmonic balance / loop gain) whose mutual agreement doubles
as a correctness check.
"""

from .average import AveragedModel, avg_closed_loop, avg_equilibrium, avg_snb_residual, boost_multiloop_avg_duty
from .errors import (
    ConfigError,
    DegenerateOrbitError,
    EvaluationError,
    GrazingError,
    NoSnbInBracketError,
    NonConvergenceError,
    NumericError,
    SingularMatrixError,
    UnsupportedSchemeError,
)
from .harmonic import HarmonicConfig, TransferFunction, buck_tf, hb_gain, hb_snb_residual, hb_sum
from .model import (
    ControlScheme,
    ConverterModel,
    PowerStage,
    RampSpec,
    build,
    build_boost,
    build_buck,
    ramp_at,
    with_param,
)
from .sdstab import (
    Classification,
    NoSnb,
    PlotSeries,
    StabilityReport,
    classify,
    closed_form_snb_duty,
    critical_vs,
    jacobian,
    s_plot,
    s_value,
    snb_slope_residual,
    stability_report,
)
from .steady import PeriodicOrbit, orbit_state_at_d, periodic_solutions, residual
from .sweep import (
    BranchPoint,
    SnbPoint,
    SweepResult,
    branch_sweep,
    fd_jacobian,
    locate_snb,
    refine_stability_boundary,
    simulate,
    strobe_step,
)

__version__ = "0.1.0"
