"""Unified switched-linear models of PWM DC-DC converters.

A converter runs two linear stages per clock period T: stage S1 with
``x' = A1 x + B1 u`` while the feedback signal ``y = C x + D u`` stays
above the sawtooth ramp ``h(t)``, then stage S2 with ``x' = A2 x + B2 u``
from the first crossing until the next clock edge. The input is
``u = (vs, vr)`` (source voltage and control reference; in current-mode
control the reference plays the role of the current command i_c). The
output voltage is reported through ``v_o = E x``.

Builders cover the classic second-order buck and boost power stages under
voltage-mode, current-mode (peak, with open or closed voltage loop) and
multi-loop state feedback.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedSchemeError

BUCK = "buck"
BOOST = "boost"

VMC = "vmc"
CMC_OPEN = "cmc_open"
CMC_CLOSED = "cmc_closed"
MULTILOOP = "multiloop"

_SCHEME_GAINS = {
    VMC: ("kp",),
    CMC_OPEN: (),
    CMC_CLOSED: ("kp",),
    MULTILOOP: ("ki", "kv"),
}


@dataclass(frozen=True)
class PowerStage:
    """Power-train parameters, SI units throughout.

    ``r`` is the inductor series resistance (enters the boost state model
    only); ``Rc`` is the output-capacitor ESR and is consumed only by the
    frequency-domain transfer functions, never by the state-space
    builders.
    """

    vs: float  # source voltage [V]
    L: float  # inductance [H]
    C: float  # output capacitance [F]
    R: float  # load resistance [ohm]
    fs: float  # switching frequency [Hz]
    r: float = 0.0  # inductor series resistance [ohm]
    Rc: float = 0.0  # capacitor ESR [ohm]

    def __post_init__(self):
        for name in ("vs", "L", "C", "R", "fs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"power.{name} must be positive")
        if self.r < 0 or self.Rc < 0:
            raise ValueError("parasitic resistances must be non-negative")

    @property
    def T(self) -> float:
        return 1.0 / self.fs

    @property
    def ws(self) -> float:
        return 2.0 * np.pi * self.fs


@dataclass(frozen=True)
class ControlScheme:
    """Tagged control-law choice plus the reference vr.

    Exactly the gains of the active variant must be present: ``kp`` for
    vmc / cmc_closed, ``ki`` and ``kv`` for multiloop, none for cmc_open.
    """

    kind: str
    vr: float
    kp: float | None = None
    ki: float | None = None
    kv: float | None = None

    def __post_init__(self):
        if self.kind not in _SCHEME_GAINS:
            raise ValueError(f"unknown control kind {self.kind!r}")
        needed = _SCHEME_GAINS[self.kind]
        for gain in ("kp", "ki", "kv"):
            value = getattr(self, gain)
            if gain in needed and value is None:
                raise ValueError(f"control.{gain} is required for {self.kind}")
            if gain not in needed and value is not None:
                raise ValueError(f"control.{gain} does not apply to {self.kind}")

    @classmethod
    def vmc(cls, kp, vr):
        return cls(VMC, vr=vr, kp=kp)

    @classmethod
    def cmc_open(cls, vr):
        return cls(CMC_OPEN, vr=vr)

    @classmethod
    def cmc_closed(cls, kp, vr):
        return cls(CMC_CLOSED, vr=vr, kp=kp)

    @classmethod
    def multiloop(cls, ki, kv, vr):
        return cls(MULTILOOP, vr=vr, ki=ki, kv=kv)


@dataclass(frozen=True)
class RampSpec:
    """Sawtooth comparison ramp: h(t) = offset + (amplitude/T) * (t mod T).

    The slope is positive and the ramp resets at every clock edge.
    amplitude = 0 degenerates to a constant threshold.
    """

    offset: float = 0.0
    amplitude: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("ramp.amplitude must be >= 0")

    def slope(self, T: float) -> float:
        return self.amplitude / T


@dataclass(frozen=True)
class ConverterModel:
    """Complete switched model: matrices, ramp, clock and inputs.

    Buck models satisfy A1 == A2, B2[:,0] == 0 and B1[:,1] == B2[:,1];
    boost models satisfy B1 == B2. Both are checked on construction.
    Instances are immutable; use :func:`with_param` to derive variants.
    """

    topology: str
    power: PowerStage
    control: ControlScheme
    ramp: RampSpec
    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    Crow: np.ndarray
    Drow: np.ndarray
    E1: np.ndarray
    E2: np.ndarray

    def __post_init__(self):
        for name in ("A1", "A2", "B1", "B2", "Crow", "Drow", "E1", "E2"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.A1.shape[0]
        if self.A1.shape != (n, n) or self.A2.shape != (n, n):
            raise ValueError("A1 and A2 must be square and equally sized")
        if self.B1.shape != (n, 2) or self.B2.shape != (n, 2):
            raise ValueError("B1 and B2 must be N x 2")
        if self.Crow.shape != (n,) or self.E1.shape != (n,) or self.E2.shape != (n,):
            raise ValueError("Crow, E1 and E2 must be length-N rows")
        if self.Drow.shape != (2,):
            raise ValueError("Drow must have two entries")
        for name in ("A1", "A2", "B1", "B2", "Crow", "Drow", "E1", "E2"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} has non-finite entries")
        if self.topology == BUCK:
            if not (
                np.array_equal(self.A1, self.A2)
                and np.all(self.B2[:, 0] == 0.0)
                and np.array_equal(self.B1[:, 1], self.B2[:, 1])
            ):
                raise ValueError("buck topology invariants violated")
        elif self.topology == BOOST:
            if not np.array_equal(self.B1, self.B2):
                raise ValueError("boost topology invariants violated")
        else:
            raise ValueError(f"unknown topology {self.topology!r}")

    @property
    def n(self) -> int:
        return self.A1.shape[0]

    @property
    def T(self) -> float:
        return self.power.T

    @property
    def u(self) -> np.ndarray:
        return np.array([self.power.vs, self.control.vr])

    @property
    def hdot(self) -> float:
        return self.ramp.slope(self.T)

    def feedback_output(self, x) -> float:
        """y = C x + D u."""
        return float(self.Crow @ np.asarray(x, dtype=float) + self.Drow @ self.u)

    def output_voltage(self, x) -> float:
        """v_o = E x (reporting only; both stage rows coincide here)."""
        return float(self.E1 @ np.asarray(x, dtype=float))


def _scheme_rows_buck(ctl: ControlScheme):
    if ctl.kind == CMC_OPEN:
        return np.array([-1.0, 0.0]), np.array([0.0, 1.0])
    if ctl.kind == VMC:
        return np.array([0.0, -ctl.kp]), np.array([0.0, ctl.kp])
    if ctl.kind == MULTILOOP:
        return np.array([-ctl.ki, -ctl.kv]), np.array([0.0, 1.0])
    raise UnsupportedSchemeError(
        f"buck has no state model for control kind {ctl.kind!r}"
    )


def _scheme_rows_boost(ctl: ControlScheme):
    if ctl.kind == CMC_OPEN:
        return np.array([-1.0, 0.0]), np.array([0.0, 1.0])
    if ctl.kind == VMC:
        return np.array([0.0, -ctl.kp]), np.array([0.0, ctl.kp])
    if ctl.kind == CMC_CLOSED:
        return np.array([-1.0, -ctl.kp]), np.array([0.0, ctl.kp])
    if ctl.kind == MULTILOOP:
        return np.array([-ctl.ki, -ctl.kv]), np.array([0.0, 1.0])
    raise UnsupportedSchemeError(
        f"boost has no state model for control kind {ctl.kind!r}"
    )


def build_buck(ps: PowerStage, ctl: ControlScheme, ramp: RampSpec) -> ConverterModel:
    """Buck converter with state x = (i_L, v_C).

    Both stages share the plant matrix; the source only drives stage S1.
    The inductor series resistance is not part of this model, so ps.r
    must be zero. ps.Rc is carried along for the transfer functions but
    does not enter the state space.
    """
    if ps.r != 0.0:
        raise UnsupportedSchemeError(
            "buck state model has no inductor series resistance; set r = 0"
        )
    L, C, R = ps.L, ps.C, ps.R
    a = np.array([[0.0, -1.0 / L], [1.0 / C, -1.0 / (R * C)]])
    b1 = np.array([[1.0 / L, 0.0], [0.0, 0.0]])
    b2 = np.zeros((2, 2))
    crow, drow = _scheme_rows_buck(ctl)
    e_row = np.array([0.0, 1.0])
    return ConverterModel(BUCK, ps, ctl, ramp, a, a, b1, b2, crow, drow, e_row, e_row)


def build_boost(ps: PowerStage, ctl: ControlScheme, ramp: RampSpec) -> ConverterModel:
    """Boost converter with state x = (i_L, v_C).

    Stage S1 shorts the inductor to ground through r; stage S2 connects
    it to the output. Both stages see the same source column, so B1 == B2.
    """
    L, C, R, r = ps.L, ps.C, ps.R, ps.r
    a1 = np.array([[-r / L, 0.0], [0.0, -1.0 / (R * C)]])
    a2 = np.array([[-r / L, -1.0 / L], [1.0 / C, -1.0 / (R * C)]])
    b = np.array([[1.0 / L, 0.0], [0.0, 0.0]])
    crow, drow = _scheme_rows_boost(ctl)
    e_row = np.array([0.0, 1.0])
    return ConverterModel(BOOST, ps, ctl, ramp, a1, a2, b, b, crow, drow, e_row, e_row)


def build(topology: str, ps: PowerStage, ctl: ControlScheme, ramp: RampSpec) -> ConverterModel:
    if topology == BUCK:
        return build_buck(ps, ctl, ramp)
    if topology == BOOST:
        return build_boost(ps, ctl, ramp)
    raise UnsupportedSchemeError(f"unknown topology {topology!r}")


def ramp_at(m: ConverterModel, t: float) -> tuple[float, float]:
    """Ramp value and slope at time t >= 0 (sawtooth, reset at clock edges)."""
    if t < 0:
        raise ValueError(f"ramp_at needs t >= 0, got {t}")
    hdot = m.hdot
    return m.ramp.offset + hdot * (t % m.T), hdot


_POWER_FIELDS = frozenset(f.name for f in dataclasses.fields(PowerStage))
_CONTROL_FIELDS = frozenset(("vr", "kp", "ki", "kv"))
_RAMP_FIELDS = frozenset(f.name for f in dataclasses.fields(RampSpec))


def with_param(m: ConverterModel, name: str, value: float) -> ConverterModel:
    """Rebuild the model with one named parameter replaced.

    Accepts any PowerStage field (vs, L, C, R, r, Rc, fs), control field
    (vr, kp, ki, kv) or ramp field (offset, amplitude).
    """
    if name in _POWER_FIELDS:
        ps = dataclasses.replace(m.power, **{name: value})
        return build(m.topology, ps, m.control, m.ramp)
    if name in _CONTROL_FIELDS:
        ctl = dataclasses.replace(m.control, **{name: value})
        return build(m.topology, m.power, ctl, m.ramp)
    if name in _RAMP_FIELDS:
        ramp = dataclasses.replace(m.ramp, **{name: value})
        return build(m.topology, m.power, m.control, ramp)
    raise ValueError(f"unknown model parameter {name!r}")
