"""Command-line front end: JSON configs in, CSV plot data out.

Subcommands map one-to-one onto the analysis routes: ``analyze`` prints
the periodic solutions and their stability, ``splot``/``hplot``/``lplot``
/``avg`` emit the diagnostic curves as CSV, ``sweep`` and ``locate-snb``
drive the bifurcation machinery, ``simulate`` logs the clock-sampled
trajectory and ``example`` runs a built-in fixture end-to-end.

Exit codes: 0 ok, 1 analysis error, 2 usage error, 3 fixture mismatch.
CSV output is deterministic: 12 significant digits, '.' decimal
separator, '\\n' line endings, header row always present.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import average, fixtures, harmonic, sdstab, steady, sweep
from .errors import ConfigError, NumericError
from .model import (
    ControlScheme,
    ConverterModel,
    PowerStage,
    RampSpec,
    build,
)

_DEFAULT_GRID = "0.01:0.99:0.002"

_CONTROL_GAINS = {
    "vmc": ("kp",),
    "cmc_open": (),
    "cmc_closed": ("kp",),
    "multiloop": ("ki", "kv"),
}


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _require(section: dict, field: str, where: str):
    if field not in section:
        raise ConfigError(f"missing required field {where}.{field}")
    return section[field]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(f"{where} must be finite, got {value!r}")
    return float(value)


def parse_config(doc: dict) -> ConverterModel:
    """Validate a configuration document and build the model."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be an object")
    topology = _require(doc, "topology", "$")
    if topology not in ("buck", "boost"):
        raise ConfigError(f"topology must be 'buck' or 'boost', got {topology!r}")

    power_doc = _require(doc, "power", "$")
    power_args = {}
    for field in ("vs", "L", "C", "R", "fs"):
        power_args[field] = _number(_require(power_doc, field, "power"), f"power.{field}")
    for field in ("r", "Rc"):
        if field in power_doc:
            power_args[field] = _number(power_doc[field], f"power.{field}")
    try:
        power = PowerStage(**power_args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    control_doc = _require(doc, "control", "$")
    kind = _require(control_doc, "type", "control")
    if kind not in _CONTROL_GAINS:
        raise ConfigError(
            f"control.type must be one of {sorted(_CONTROL_GAINS)}, got {kind!r}"
        )
    ctl_args = {"vr": _number(_require(control_doc, "vr", "control"), "control.vr")}
    for gain in _CONTROL_GAINS[kind]:
        ctl_args[gain] = _number(_require(control_doc, gain, "control"), f"control.{gain}")
    for gain in ("kp", "ki", "kv"):
        if gain in control_doc and gain not in _CONTROL_GAINS[kind]:
            raise ConfigError(f"control.{gain} does not apply to control.type {kind!r}")
    try:
        ctl = ControlScheme(kind=kind, **ctl_args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    ramp_doc = doc.get("ramp", {})
    ramp_args = {}
    for field in ("offset", "amplitude"):
        if field in ramp_doc:
            ramp_args[field] = _number(ramp_doc[field], f"ramp.{field}")
    try:
        ramp = RampSpec(**ramp_args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return build(topology, power, ctl, ramp)


def load_config(path: str) -> ConverterModel:
    """Read, validate and build a converter model from a JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    model = parse_config(doc)
    analysis = doc.get("analysis", {})
    if not isinstance(analysis, dict):
        raise ConfigError("analysis must be an object")
    return model


def load_analysis_defaults(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    analysis = doc.get("analysis", {}) if isinstance(doc, dict) else {}
    return {
        "grid": analysis.get("grid", _DEFAULT_GRID),
        "harmonics": int(analysis.get("harmonics", harmonic.DEFAULT_HARMONICS)),
    }


def model_to_config(m: ConverterModel) -> dict:
    """Canonical configuration document for a model (round-trips exactly)."""
    control = {"type": m.control.kind, "vr": m.control.vr}
    for gain in ("kp", "ki", "kv"):
        value = getattr(m.control, gain)
        if value is not None:
            control[gain] = value
    return {
        "topology": m.topology,
        "power": {
            "vs": m.power.vs,
            "L": m.power.L,
            "C": m.power.C,
            "R": m.power.R,
            "fs": m.power.fs,
            "r": m.power.r,
            "Rc": m.power.Rc,
        },
        "control": control,
        "ramp": {"offset": m.ramp.offset, "amplitude": m.ramp.amplitude},
    }


def parse_grid(spec: str) -> np.ndarray:
    """Parse a lo:hi:step duty grid specification."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be lo:hi:step, got {spec!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"grid must be numeric lo:hi:step, got {spec!r}") from exc
    if not (0.0 < lo < hi < 1.0 and step > 0.0):
        raise ConfigError(f"grid needs 0 < lo < hi < 1 and step > 0, got {spec!r}")
    return np.arange(lo, hi + 0.5 * step, step)


def _write_csv(out_path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _cmd_analyze(args) -> int:
    m = load_config(args.config)
    orbits = steady.periodic_solutions(m)
    print(f"{m.topology} converter, {m.control.kind} control, "
          f"T = {_fmt(m.T)} s, vs = {_fmt(m.power.vs)} V, vr = {_fmt(m.control.vr)}")
    if not orbits:
        print("no periodic solution in the scanned duty range")
    for orb in orbits:
        _print_orbit(m, orb)
    if args.duty is not None:
        if not 0.0 < args.duty < 1.0:
            raise ConfigError(f"--duty must be in (0, 1), got {args.duty}")
        print(f"forced duty D = {_fmt(args.duty)}:")
        _print_orbit(m, steady.make_orbit(m, args.duty * m.T))
    return 0


def _print_orbit(m, orb) -> None:
    rep = sdstab.stability_report(m, orb)
    lams = ", ".join(f"{lam.real:.6g}{lam.imag:+.6g}j" for lam in rep.multipliers)
    print(f"  D = {_fmt(orb.D)}  residual = {_fmt(orb.residual)}  "
          f"v_o = {_fmt(m.output_voltage(orb.x0_0))}")
    print(f"    multipliers: [{lams}]  class = {rep.classification.value}  "
          f"margin = {_fmt(rep.margin)}")


def _grid_for(args) -> np.ndarray:
    if args.grid is not None:
        return parse_grid(args.grid)
    return parse_grid(load_analysis_defaults(args.config)["grid"])


def _harmonics_for(args) -> harmonic.HarmonicConfig:
    n = args.harmonics
    if n is None:
        n = load_analysis_defaults(args.config)["harmonics"]
    return harmonic.HarmonicConfig(n_harmonics=n)


def _cmd_splot(args) -> int:
    m = load_config(args.config)
    series = sdstab.s_plot(m, _grid_for(args))
    rows = [(D, v, series.reference_level) for D, v in zip(series.grid, series.values)]
    _write_csv(args.out, ("D", "S", "hdot"), rows)
    return 0


def _cmd_hplot(args) -> int:
    m = load_config(args.config)
    gain = harmonic.hb_gain(m.power, m.control)
    series, _ = harmonic.h_plot(gain, _grid_for(args), m.power.ws,
                                m.power.vs, m.ramp.amplitude, _harmonics_for(args))
    rows = [
        (D, re, im, series.reference_level)
        for D, re, im in zip(series.grid, series.values, series.imag_values)
    ]
    _write_csv(args.out, ("D", "reH", "imH", "ref"), rows)
    return 0


def _cmd_lplot(args) -> int:
    m = load_config(args.config)
    l1, l2 = harmonic.l_plots(m, grid=_grid_for(args), cfg=_harmonics_for(args))
    if l1 is None:
        rows = [(D, v, l2.reference_level) for D, v in zip(l2.grid, l2.values)]
        _write_csv(args.out, ("D", "L2", "ref2"), rows)
    else:
        rows = [
            (D, v1, v2, l1.reference_level, l2.reference_level)
            for D, v1, v2 in zip(l1.grid, l1.values, l2.values)
        ]
        _write_csv(args.out, ("D", "L1", "L2", "ref1", "ref2"), rows)
    return 0


def _cmd_avg(args) -> int:
    m = load_config(args.config)
    series = average.avg_residual_plot(m, _grid_for(args))
    rows = list(zip(series.grid, series.values))
    _write_csv(args.out, ("D", "residual"), rows)
    return 0


def _cmd_sweep(args) -> int:
    m = load_config(args.config)
    result = sweep.branch_sweep(m, args.param, args.lo, args.hi, args.steps)
    rows = [
        (b.param, b.D, b.d, b.x0_0[0], b.x0_0[1], b.v_o,
         b.classification.value, b.max_multiplier.real, b.max_multiplier.imag)
        for b in result.branches
    ]
    _write_csv(args.out,
               ("param", "D", "d", "iL0", "vC0", "vo", "class", "lam_re", "lam_im"),
               rows)
    return 0


def _cmd_locate_snb(args) -> int:
    m = load_config(args.config)
    point = sweep.locate_snb(m, args.param, (args.lo, args.hi), d_guess=args.d_guess)
    _write_csv(args.out, ("param_star", "D_star", "residual_norm"),
               [(point.param_star, point.D_star, point.residual_norm)])
    return 0


def _cmd_simulate(args) -> int:
    m = load_config(args.config)
    if args.x0 is not None:
        parts = args.x0.split(",")
        if len(parts) != m.n:
            raise ConfigError(f"--x0 needs {m.n} comma-separated values")
        x0 = np.array([float(p) for p in parts])
    else:
        x0 = np.zeros(m.n)
    log = sweep.simulate(m, x0, args.periods)
    rows = [(str(k), x[0], x[1], d_event) for k, x, d_event in log]
    _write_csv(args.out, ("n", "iL", "vC", "d_event"), rows)
    return 0


def _cmd_example(args) -> int:
    report = fixtures.run_example(args.name)
    print(f"example {report.name}: {report.description}")
    width = max(len(c.name) for c in report.checks)
    for c in report.checks:
        status = "ok" if c.passed else "MISMATCH"
        print(f"  {c.name:<{width}}  value={_fmt(c.value):>18}  "
              f"expected={_fmt(c.expected):>12}  tol={_fmt(c.tol):>10}  {status}")
    if report.notes:
        print(f"  note: {report.notes}")
    if not report.passed:
        bad = [c.name for c in report.checks if not c.passed]
        print(f"FIXTURE MISMATCH in {report.name}: {', '.join(bad)}", file=sys.stderr)
        return 3
    print(f"example {report.name}: all {len(report.checks)} checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snbkit",
        description="Saddle-node bifurcation analysis of PWM DC-DC converters",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", required=True, help="JSON converter description")
        p.add_argument("--out", default=None, help="output CSV path (default stdout)")

    p = subs.add_parser("analyze", help="periodic solutions and their stability")
    p.add_argument("--config", required=True)
    p.add_argument("--duty", type=float, default=None,
                   help="also analyze the orbit at a forced duty ratio")
    p.set_defaults(func=_cmd_analyze)

    for name, fn, extra in (
        ("splot", _cmd_splot, "slope-based S plot"),
        ("hplot", _cmd_hplot, "harmonic-balance H plot"),
        ("lplot", _cmd_lplot, "loop-gain L1/L2 plots"),
        ("avg", _cmd_avg, "averaged SNB boundary residual"),
    ):
        p = subs.add_parser(name, help=f"emit the {extra} as CSV")
        add_config(p)
        p.add_argument("--grid", default=None, help="duty grid lo:hi:step")
        if name in ("hplot", "lplot"):
            p.add_argument("--harmonics", type=int, default=None,
                           help="harmonic truncation count")
        p.set_defaults(func=fn)

    p = subs.add_parser("sweep", help="bifurcation-diagram parameter sweep")
    add_config(p)
    p.add_argument("--param", required=True, help="model parameter to sweep (vs, vr, R, ...)")
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--steps", type=int, default=200)
    p.set_defaults(func=_cmd_sweep)

    p = subs.add_parser("locate-snb", help="solve for the exact saddle-node point")
    add_config(p)
    p.add_argument("--param", required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--d-guess", type=float, default=None, dest="d_guess")
    p.set_defaults(func=_cmd_locate_snb)

    p = subs.add_parser("simulate", help="clock-sampled trajectory log")
    add_config(p)
    p.add_argument("--periods", type=int, default=100)
    p.add_argument("--x0", default=None, help="initial state, comma separated")
    p.set_defaults(func=_cmd_simulate)

    p = subs.add_parser("example", help="run a built-in fixture end-to-end")
    p.add_argument("name", choices=list(fixtures.EXAMPLE_NAMES))
    p.set_defaults(func=_cmd_example)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, NumericError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
