"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .export import (dump_json, read_config, svg_lines, svg_loglog, write_csv, write_text)
from .models import MODEL_NAMES, ModelError, ManifoldPoint, builtin_model, validate_model
from .periodic import PredictionError, deviation_trend, length_spectrum, spiral_monodromy
from .polyalg import (HomPoly, PolyError, a_operator, decompose, poisson_uv,
                      solve_cohomological)
from .reeb import (DEFAULT_RULE, TRANSPORT_RULES, monodromy, periodic_orbit, transport_frame)
from .spiral import (SPIRAL_CONFIG, RegimeError, adiabatic_scan, calibrate_signs,
                     convergence_scan, initial_covector)
from .symplectic import (DEFAULT_CONFIG, CharacteristicDataError, IntegrationError,
                         bracket_identity_residuals, geodesic)

TRAJECTORY_HEADER = ("t", "x", "y", "z", "px", "py", "pz", "gstar", "hZ")
ORBIT_HEADER = ("tau", "x", "y", "z", "E1x", "E1y", "E1z", "E2x", "E2y", "E2z")
SCAN_HEADER = ("h0", "J0", "pos_err", "vel_err", "J_drift")
ADIABATIC_HEADER = ("h0", "J0", "J_drift", "J_ratio")
SPECTRUM_HEADER = ("j", "k", "T_pred", "T_found", "rel_dev", "residual", "iters", "status")

# paths and plumbing left out of the recorded configuration
_UNRECORDED = {"out", "svg", "fit", "config", "handler", "workers"}
NUMERICAL_ERRORS = (IntegrationError, RegimeError, PredictionError, CharacteristicDataError,
                    ModelError, PolyError, ArithmeticError, np.linalg.LinAlgError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _floats(text: str, n: Optional[int] = None) -> list:
    try:
        vals = [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
    return vals


def _point(text: str) -> list:
    return _floats(text, 3)


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _h0_list(text: str) -> list:
    vals = _floats(text)
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive h0 values, got {text!r}")
    return vals


# ---------------------------------------------------------------------------
# option groups


def _model_options(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=MODEL_NAMES, default="heisenberg")
    g.add_argument("--T0", type=_positive, default=2 * math.pi,
                   help="fibre period of heisenberg-quotient")
    g.add_argument("--aniso", type=_positive, default=1.1, help="frame anisotropy of s3")


def _integrator_options(p, base):
    g = p.add_argument_group("integrator")
    g.add_argument("--rel-tol", type=_positive, default=base.rel_tol)
    g.add_argument("--abs-tol", type=_positive, default=base.abs_tol)
    g.add_argument("--max-step", type=_positive, default=base.max_step)


def _common(p, out_help: str = "output file"):
    p.add_argument("--config", help="key = value file; command-line flags take precedence")
    p.add_argument("--out", help=out_help)
    p.add_argument("--svg", help="write a plot to this SVG file")
    p.add_argument("--seed", type=int, default=0, help="seed for random sampling")


def _start_options(p):
    p.add_argument("--q0", type=_point, default=[0.0, 0.0, 0.0], help="x,y,z in chart 0")
    p.add_argument("--angle", type=float, default=0.0,
                   help="initial velocity angle from X in the model frame")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reebspiral", description="Sub-Riemannian geodesics spiraling around Reeb orbits.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("validate", help="check the contact and Reeb identities of a model")
    _model_options(p)
    _common(p, "write the report here")
    p.add_argument("--n", type=int, default=100, help="number of random sample points")
    p.add_argument("--tol", type=_positive, default=1e-6)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("geodesic", help="integrate a unit-speed geodesic")
    _model_options(p)
    _common(p, "trajectory CSV")
    _start_options(p)
    _integrator_options(p, DEFAULT_CONFIG)
    p.add_argument("--p0", type=_point, help="initial covector px,py,pz (rescaled to g* = 1)")
    p.add_argument("--h0", type=float, default=5.0, help="h_Z when --p0 is not given")
    p.add_argument("--T", type=float, default=10.0, help="integration time")
    p.add_argument("--samples", type=int, default=0,
                   help="equally spaced samples; 0 records every accepted step")
    p.set_defaults(handler=cmd_geodesic)

    p = sub.add_parser("reeb-orbit", help="Reeb orbit with a transported frame")
    _model_options(p)
    _common(p, "orbit CSV")
    p.add_argument("--q0", type=_point, default=[0.0, 0.0, 0.0])
    p.add_argument("--tau", type=float, help="flow time; default one measured period")
    p.add_argument("--tau-max", type=_positive, default=10.0, help="search window for the period")
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--rule", choices=tuple(TRANSPORT_RULES), default=DEFAULT_RULE)
    p.set_defaults(handler=cmd_reeb_orbit)

    p = sub.add_parser("monodromy", help="monodromy angle of a closed Reeb orbit")
    _model_options(p)
    _common(p, "write the JSON summary here")
    p.add_argument("--q0", type=_point, default=[0.0, 0.0, 0.0])
    p.add_argument("--tau-max", type=_positive, default=10.0)
    p.add_argument("--loops", type=int, default=1)
    p.add_argument("--rule", choices=tuple(TRANSPORT_RULES), default=DEFAULT_RULE)
    p.set_defaults(handler=cmd_monodromy)

    p = sub.add_parser("spiral-scan", help="convergence of geodesics to the spiral prediction")
    _model_options(p)
    _common(p, "scan CSV")
    _start_options(p)
    _integrator_options(p, SPIRAL_CONFIG)
    p.add_argument("--h0", type=_h0_list, default=[10.0, 20.0, 40.0, 80.0])
    p.add_argument("--c", type=float, default=0.5, help="horizon factor: t in [0, c h0]")
    p.add_argument("--fit", help="write the fit summary JSON here")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_spiral_scan)

    p = sub.add_parser("adiabatic-scan", help="drift of J along spiraling geodesics")
    _model_options(p)
    _common(p, "scan CSV")
    _start_options(p)
    _integrator_options(p, SPIRAL_CONFIG)
    p.add_argument("--h0", type=_h0_list, default=[10.0, 20.0, 40.0, 80.0])
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--fit", help="write the fit summary JSON here")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_adiabatic_scan)

    p = sub.add_parser("spectrum", help="predicted against shot closed-geodesic lengths")
    _model_options(p)
    _common(p, "spectrum CSV")
    p.add_argument("--q0", type=_point, default=[0.0, 0.0, 0.0], help="point on the Reeb orbit")
    p.add_argument("--tau-max", type=_positive, help="period search window (default 1.5 T0 or 10)")
    p.add_argument("--jmin", type=int, default=1)
    p.add_argument("--jmax", type=int, default=1)
    p.add_argument("--kmin", type=int, default=3)
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--tol", type=_positive, default=1e-9)
    p.add_argument("--rule", choices=tuple(TRANSPORT_RULES), default=DEFAULT_RULE)
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("polyalg", help="homogeneous polynomial calculus in (u, v)")
    p.add_argument("op", choices=("bracket", "aop", "decompose", "solve"))
    p.add_argument("--config")
    p.add_argument("--p", help="first polynomial c0,...,ck (coefficient of u^(k-m) v^m at m)")
    p.add_argument("--q", help="polynomial operand")
    p.add_argument("--float", action="store_true", help="floating-point coefficients")
    p.set_defaults(handler=cmd_polyalg)
    return parser


# ---------------------------------------------------------------------------
# helpers


def _model(args):
    return builtin_model(args.model, T0=args.T0, aniso=args.aniso)


def _cfg(args, base):
    return base.__class__(rel_tol=args.rel_tol, abs_tol=args.abs_tol, max_step=args.max_step,
                          dense_output=base.dense_output, method=base.method,
                          midpoint_step=base.midpoint_step, max_steps=base.max_steps)


def resolved_config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED and v is not None}
    cfg["version"] = __version__
    return cfg


def _x0(model, q0, angle: float) -> np.ndarray:
    F = model.frame_at(q0)
    return math.cos(angle) * F[0] + math.sin(angle) * F[1]


def _emit(text: str, path=None):
    if path:
        write_text(path, text if text.endswith("\n") else text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    model = _model(args)
    report = validate_model(model, n=args.n, seed=args.seed)
    brackets = bracket_identity_residuals(model, args.n, args.seed)
    lines = report.lines() + ["  bracket identities {h_V,h_W} = -h_[V,W]:"]
    lines += [f"  {k:<22s} {v:.3e}" for k, v in brackets.items()]
    ok = report.ok(args.tol) and max(brackets.values()) < args.tol
    lines.append(f"  status: {'ok' if ok else 'FAILED'} (tol {args.tol:g})")
    _emit("\n".join(lines), args.out)
    if not ok:
        print(f"validation of {model.name} failed", file=sys.stderr)
    return 0 if ok else 2


def cmd_geodesic(args) -> int:
    model = _model(args)
    q0 = ManifoldPoint(np.array(args.q0), 0)
    if args.p0 is not None:
        p0 = np.array(args.p0)
    else:
        p0 = initial_covector(model, q0, np.array([math.cos(args.angle), math.sin(args.angle)]),
                              args.h0)
    t_eval = np.linspace(0.0, args.T, args.samples + 1) if args.samples > 0 else None
    tr = geodesic(model, q0, p0, args.T, _cfg(args, DEFAULT_CONFIG), t_eval)
    if args.out:
        write_csv(args.out, TRAJECTORY_HEADER, tr.rows(), resolved_config(args))
    if args.svg:
        write_text(args.svg, svg_lines([("x-y", tr.q[:, 0], tr.q[:, 1])],
                                       f"{model.name} geodesic", "x", "y"))
    print(dump_json({"samples": len(tr), "energy_drift": tr.energy_drift,
                     "end": tr.q[-1].tolist(), "chart": int(tr.chart[-1])}))
    return 0


def cmd_reeb_orbit(args) -> int:
    model = _model(args)
    q0 = ManifoldPoint(np.array(args.q0), 0)
    if args.tau is None:
        orbit = periodic_orbit(model, q0, args.tau_max, samples=args.samples, rule=args.rule)
    else:
        orbit = transport_frame(model, q0, None, args.tau, samples=args.samples, rule=args.rule)
    if args.out:
        write_csv(args.out, ORBIT_HEADER, orbit.rows(), resolved_config(args))
    if args.svg:
        ang = orbit.frame_angle()
        write_text(args.svg, svg_lines([("frame angle", orbit.tau, ang)],
                                       f"{model.name} transported frame", "tau", "angle"))
    print(dump_json({"period": orbit.period, "samples": len(orbit),
                     "gram_error": orbit.gram_error(), "rule": args.rule}))
    return 0


def cmd_monodromy(args) -> int:
    model = _model(args)
    q0 = ManifoldPoint(np.array(args.q0), 0)
    orbit = periodic_orbit(model, q0, args.tau_max, rule=args.rule)
    mono = monodromy(model, orbit, args.loops, rule=args.rule)
    sigma = calibrate_signs(model, q0)[1]
    out = {"period": orbit.period, "angle": mono.angle, "accumulated": mono.accumulated,
           "winding_class": mono.winding_class, "loops": mono.loops,
           "alpha0": spiral_monodromy(mono.accumulated / mono.loops, sigma),
           "closure_error": mono.closure_error, "rule": args.rule}
    _emit(dump_json(out), args.out)
    return 0


def cmd_spiral_scan(args) -> int:
    model = _model(args)
    if len(args.h0) < 3:
        raise UsageError("spiral-scan needs at least three --h0 values")
    q0 = ManifoldPoint(np.array(args.q0), 0)
    scan = convergence_scan(model, q0, _x0(model, q0, args.angle), args.h0, args.c,
                            _cfg(args, SPIRAL_CONFIG), workers=args.workers)
    if args.out:
        write_csv(args.out, SCAN_HEADER, scan.rows(), resolved_config(args))
    summary = scan.summary()
    if args.fit:
        write_text(args.fit, dump_json(summary) + "\n")
    if args.svg:
        hs = [r.h0 for r in scan.runs]
        write_text(args.svg, svg_loglog(hs, [
            ("position", [r.pos_err for r in scan.runs], scan.pos_fit.slope, scan.pos_fit.intercept),
            ("velocity", [r.vel_err for r in scan.runs], scan.vel_fit.slope, scan.vel_fit.intercept),
        ], f"{model.name} spiral convergence", "h0"))
    print(dump_json(summary))
    return 0


def cmd_adiabatic_scan(args) -> int:
    model = _model(args)
    q0 = ManifoldPoint(np.array(args.q0), 0)
    scan = adiabatic_scan(model, q0, _x0(model, q0, args.angle), args.h0, args.c,
                          _cfg(args, SPIRAL_CONFIG), workers=args.workers)
    if args.out:
        write_csv(args.out, ADIABATIC_HEADER, scan.rows(), resolved_config(args))
    summary = {"fit": scan.fit.as_dict(), "bounded": scan.bounded}
    if args.fit:
        write_text(args.fit, dump_json(summary) + "\n")
    if args.svg:
        write_text(args.svg, svg_loglog([r.J0 for r in scan.results], [
            ("J drift", [r.drift for r in scan.results], scan.fit.slope, scan.fit.intercept),
        ], f"{model.name} adiabatic drift", "J0"))
    print(dump_json(summary))
    return 0


def cmd_spectrum(args) -> int:
    model = _model(args)
    if args.jmin < 1 or args.jmax < args.jmin or args.kmin < 1 or args.kmax < args.kmin:
        raise UsageError("need 1 <= jmin <= jmax and 1 <= kmin <= kmax")
    q0 = ManifoldPoint(np.array(args.q0), 0)
    tau_max = args.tau_max
    if tau_max is None:
        tau_max = 1.5 * args.T0 if args.model == "heisenberg-quotient" else 10.0
    orbit = periodic_orbit(model, q0, tau_max, rule=args.rule)
    signs = calibrate_signs(model, q0)
    mono = monodromy(model, orbit, rule=args.rule)
    alpha0 = spiral_monodromy(mono.accumulated, signs[1])
    rows = length_spectrum(model, orbit, alpha0, range(args.jmin, args.jmax + 1),
                           range(args.kmin, args.kmax + 1), args.tol, signs=signs)
    if args.out:
        write_csv(args.out, SPECTRUM_HEADER, (r.as_tuple() for r in rows), resolved_config(args))
    if args.svg:
        ks = [r.k for r in rows]
        write_text(args.svg, svg_lines([("predicted", ks, [r.T_pred for r in rows]),
                                        ("found", ks, [r.T_found for r in rows])],
                                       f"{model.name} length spectrum", "k", "T"))
    conv = [r for r in rows if r.status == "converged"]
    print(dump_json({"T0": orbit.period, "alpha0": alpha0, "cells": len(rows),
                     "converged": len(conv),
                     "max_rel_dev": max((r.rel_dev for r in conv), default=None),
                     "trend": deviation_trend(rows)}))
    return 0


def cmd_polyalg(args) -> int:
    def poly(text, name):
        if text is None:
            raise UsageError(f"polyalg {args.op} needs --{name}")
        P = HomPoly.parse(text)
        return P.to_float() if args.float else P

    if args.op == "bracket":
        print(poisson_uv(poly(args.p, "p"), poly(args.q, "q")).format())
    elif args.op == "aop":
        print(a_operator(poly(args.q, "q")).format())
    elif args.op == "decompose":
        Q0, c = decompose(poly(args.q, "q"))
        print(Q0.format())
        print(HomPoly([c]).format())
    else:
        print(solve_cohomological(poly(args.q, "q")).format())
    return 0


# ---------------------------------------------------------------------------
# entry points


def _subparser(parser, command: str) -> argparse.ArgumentParser:
    return parser._subparsers._group_actions[0].choices[command]


def _parse(parser, argv: Sequence[str]) -> argparse.Namespace:
    # unknown flags are reported against the subcommand so its usage lists the valid ones
    args, extra = parser.parse_known_args(argv)
    if extra:
        sub = _subparser(parser, args.command)
        raise UsageError(f"{sub.prog}: unrecognized arguments: {' '.join(extra)}\n"
                         f"{sub.format_usage()}")
    return args


def _apply_config(parser, argv: Sequence[str]) -> argparse.Namespace:
    args = _parse(parser, argv)
    if not getattr(args, "config", None):
        return args
    try:
        values = read_config(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    sub = _subparser(parser, args.command)
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("config", "help", "command"):
            raise UsageError(f"unknown config key {key!r} for {args.command}; valid keys: "
                             + ", ".join(sorted(a.option_strings[0].lstrip("-")
                                                for a in sub._actions if a.option_strings
                                                and a.dest not in ("help", "config"))))
        act = actions[dest]
        if act.nargs == 0:
            defaults[dest] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[dest] = value
    sub.set_defaults(**defaults)
    return _parse(parser, argv)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = None
    try:
        args = _apply_config(parser, argv)
        return args.handler(args)
    except UsageError as exc:
        msg = str(exc).rstrip()
        if args is not None and "usage:" not in msg:
            msg += "\n" + _subparser(parser, args.command).format_usage().rstrip()
        print(msg, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except NUMERICAL_ERRORS as exc:
        print(f"reebspiral: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
