"""Command-line front end: traces, comparisons, limit studies, fits and force dumps as CSV."""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import closed_form, fitting, oracle
from .model import (
    INFINITE,
    DriveKind,
    DriveSpec,
    InitialConditions,
    Method,
    MethodKind,
    SystemParams,
    TimeGrid,
    Trace,
    ValidationError,
    find_violations,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3

# numeric errors that mean "this configuration cannot be evaluated"
_INPUT_ERRORS = (
    ValidationError,
    closed_form.DeltaNotEvaluable,
    closed_form.KindMismatch,
    closed_form.ErfApproxOutOfRange,
    closed_form.IllConditioned,
    closed_form.TruncationBudgetExceeded,
    oracle.StepTooLarge,
    fitting.InsufficientData,
    fitting.SingularJacobian,
)


class InputError(Exception):
    pass


def fmt(value) -> str:
    return "%.17g" % value


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: Optional[SystemParams]
    drive: DriveSpec
    grid: TimeGrid
    methods: tuple
    out: Optional[str]
    seed: int
    normalized: bool = False
    workers: int = 1


# ------------------------------------------------------------------ parsing


def _pulses(text):
    if text.lower() in ("inf", "infinite"):
        return INFINITE
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("pulse count must be >= 1 or 'inf'")
    return n


def _common(p, needs_system=True):
    g = p.add_argument_group("system")
    g.add_argument("--gamma", type=float, required=needs_system, help="damping rate")
    g.add_argument("--omega", type=float, help="damped frequency")
    g.add_argument("--omega0", type=float, help="natural frequency")
    g.add_argument("--mass", type=float, default=1.0)
    d = p.add_argument_group("drive")
    d.add_argument("--kind", choices=[k.value for k in DriveKind], required=True)
    d.add_argument("--impulse", type=float, default=1.0, help="impulse per pulse")
    d.add_argument("--period", type=float, required=True)
    d.add_argument("--tau", type=float, action="append", help="pulse half-width (ignored for dc)")
    d.add_argument("--shift", type=float, required=True, help="centre of the first pulse")
    d.add_argument("--pulses", type=_pulses, default=INFINITE, help="N or inf")
    t = p.add_argument_group("grid")
    t.add_argument("--t-start", type=float, default=0.0)
    t.add_argument("--t-end", type=float, help="default: 6 periods")
    t.add_argument("--samples", type=int, default=6000)
    o = p.add_argument_group("output")
    o.add_argument("--out", help="CSV path (default: standard output)")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsed-oscillator",
        description="Damped harmonic oscillator driven by periodic pulse trains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="displacement trace for one or more methods")
    _common(p)
    p.add_argument("--method", action="append", help="tp | hs[:k_c] | approx2 | oracle[:dt]")
    p.add_argument("--normalized", action="store_true", help="write x*m/I_p")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--v0", type=float, default=0.0)

    p = sub.add_parser("compare", help="difference metrics between methods")
    _common(p)
    p.add_argument("--method", action="append", required=True)
    p.add_argument("--normalized", action="store_true")

    p = sub.add_parser("limit-study", help="distance to the Dirac comb as tau shrinks")
    _common(p)
    p.add_argument("--method", action="append", help="closed form used for both drives (default tp)")

    p = sub.add_parser("fit", help="recover gamma and omega from a trace")
    _common(p, needs_system=False)
    p.add_argument("--data", help="CSV with columns t,x")
    p.add_argument("--synthetic", action="store_true", help="generate data from --gamma/--omega")
    p.add_argument("--noise", type=float, default=0.0, help="noise sigma as a fraction of peak")
    p.add_argument("--method", action="append", help="model: tp (default) or approx2")
    p.add_argument("--init-gamma", type=float)
    p.add_argument("--init-omega", type=float)
    p.add_argument("--residuals", help="write t,residual CSV here")
    p.add_argument("--max-iter", type=int, default=200)

    p = sub.add_parser("force", help="forcing waveform (sp and gp only)")
    _common(p, needs_system=False)
    return parser


def _system(args) -> SystemParams:
    if args.gamma is None:
        raise InputError("--gamma is required")
    if args.omega is None and args.omega0 is None:
        raise InputError("give --omega or --omega0")
    if args.omega0 is not None:
        params = SystemParams(gamma=args.gamma, omega0=args.omega0, m=args.mass)
        if args.omega is not None:
            w0sq = args.omega0**2
            if abs(w0sq - args.omega**2 - args.gamma**2) > 1e-9 * w0sq:
                raise InputError("--omega and --omega0 disagree: need omega0^2 = omega^2 + gamma^2")
        return params
    return SystemParams.from_omega(args.gamma, args.omega, args.mass)


def _drive(args, tau=None) -> DriveSpec:
    kind = DriveKind(args.kind)
    if tau is None:
        tau = args.tau[0] if args.tau else None
    if kind is DriveKind.DIRAC_COMB:
        tau = 0.0
    elif tau is None:
        raise InputError(f"--tau is required for kind {kind.value}")
    return DriveSpec(kind, args.period, tau, args.shift, args.pulses, args.impulse)


def _grid(args) -> TimeGrid:
    t_end = args.t_end if args.t_end is not None else args.t_start + 6.0 * args.period
    try:
        return TimeGrid(args.t_start, t_end, args.samples)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _methods(args, default="tp"):
    texts = args.method or [default]
    try:
        return tuple(Method.parse(m) for m in texts)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _check(params, drive):
    # drive-only checks borrow a harmless system
    problems = find_violations(params if params is not None else SystemParams(0.5, 1.0), drive)
    if problems:
        raise ValidationError(problems)


def _column_names(methods):
    if len(methods) == 1:
        return ["x"]
    names, seen = [], {}
    for m in methods:
        base = f"x_{m.label}"
        seen[base] = seen.get(base, 0) + 1
        names.append(base if seen[base] == 1 else f"{base}_{seen[base]}")
    return names


def write_csv(path, header, columns):
    """Write columns with 17 significant digits and ``\\n`` line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _traces(cfg: RunConfig, ic=InitialConditions()):
    traces = [
        closed_form.evaluate_trace(cfg.grid, cfg.params, cfg.drive, ic, m, workers=cfg.workers)
        for m in cfg.methods
    ]
    if cfg.normalized:
        scale = cfg.params.m / cfg.drive.impulse
        traces = [Trace(tr.grid, tr.values * scale, tr.method, tr.params_digest, tr.diagnostics) for tr in traces]
    for tr in traces:
        for note in tr.diagnostics:
            print(f"warning: {note}", file=sys.stderr)
    return traces


def _config(args, command):
    params = _system(args) if command != "force" else None
    drive = _drive(args)
    _check(params, drive)
    methods = () if command == "force" else _methods(args)
    return RunConfig(
        command=command,
        params=params,
        drive=drive,
        grid=_grid(args),
        methods=methods,
        out=args.out,
        seed=args.seed,
        normalized=getattr(args, "normalized", False),
        workers=args.workers,
    )


# ----------------------------------------------------------------- commands


def cmd_trace(args) -> int:
    cfg = _config(args, "trace")
    if cfg.normalized and cfg.drive.impulse == 0:
        raise InputError("--normalized needs a nonzero impulse")
    traces = _traces(cfg, InitialConditions(args.x0, args.v0))
    write_csv(cfg.out, ["t"] + _column_names(cfg.methods), [cfg.grid.times] + [tr.values for tr in traces])
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args, "compare")
    if len(cfg.methods) < 2:
        raise InputError("compare needs at least two --method flags")
    if cfg.normalized and cfg.drive.impulse == 0:
        raise InputError("--normalized needs a nonzero impulse")
    traces = _traces(cfg)
    names = _column_names(cfg.methods)
    if cfg.out is not None:
        write_csv(cfg.out, ["t"] + names, [cfg.grid.times] + [tr.values for tr in traces])
    ref = traces[0]
    for name, tr in zip(names[1:], traces[1:]):
        c = oracle.compare(ref, tr)
        prefix = "" if len(traces) == 2 else f"{name}."
        print(f"{prefix}max_abs={fmt(c.max_abs_diff)}")
        print(f"{prefix}max_rel_to_peak={fmt(c.max_rel_to_peak)}")
        print(f"{prefix}rms={fmt(c.rms_diff)}")
        print(f"{prefix}argmax_time={fmt(c.argmax_time)}")
        if c.rel_is_absolute:
            print(f"{prefix}rel_is_absolute=true")
    return EXIT_OK


def cmd_limit_study(args) -> int:
    kind = DriveKind(args.kind)
    if kind is DriveKind.DIRAC_COMB:
        raise InputError("limit-study compares sp or gp against dc; --kind dc makes no sense")
    if not args.tau:
        raise InputError("give at least one --tau")
    params = _system(args)
    drives = [_drive(args, tau) for tau in args.tau]
    problems = [v for d in drives for v in find_violations(params, d)]
    if problems:
        raise ValidationError(problems)
    grid = _grid(args)
    (method,) = _methods(args)[:1]
    dc = DriveSpec(DriveKind.DIRAC_COMB, args.period, 0.0, args.shift, args.pulses, args.impulse)
    ref = closed_form.evaluate_trace(grid, params, dc, method=method, workers=args.workers)
    diffs = []
    for d in drives:
        tr = closed_form.evaluate_trace(grid, params, d, method=method, workers=args.workers)
        diffs.append(oracle.compare(ref, tr).max_abs_diff)
    write_csv(args.out, ["tau", "max_abs_diff_vs_dc"], [[d.tau for d in drives], diffs])
    return EXIT_OK


def read_trace_csv(path) -> Trace:
    """Read ``t,x`` (first value column) onto a uniform grid; raises InputError if malformed."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2 or len(rows[0]) < 2 or rows[0][0].strip() != "t":
        raise InputError("data CSV needs a header starting with t and at least one value column")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
    except (ValueError, IndexError) as exc:
        raise InputError(f"malformed data row: {exc}") from exc
    t, x = data[:, 0], data[:, 1]
    if t.size < 10:
        raise InputError("data CSV needs at least 10 rows")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
        raise InputError("data CSV contains non-finite values")
    dt = np.diff(t)
    if not np.all(dt > 0):
        raise InputError("t must be strictly increasing")
    grid = TimeGrid(float(t[0]), float(t[-1]), int(t.size))
    if np.max(np.abs(t - grid.times)) > 1e-9 * max(1.0, abs(t[-1])):
        raise InputError("t must be uniformly spaced")
    return Trace(grid, x, Method.time_periodic())


def cmd_fit(args) -> int:
    drive = _drive(args)
    _check(None, drive)
    (model,) = _methods(args)[:1]
    if model.kind not in (MethodKind.TIME_PERIODIC, MethodKind.SECOND_HARMONIC):
        raise InputError("fit model must be tp or approx2")
    if args.synthetic == (args.data is not None):
        raise InputError("give exactly one of --data or --synthetic")
    if args.synthetic:
        params = _system(args)
        _check(params, drive)
        data = fitting.synthetic_data(
            _grid(args), params.gamma, params.omega, drive, params.m, args.noise, args.seed, model
        )
    else:
        data = read_trace_csv(args.data)
    init = None
    if args.init_gamma is not None or args.init_omega is not None:
        if args.init_gamma is None or args.init_omega is None:
            raise InputError("give both --init-gamma and --init-omega")
        init = (args.init_gamma, args.init_omega)
    try:
        problem = fitting.FitProblem(data, drive, args.mass, model, init)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    result = fitting.fit(problem, max_iter=args.max_iter)
    print(f"gamma_hat={fmt(result.gamma_hat)}")
    print(f"omega_hat={fmt(result.omega_hat)}")
    print(f"omega0_hat={fmt(result.omega0_hat)}")
    print(f"residual_rms={fmt(result.residual_rms)}")
    print(f"n_iterations={result.n_iterations}")
    print(f"converged={'true' if result.converged else 'false'}")
    if args.residuals:
        model_x = fitting.model_values(data.times, result.gamma_hat, result.omega_hat, drive, args.mass, model)
        write_csv(args.residuals, ["t", "residual"], [data.times, data.values - model_x])
    if not result.converged:
        print("error: NotConverged: iteration cap reached", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_force(args) -> int:
    cfg = _config(args, "force")
    values = closed_form.force_eval(cfg.grid.times, cfg.drive)
    write_csv(cfg.out, ["t", "F"], [cfg.grid.times, values])
    return EXIT_OK


COMMANDS = {
    "trace": cmd_trace,
    "compare": cmd_compare,
    "limit-study": cmd_limit_study,
    "fit": cmd_fit,
    "force": cmd_force,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _INPUT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        # reader went away (e.g. piped into head); not an error
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["RunConfig", "build_parser", "main", "read_trace_csv", "write_csv"]
