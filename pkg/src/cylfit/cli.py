"""``cylfit`` command line: fit, generate, eval, verify.

Exit codes: 0 success, 1 usage or input error, 2 degenerate input refused,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .data import GeneratorSpec, dump_json, fit_report, format_points_csv, generate_cylinder_cloud, parse_points_csv
from .errors import DegenerateCloudError, InvalidInputError, NumericFailureError
from .fitter import FitConfig, dbar2_direct, fit_cylinder, reduced_objective, stationarity_residual
from .geom import Cylinder, distance_to_axis, line_from_point_direction
from .moments import DegeneracyClass, quartic_tensor
from .oracle import RESOLUTION_DEFAULT, biquadratic_error_by_definition, grid_best_axis, rms_error

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_NUMERIC = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers in {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cylfit", description="Biquadratic cylinder fitting for 3D point clouds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit a cylinder to a CSV point cloud")
    fit.add_argument("--input", required=True, help="CSV file with x,y,z rows ('-' for stdin)")
    fit.add_argument("--output", help="write the JSON report here instead of stdout")
    fit.add_argument("--grid", type=int, default=FitConfig.grid_count, help="hemisphere seed directions")
    fit.add_argument("--multistart", type=int, default=FitConfig.multistart_count, help="seeds to refine")
    fit.add_argument("--tol", type=float, default=FitConfig.tol_stationarity, help="stationarity tolerance")
    fit.add_argument("--rank-eps", type=float, default=FitConfig.rank_eps, help="relative eigenvalue threshold")
    fit.add_argument("--max-iters", type=int, default=FitConfig.max_refine_iters)
    fit.add_argument("--residuals", action="store_true", help="include per-point surface distances")
    fit.add_argument("--allow-coplanar", action="store_true",
                     help="best-effort fit for coplanar clouds instead of refusing")
    fit.add_argument("--workers", type=int, default=1, help="threads used to refine seeds")

    gen = sub.add_parser("generate", help="sample a synthetic cylinder cloud")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--radius", type=float, required=True)
    gen.add_argument("--height", type=float, required=True)
    gen.add_argument("--axis-point", type=_triple, default=(0.0, 0.0, 0.0))
    gen.add_argument("--axis-dir", type=_triple, default=(0.0, 0.0, 1.0))
    gen.add_argument("--noise", type=float, default=0.0, help="Gaussian sigma per coordinate")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--output", help="CSV destination (default stdout)")

    ev = sub.add_parser("eval", help="evaluate a given cylinder against a cloud")
    ev.add_argument("--input", required=True)
    ev.add_argument("--axis-point", type=_triple, required=True)
    ev.add_argument("--axis-dir", type=_triple, required=True)
    ev.add_argument("--radius", type=float, required=True)

    ver = sub.add_parser("verify", help="compare the fit with the brute-force grid oracle")
    ver.add_argument("--input", required=True)
    ver.add_argument("--grid", type=int, default=RESOLUTION_DEFAULT)
    return parser


def _read_cloud(path: str) -> np.ndarray:
    if path == "-":
        return parse_points_csv(sys.stdin.read())
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_points_csv(text)


def _emit(text: str, output: str | None, stdout) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


def _cmd_fit(args, stdout, stderr) -> int:
    cloud = _read_cloud(args.input)
    cfg = FitConfig(
        grid_count=args.grid,
        multistart_count=args.multistart,
        tol_stationarity=args.tol,
        max_refine_iters=args.max_iters,
        rank_eps=args.rank_eps,
        emit_residuals=args.residuals,
        allow_coplanar=args.allow_coplanar,
        workers=args.workers,
    )
    fit = fit_cylinder(cloud, cfg)
    for warning in fit.diagnostics.warnings:
        stderr.write(f"warning: {warning}\n")
    _emit(dump_json(fit_report(fit)), args.output, stdout)
    return EXIT_OK


def _cmd_generate(args, stdout, stderr) -> int:
    spec = GeneratorSpec(n=args.n, radius=args.radius, height=args.height, axis_point=args.axis_point,
                         axis_dir=args.axis_dir, noise_sigma=args.noise, seed=args.seed)
    _emit(format_points_csv(generate_cylinder_cloud(spec)), args.output, stdout)
    return EXIT_OK


def _cmd_eval(args, stdout, stderr) -> int:
    cloud = _read_cloud(args.input)
    cyl = Cylinder(line_from_point_direction(args.axis_point, args.axis_dir), args.radius)
    d = np.abs(distance_to_axis(cyl.axis, cloud) - cyl.rho)
    report = {
        "dbar2": dbar2_direct(cloud, cyl.axis, cyl.rho),
        "biquadratic_by_definition": biquadratic_error_by_definition(cloud, cyl),
        "rms_distance": rms_error(cloud, cyl),
        "residuals": [float(x) for x in d],
    }
    stdout.write(dump_json(report))
    return EXIT_OK


def _cmd_verify(args, stdout, stderr) -> int:
    cloud = _read_cloud(args.input)
    fit = fit_cylinder(cloud)
    grid = grid_best_axis(cloud, args.grid)
    q = quartic_tensor(cloud)
    report = {
        "oracle": {
            "direction": [float(x) for x in grid.best_direction],
            "objective": grid.best_value,
            "resolution": grid.resolution,
        },
        "fit": {
            "direction": [float(x) for x in fit.axis.a],
            "objective": reduced_objective(q, fit.axis.a),
            "stationarity_residual": stationarity_residual(q, fit.axis.a),
        },
        "angle_deg": float(np.degrees(np.arccos(min(1.0, abs(float(grid.best_direction @ fit.axis.a)))))),
        "fit_not_worse": bool(reduced_objective(q, fit.axis.a) <= grid.best_value + 1e-9 * q.form.spread**4),
    }
    stdout.write(dump_json(report))
    return EXIT_OK


_COMMANDS = {"fit": _cmd_fit, "generate": _cmd_generate, "eval": _cmd_eval, "verify": _cmd_verify}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args, stdout, stderr)
    except DegenerateCloudError as exc:
        if exc.degeneracy is DegeneracyClass.SIMPLE:
            stderr.write(f"warning: {exc.explanation}\n")
        stdout.write(dump_json({"degeneracy": exc.degeneracy.value, "error": exc.explanation}))
        return EXIT_DEGENERATE
    except NumericFailureError as exc:
        stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except InvalidInputError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
