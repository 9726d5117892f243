"""Command line front end.

Exit codes: 0 pass, 1 verifier failure, 2 usage or configuration error,
3 numeric failure.  Artifacts never record timings or thread counts, so a
rerun with the same arguments writes identical bytes.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from ._parallel import resolve_threads
from .errors import InsufficientDecay
from .geometry import Dimensions, sample_frames, sample_stiefel_points
from .inversion import ReconGrid, fbp_reconstruct, inversion_frames, relative_l2
from .moments import PASS_THRESHOLD, cavalieri_report, moment_table
from .phantoms import load_phantom, random_mixture, save_phantom, unit_gaussian
from .projective import (HomogeneousField, kernel_john_check, kernel_scale, projective_radon,
                         projective_stiefel_function, random_complex_frame)
from .rangecheck import (StiefelFunction, characteristic_test, john_residual_field,
                         phantom_stiefel_function)
from .transform import QuadratureSpec, SigmaGrid, radon_sinogram, sinogram_decay_report

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
KERNEL_ANALYTIC_TOL = 1e-12
KERNEL_FD_TOL = 1e-6


class UsageError(Exception):
    pass


def _json_default(obj):
    if isinstance(obj, (np.generic, np.ndarray)):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump_json(data, path) -> None:
    text = json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _say(args, text: str) -> None:
    if not getattr(args, "quiet", False):
        print(text)


def _quad(args) -> QuadratureSpec:
    return QuadratureSpec(scheme=args.quad_scheme, nodes_per_axis=args.quad_nodes,
                          radius=args.quad_radius)


# -- subcommands ------------------------------------------------------------

def cmd_phantom(args) -> int:
    dims = Dimensions(args.n, args.n - 1 if args.p is None else args.p)
    if args.unit:
        phi = unit_gaussian(dims.n, dims.p)
    else:
        phi = random_mixture(dims, args.terms, args.seed, center_scale=args.center_scale)
    save_phantom(phi, args.out)
    _say(args, f"wrote {args.out}: n={dims.n} p={dims.p} terms={len(phi.terms)}")
    return EXIT_PASS


def cmd_forward(args) -> int:
    phi = load_phantom(args.phantom)
    dims = phi.dims
    if args.frame_kind == "random":
        frames = sample_frames(dims, args.frames, args.seed)
    else:
        if dims.p != dims.n - 1:
            raise UsageError("uniform frames need a hyperplane phantom (p = n - 1)")
        frames = inversion_frames(dims.n, args.frames)
    grid = SigmaGrid.parse(args.sigma, dims.codim)
    s = radon_sinogram(phi, frames, grid, _quad(args), args.threads)
    io.write_sinogram(s, args.out)
    if args.csv:
        io.write_sinogram_csv(s, args.csv)
    decay = sinogram_decay_report(s)
    summary = {"n": dims.n, "p": dims.p, "frames": len(frames), "sigma_shape": list(grid.shape),
               "min": float(s.values.min()), "max": float(s.values.max()),
               "decay_ratio": decay.ratio, "non_rapid_decrease": decay.flagged}
    _say(args, json.dumps(summary, sort_keys=True))
    return EXIT_PASS


def _bilinear_perturbation(psi: StiefelFunction, eps: float) -> StiefelFunction:
    """``psi + eps * xi[0, 0] * xi[1, 1]``, a function with a nonzero bracket."""
    base = psi.func

    def func(stack):
        stack = np.asarray(stack, dtype=float)
        return base(stack) + eps * stack[..., 0, 0] * stack[..., 1, 1]

    return StiefelFunction(func, psi.dims, None, psi.vectorized)


def cmd_john(args) -> int:
    phi = load_phantom(args.phantom)
    dims = phi.dims
    psi = phantom_stiefel_function(phi)
    if args.perturb:
        if dims.codim < 2:
            raise UsageError("--perturb needs n - p >= 2")
        psi = _bilinear_perturbation(psi, args.perturb)
    samples = sample_stiefel_points(dims, args.samples, args.seed)
    report = john_residual_field(psi, samples, args.h, args.order, args.threads)
    ok = report.vacuous or report.rms <= args.threshold * report.scale
    extra = {"n": dims.n, "p": dims.p, "threshold": args.threshold, "perturb": args.perturb,
             "seed": args.seed, "pass": ok}
    _dump_json({**report.to_dict(), **extra}, args.out)
    if args.csv:
        report.to_csv(args.csv)
    status = "vacuous" if report.vacuous else ("pass" if ok else "fail")
    _say(args, f"john {status}: rms={report.rms:.6g} scale={report.scale:.6g}")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_cavalieri(args) -> int:
    s = io.read_sinogram(args.sinogram)
    try:
        report = cavalieri_report(s, args.m_max, args.threshold)
    except InsufficientDecay as exc:
        _dump_json({"overall_pass": False, "error": str(exc), "threshold": args.threshold},
                   args.out)
        _say(args, f"cavalieri fail: {exc}")
        return EXIT_FAIL
    _dump_json(report.to_dict(), args.out)
    if args.csv:
        moment_table(s, args.m_max).to_csv(args.csv)
    worst = max(f.residual for f in report.fits)
    _say(args, f"cavalieri {'pass' if report.overall else 'fail'}: worst residual {worst:.3g}")
    return EXIT_PASS if report.overall else EXIT_FAIL


def cmd_invert(args) -> int:
    s = io.read_sinogram(args.sinogram)
    n = s.dims.n
    if args.grid:
        axes = SigmaGrid.parse(args.grid, n).axes
    else:
        lo, hi, _ = s.sigma_grid.axes[0]
        r = max(abs(lo), abs(hi))
        axes = ((-r, r, 128),) * n
    recon = fbp_reconstruct(s, ReconGrid(axes), args.threads)
    io.write_grid(recon, args.out)
    if args.csv:
        io.write_grid_csv(recon, args.csv)
    result = {"n": n, "grid": [list(a) for a in axes], **recon.metadata}
    ok = True
    if args.phantom:
        err = relative_l2(recon, load_phantom(args.phantom))
        result["relative_l2_error"] = err
        _say(args, f"relative L2 error {err:.6g}")
        if args.max_error is not None:
            ok = err <= args.max_error
    if args.report:
        _dump_json(result, args.report)
    return EXIT_PASS if ok else EXIT_FAIL


def make_field(kind: str, n: int, p: int, axis=None, width: float = 1.0) -> HomogeneousField:
    a = np.zeros(n + 1)
    a[0] = 1.0
    if axis is not None:
        a = np.asarray(axis, dtype=float)
        if a.shape != (n + 1,) or not np.linalg.norm(a) > 0:
            raise UsageError(f"--axis needs {n + 1} components, not all zero")
        a = a / np.linalg.norm(a)
    if kind == "constant":
        func = lambda x: np.ones(x.shape[:-1])
    elif kind == "lorentzian":
        func = lambda x: 1.0 / (1.0 + width * (x @ a) ** 2)
    elif kind == "gaussian":
        func = lambda x: np.exp(-width * (x @ a) ** 2)
    else:
        raise UsageError(f"unknown field kind {kind!r}")
    return HomogeneousField(func, n, p)


def cmd_projective(args) -> int:
    p = args.n - 2 if args.p is None else args.p
    phi = make_field(args.field, args.n, p, args.axis, args.width)
    outer = Dimensions(args.n + 1, p + 1)   # orthonormal (n - p) x (n + 1) rows
    frames = sample_frames(outer, args.samples, args.seed)
    values = [projective_radon(phi, f.tau, args.nodes) for f in frames]
    result = {"n": args.n, "p": p, "field": args.field, "nodes": args.nodes, "seed": args.seed,
              "values": values}
    ok = True
    if args.n - p >= 2:
        pts = [x.xi[:, 1:] for x in sample_stiefel_points(outer, args.samples, args.seed)]
        report = john_residual_field(projective_stiefel_function(phi, args.nodes), pts, args.h,
                                     args.order, args.threads)
        ok = report.rms <= args.threshold * report.scale
        result["john"] = report.to_dict()
        if args.csv:
            report.to_csv(args.csv)
    else:
        result["john"] = {"vacuous": True}
    result["pass"] = ok
    _dump_json(result, args.out)
    _say(args, f"projective {'pass' if ok else 'fail'}")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_kernel_check(args) -> int:
    ps = range(args.n) if args.p is None else [args.p]
    rng = np.random.default_rng(args.seed)
    rows = []
    ok = True
    for p in ps:
        worst_a = worst_fd = 0.0
        for i in range(args.samples):
            frame = random_complex_frame(args.n, p, rng)
            scale = kernel_scale(frame)
            worst_a = max(worst_a, kernel_john_check(frame, "analytic") / scale)
            if i < args.fd_samples:
                worst_fd = max(worst_fd, kernel_john_check(frame, "finite_difference") / scale)
        good = worst_a <= KERNEL_ANALYTIC_TOL and worst_fd <= KERNEL_FD_TOL
        ok = ok and good
        rows.append({"n": args.n, "p": p, "vacuous": args.n - p == 1,
                     "analytic_max_relative": worst_a, "fd_max_relative": worst_fd, "pass": good})
    _dump_json({"seed": args.seed, "samples": args.samples, "fd_samples": args.fd_samples,
                "analytic_tol": KERNEL_ANALYTIC_TOL, "fd_tol": KERNEL_FD_TOL,
                "results": rows, "pass": ok}, args.out)
    _say(args, f"kernel-check {'pass' if ok else 'fail'}")
    return EXIT_PASS if ok else EXIT_FAIL


def _svd_rank_le_one(beta: np.ndarray) -> bool:
    s = np.linalg.svd(beta, compute_uv=False)
    return s.size < 2 or s[1] <= 1e-8 * max(s[0], np.finfo(float).tiny)


def cmd_symbol_check(args) -> int:
    if args.matrix:
        beta = np.asarray(json.loads(Path(args.matrix).read_text()), dtype=float)
        res = characteristic_test(beta)
        out = {"in_W": bool(res.in_W), "max_minor": res.max_minor,
               "svd_rank_le_one": _svd_rank_le_one(np.atleast_2d(beta))}
        _dump_json(out, args.out)
        return EXIT_PASS
    rng = np.random.default_rng(args.seed)
    wrong = {1: 0, 2: 0}
    for rank in (1, 2):
        for _ in range(args.samples):
            lo = rank
            n = int(rng.integers(lo, args.n + 1))
            k = int(rng.integers(lo, n + 1))
            beta = np.zeros((k, n + 1))
            for _r in range(rank):
                beta += np.outer(rng.standard_normal(k), rng.standard_normal(n + 1))
            if characteristic_test(beta).in_W != _svd_rank_le_one(beta):
                wrong[rank] += 1
    ok = wrong[1] == 0 and wrong[2] == 0
    _dump_json({"seed": args.seed, "samples_per_rank": args.samples, "n_max": args.n,
                "misclassified_rank1": wrong[1], "misclassified_rank2": wrong[2], "pass": ok},
               args.out)
    _say(args, f"symbol-check {'pass' if ok else 'fail'}")
    return EXIT_PASS if ok else EXIT_FAIL


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_report(args) -> int:
    if not (args.sinogram or args.grid or args.json):
        raise UsageError("report needs at least one of --sinogram, --grid, --json")
    out = {}
    if args.sinogram:
        s = io.read_sinogram(args.sinogram)
        d = sinogram_decay_report(s)
        out["sinogram"] = {"file": Path(args.sinogram).name, "sha256": _sha256(args.sinogram),
                           "n": s.dims.n, "p": s.dims.p, "frames": len(s.frames),
                           "sigma_axes": [list(a) for a in s.sigma_grid.axes],
                           "min": float(s.values.min()), "max": float(s.values.max()),
                           **d.to_dict()}
    if args.grid:
        g = io.read_grid(args.grid)
        out["grid"] = {"file": Path(args.grid).name, "sha256": _sha256(args.grid),
                       "axes": [list(a) for a in g.axes],
                       "min": float(g.values.min()), "max": float(g.values.max())}
    verdicts = []
    for path in args.json or []:
        data = json.loads(Path(path).read_text())
        verdict = data.get("pass", data.get("overall_pass"))
        verdicts.append(verdict)
        out.setdefault("reports", []).append({"file": Path(path).name, "pass": verdict})
    ok = all(v is not False for v in verdicts)
    out["pass"] = ok
    _dump_json(out, args.out)
    return EXIT_PASS if ok else EXIT_FAIL


# -- parser -----------------------------------------------------------------

def _floats(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $RADON_THREADS or 1)")
    common.add_argument("--quiet", action="store_true", help="suppress the stdout summary")

    quad = argparse.ArgumentParser(add_help=False)
    quad.add_argument("--quad-scheme", choices=("gauss_hermite", "trapezoid"),
                      default="gauss_hermite")
    quad.add_argument("--quad-nodes", type=int, default=64)
    quad.add_argument("--quad-radius", type=float, default=8.0)

    parser = argparse.ArgumentParser(prog="radon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", parents=[common], help="write a Gaussian-mixture phantom")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--terms", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--center-scale", type=float, default=1.0)
    p.add_argument("--unit", action="store_true", help="single unit Gaussian at the origin")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("forward", parents=[common, quad], help="sample the transform")
    p.add_argument("--phantom", required=True)
    p.add_argument("--frames", type=int, default=128)
    p.add_argument("--frame-kind", choices=("random", "uniform"), default="random")
    p.add_argument("--sigma", default="-6:6:256", help="lo:hi:count, or one per axis")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("john", parents=[common], help="John-system residuals of a phantom")
    p.add_argument("--phantom", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--order", type=int, choices=(2, 4, 6), default=6)
    p.add_argument("--threshold", type=float, default=1e-3, help="relative to max |psi|")
    p.add_argument("--perturb", type=float, default=0.0,
                   help="add this multiple of xi[0,0]*xi[1,1] (negative control)")
    p.add_argument("--out", default="-")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_john)

    p = sub.add_parser("cavalieri", parents=[common], help="moment conditions of a sinogram")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--m-max", type=int, default=4)
    p.add_argument("--threshold", type=float, default=PASS_THRESHOLD)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_cavalieri)

    p = sub.add_parser("invert", parents=[common], help="filtered backprojection")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--grid", help="lo:hi:count, or one per axis (default: sigma range, 128)")
    p.add_argument("--phantom", help="report the relative L2 error against this phantom")
    p.add_argument("--max-error", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.add_argument("--report")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("projective", parents=[common], help="real projective transform")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, default=None, help="default n - 2")
    p.add_argument("--field", choices=("constant", "lorentzian", "gaussian"), default="lorentzian")
    p.add_argument("--axis", type=_floats, default=None)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=64)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--order", type=int, choices=(2, 4, 6), default=6)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--out", default="-")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_projective)

    p = sub.add_parser("kernel-check", parents=[common], help="complex kernel annihilation")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, default=None, help="default: every p < n")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--fd-samples", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_kernel_check)

    p = sub.add_parser("symbol-check", parents=[common], help="rank <= 1 symbol test")
    p.add_argument("--n", type=int, default=6, help="largest n")
    p.add_argument("--samples", type=int, default=10000, help="matrices per rank")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--matrix", help="JSON file with a single matrix to classify")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_symbol_check)

    p = sub.add_parser("report", parents=[common], help="summarize artifacts and reports")
    p.add_argument("--sinogram")
    p.add_argument("--grid")
    p.add_argument("--json", action="append")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        args.threads = resolve_threads(args.threads)
        with np.errstate(over="ignore", invalid="ignore"):
            return args.func(args)
    except (ArithmeticError, np.linalg.LinAlgError, InsufficientDecay) as exc:
        print(f"radon: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"radon: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
