"""Command line entry point: ``ihtpocs <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 unreadable or mismatched input,
3 numerically degenerate input.
"""
from __future__ import annotations

import argparse
import logging
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import metrics
from .core import DegenerateInputError, FormatError, Geometry, read_matrix, write_matrix
from .phantom import PHANTOMS
from .projector import forward_project
from .report import EXPERIMENTS, export_pgm, run_experiment, write_manifest
from .solvers import METHODS, SolverConfig, reconstruct
from .sparsity import (DEFAULT_KNEE_FACTOR, DEFAULT_PROBE_ITERS, EstimationFailedError,
                       estimate_sparsity)

EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 1, 2, 3

log = logging.getLogger("ihtpocs")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size(text):
    m = re.fullmatch(r"(\d+)(?:x(\d+))?", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected <I> or <I>x<J>, got {text!r}")
    rows = int(m.group(1))
    return rows, int(m.group(2) or rows)


def _read_angles(path):
    text = Path(path).read_text().replace(",", " ")
    try:
        return [float(tok) for tok in text.split()]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def _load(path):
    try:
        return read_matrix(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None


def _geometry(args, sino_shape=None, image_shape=None):
    """Resolve the scan geometry from CLI flags and the data's dimensions."""
    angles = _read_angles(args.angles_file) if getattr(args, "angles_file", None) else None
    views = args.views
    if sino_shape is not None:
        if sino_shape[0] != views:
            raise InputError(f"sinogram has {sino_shape[0]} views, --views says {views}")
        if args.bins is not None and args.bins != sino_shape[1]:
            raise InputError(f"sinogram has {sino_shape[1]} bins, --bins says {args.bins}")
        bins = sino_shape[1]
    else:
        bins = args.bins
    if image_shape is None:
        image_shape = args.size
    if image_shape is None:
        # inverse of the default detector width ceil(sqrt(2) * n)
        n = math.floor(bins / math.sqrt(2))
        image_shape = (n, n)
    try:
        return Geometry.parallel(image_shape[0], image_shape[1], views, bins, angles=angles)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_phantom(args):
    rows, cols = args.size
    img = PHANTOMS[args.name](rows, cols)
    write_matrix(args.out, img)
    return {"name": args.name, "size": [rows, cols]}, [], [args.out]


def cmd_project(args):
    img = _load(args.image)
    geom = _geometry(args, image_shape=img.shape)
    write_matrix(args.out, forward_project(geom, img))
    return ({"views": geom.views, "bins": geom.bins, "size": list(img.shape),
             "angles": list(geom.angles)}, [args.image], [args.out])


def cmd_reconstruct(args):
    sino = _load(args.sino)
    geom = _geometry(args, sino_shape=sino.shape)
    ref = _load(args.ref) if args.ref else None
    if ref is not None and ref.shape != geom.image_shape:
        raise InputError(f"reference is {ref.shape}, reconstruction grid is {geom.image_shape}")
    snaps = ()
    if args.snapshot_every:
        snaps = range(args.snapshot_every, args.iters + 1, args.snapshot_every)
    try:
        cfg = SolverConfig(method=args.method, n_iter=args.iters, lam=args.lam,
                           lambda_decay=args.lambda_decay, sparsity=args.sparsity,
                           eps0=args.eps0, tv_steps=args.tv_steps, tv_beta=args.tv_beta,
                           snapshots=snaps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    def progress(k, _img, rec):
        log.info("iter %d eps=%.6g%s", k, rec.epsilon,
                 "" if rec.d is None else f" d={rec.d:.6g} r={rec.r:.6g} psnr={rec.psnr:.4g}")

    res = reconstruct(geom, sino, cfg, reference=ref, callback=progress)
    outputs = [args.out]
    write_matrix(args.out, res.image)
    if args.trace:
        res.trace.to_csv(args.trace)
        outputs.append(args.trace)
    out = Path(args.out)
    for k, img in sorted(res.snapshots.items()):
        path = out.with_name(f"{out.stem}_k{k:04d}{out.suffix}")
        write_matrix(path, img)
        outputs.append(path)
    print(f"{res.iterations} iterations, converged={res.converged}")
    params = {"method": cfg.method, "iters": cfg.n_iter, "lambda": cfg.lam,
              "lambda_decay": cfg.lambda_decay, "sparsity": cfg.sparsity, "eps0": cfg.eps0,
              "tv_steps": cfg.tv_steps, "tv_beta": cfg.tv_beta, "views": geom.views,
              "bins": geom.bins, "size": list(geom.image_shape),
              "snapshot_every": args.snapshot_every, "iterations_run": res.iterations,
              "converged": res.converged}
    inputs = [args.sino] + ([args.ref] if args.ref else [])
    return params, inputs, outputs


def cmd_metrics(args):
    t, f = _load(args.ref), _load(args.test)
    if t.shape != f.shape:
        raise InputError(f"reference {t.shape} and test {f.shape} differ in shape")
    print(metrics.evaluate(t, f).as_row())
    return None


def cmd_estimate_sparsity(args):
    sino = _load(args.sino)
    geom = _geometry(args, sino_shape=sino.shape)
    if args.grid == "pow2":
        grid = None
    else:
        try:
            grid = [int(tok) for tok in args.grid.split(",")]
        except ValueError:
            raise UsageError(f"--grid expects 'pow2' or a comma list, got {args.grid!r}") from None
    try:
        S_est, curve = estimate_sparsity(geom, sino, args.probe_iters, grid, args.knee_factor)
    except EstimationFailedError as exc:
        exc.curve.to_csv(args.out_curve)
        raise
    curve.to_csv(args.out_curve)
    print(S_est)
    params = {"views": geom.views, "bins": geom.bins, "size": list(geom.image_shape),
              "probe_iters": args.probe_iters, "grid": args.grid,
              "knee_factor": args.knee_factor, "estimate": S_est}
    return params, [args.sino], [args.out_curve]


def cmd_export_pgm(args):
    if not args.lo < args.hi:
        raise UsageError(f"display window needs lo < hi, got [{args.lo}, {args.hi}]")
    export_pgm(args.image, args.lo, args.hi, args.out)
    return {"lo": args.lo, "hi": args.hi}, [args.image], [args.out]


def cmd_experiment(args):
    summary = run_experiment(args.name, args.out_dir, n_iter=args.iters,
                             methods=tuple(args.methods.split(",")))
    print("method,d,r,psnr")
    for method, rep in summary.items():
        print(f"{method},{rep.as_row()}")
    return None


def build_parser():
    parser = _Parser(prog="ihtpocs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="rasterize a test phantom")
    p.add_argument("--name", choices=sorted(PHANTOMS), required=True)
    p.add_argument("--size", type=_size, required=True, help="<I> or <I>x<J>")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    def scan_args(p, sino_input):
        p.add_argument("--views", type=int, required=True)
        p.add_argument("--bins", type=int, default=None)
        p.add_argument("--angles-file", default=None, help="angles in radians, comma/space separated")
        if sino_input:
            p.add_argument("--size", type=_size, default=None,
                           help="image grid (default: inferred from the detector width)")

    p = sub.add_parser("project", help="forward project an image")
    p.add_argument("--image", required=True)
    scan_args(p, False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a sinogram")
    p.add_argument("--sino", required=True)
    scan_args(p, True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--iters", type=int, default=800)
    p.add_argument("--sparsity", type=int, default=None)
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", type=float, default=1.0)
    lam.add_argument("--lambda-decay", type=float, default=None,
                     help="use lambda_k = decay**k")
    p.add_argument("--eps0", type=float, default=0.0)
    p.add_argument("--tv-steps", type=int, default=20)
    p.add_argument("--tv-beta", type=float, default=0.2)
    p.add_argument("--ref", default=None, help="reference image for d, r, PSNR")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None)
    p.add_argument("--snapshot-every", type=int, default=None)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("metrics", help="print d,r,psnr of a test image")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("estimate-sparsity", help="estimate gradient sparsity from data")
    p.add_argument("--sino", required=True)
    scan_args(p, True)
    p.add_argument("--probe-iters", type=int, default=DEFAULT_PROBE_ITERS)
    p.add_argument("--grid", default="pow2")
    p.add_argument("--knee-factor", type=float, default=DEFAULT_KNEE_FACTOR)
    p.add_argument("--out-curve", required=True)
    p.set_defaults(func=cmd_estimate_sparsity)

    p = sub.add_parser("export-pgm", help="window an image into a 16-bit PGM")
    p.add_argument("--image", required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_pgm)

    p = sub.add_parser("experiment", help="reproduce a full comparison run")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--iters", type=int, default=None, help="override the iteration count")
    p.add_argument("--methods", default=",".join(METHODS))
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    if args.command == "experiment":
        bad = set(args.methods.split(",")) - set(METHODS)
        if bad:
            parser.error(f"unknown methods: {', '.join(sorted(bad))}")
    t0 = time.perf_counter()
    try:
        result = args.func(args)
    except UsageError as exc:
        print(f"ihtpocs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, FormatError, OSError) as exc:
        print(f"ihtpocs: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DegenerateInputError, EstimationFailedError, np.linalg.LinAlgError) as exc:
        print(f"ihtpocs: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"ihtpocs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if result is not None:
        params, inputs, outputs = result
        manifest = Path(f"{outputs[0]}.manifest.json")
        write_manifest(manifest, args.command, params, inputs, outputs,
                       time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
