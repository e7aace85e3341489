"""Command line interface: ``bench run`` and ``bench sweep``.

Exit codes: 0 converged, 2 maxit, 3 breakdown, 4 indefinite, 1 usage or
I/O error.
"""

import argparse
import logging
import sys

import numpy as np

from .bench import EXIT_CODES, ProblemSpec, RunConfig, run_benchmark, run_sweep
from .errors import ParseError, UnsupportedFormatError

__all__ = ["main", "build_parser"]

log = logging.getLogger("saddlecg")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _precond(text):
    if text in ("none", "exact"):
        return text, None
    if text.startswith("iqr:"):
        try:
            tol = float(text[4:])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad droptol in {text!r}") from None
        if not tol > 0:
            raise argparse.ArgumentTypeError("droptol must be positive")
        return "iqr", tol
    if text == "iqr":
        return "iqr", 0.01
    raise argparse.ArgumentTypeError("expected none, exact or iqr:DROPTOL")


def build_parser():
    p = _Parser(prog="bench", description="Saddle point CG and Krylov baselines on test problems.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one solver on one problem")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--example", type=int, choices=range(1, 7), metavar="{1..6}")
    src.add_argument("--matrix", metavar="PATH", help="Matrix Market file")
    run.add_argument("--example2-path", metavar="PATH", help="ORSIRR_1 file used by --example 2")
    run.add_argument("--n", type=int, help="problem size (generated examples)")
    run.add_argument("--solver", choices=("nspcg", "glsqr", "qmr", "lsqr"), default="nspcg")
    run.add_argument("--precond", type=_precond, default=("none", None), metavar="none|iqr:DROPTOL|exact")
    run.add_argument("--w-mode", choices=("strict", "weak"), default="strict")
    run.add_argument("--safety", type=float, default=1.1)
    run.add_argument("--tol", type=float, default=1e-8)
    run.add_argument("--maxit", type=int, default=500)
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--rhs", choices=("ones", "random"), default="ones")
    run.add_argument("--out-csv", metavar="PATH")
    run.add_argument("--out-json", metavar="PATH")
    run.add_argument("--timing", action="store_true", help="record wall_ms in the JSON summary")

    sw = sub.add_parser("sweep", help="run the full benchmark grid into a directory")
    sw.add_argument("--out-dir", required=True)
    sw.add_argument("--seed", type=int, default=1)
    sw.add_argument("--matrix", metavar="PATH", help="ORSIRR_1 file; enables Example 2")
    sw.add_argument("--include-example6", action="store_true")
    sw.add_argument("--w-mode", choices=("strict", "weak"), default="strict")
    sw.add_argument("--tol", type=float, default=1e-8)
    sw.add_argument("--maxit", type=int, default=500)
    sw.add_argument("--droptol", type=float, default=0.01)
    return p


def _run_config(args):
    if args.matrix is not None:
        problem = ProblemSpec("file", args.n, args.seed, {"path": args.matrix})
    elif args.example == 2:
        if not args.example2_path:
            raise _UsageError("--example 2 needs --example2-path (ORSIRR_1 from Matrix Market)")
        problem = ProblemSpec("example2", None, args.seed, {"path": args.example2_path})
    else:
        problem = ProblemSpec(f"example{args.example}", args.n, args.seed)
    kind, droptol = args.precond
    return RunConfig(
        problem=problem,
        solver=args.solver,
        precond=kind,
        droptol=droptol if droptol is not None else 0.01,
        w_mode=args.w_mode,
        tol=args.tol,
        maxit=args.maxit,
        rhs=args.rhs,
        safety=args.safety,
    )


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = _run_config(args)
            res = run_benchmark(cfg, out_csv=args.out_csv, out_json=args.out_json, timing=args.timing)
            s = res.summary
            print(f"{cfg.label}: {s['status']} after {s['iterations']} iterations, "
                  f"relative residual {s['final_relative_residual']:.3e}, amplitude {s['amplitude']:.12g}")
            return res.exit_code
        results = run_sweep(args.out_dir, seed=args.seed, include_example6=args.include_example6,
                            matrix_path=args.matrix, w_mode=args.w_mode, tol=args.tol,
                            maxit=args.maxit, droptol=args.droptol)
        for r in results:
            print(f"{r.config.label}: {r.status} ({r.summary['iterations']} iterations)")
        return 0
    except (_UsageError, ValueError, OSError, ParseError, UnsupportedFormatError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
