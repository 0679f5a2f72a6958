"""Command-line benchmark harness.

Subcommands:

* ``bench table1``       three fixed kernels + combination on the cancer data
* ``bench paramselect``  gaussian width menu + combination of the menu
* ``bench oneclass``     one-class scoring; flagged outlier indices as CSV
* ``bench backends``     timing comparison of the compiled and python solver cores

Exit code 0 on success; on failure a machine-readable JSON error object is
printed to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .bench import (
    DEFAULT_WIDTHS,
    ExperimentConfig,
    emit_report,
    load_dataset,
    run_oneclass_flags,
    run_param_select,
    run_table1,
)
from .combine import CombinerConfig
from .kernels import KernelSpec
from .qp import BoxQP, SolverConfig, solve_smo, solver_backends

SCALING_OPTIONS = {"unit": "unit_interval", "zscore": "zscore", "none": "none"}
PSD_OPTIONS = {"shift": "diagonal_shift", "clip": "spectral_clip", "none": "none"}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--data", default="cancer", help="dataset path, or 'cancer' for the bundled benchmark")
    sub.add_argument("--seed", type=int, default=42, help="master seed (64-bit)")
    sub.add_argument("--splits", type=int, default=10, help="number of random partitions")
    sub.add_argument("--ratio", type=float, default=0.7, help="train fraction per partition")
    sub.add_argument("--C", type=float, default=1.0, help="default soft-margin constant")
    sub.add_argument("--scaling", choices=sorted(SCALING_OPTIONS), default="unit")
    sub.add_argument("--psd", choices=sorted(PSD_OPTIONS), default="shift",
                     help="repair mode for combined kernel matrices")
    sub.add_argument("--combine", default="av", help="combination rule: av | half_abs | threshold:<t>")
    sub.add_argument("--test-eval", choices=("avg", "pred"), default="avg",
                     help="combined-kernel policy at unlabeled test points")
    sub.add_argument("--kkt-tol", type=float, default=1e-3)
    sub.add_argument("--max-iter", type=int, default=10_000_000)
    sub.add_argument("--backend", choices=("auto", "compiled", "python"), default="auto")
    sub.add_argument("--out", default="reports", help="output directory")
    sub.add_argument("--formats", default="json,csv,md")


def _config(args, c_sweep) -> ExperimentConfig:
    return ExperimentConfig(
        dataset=args.data,
        combine=CombinerConfig.from_options(args.combine, args.test_eval),
        c_default=args.C,
        c_sweep=c_sweep,
        master_seed=args.seed,
        repetitions=args.splits,
        train_fraction=args.ratio,
        scaling=SCALING_OPTIONS[args.scaling],
        psd_mode=PSD_OPTIONS[args.psd],
        solver=SolverConfig(kkt_tol=args.kkt_tol, max_iterations=args.max_iter),
        backend=args.backend,
    )


def _emit(report, args) -> int:
    formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    paths = emit_report(report, args.out, formats)
    for fmt in formats:
        print(f"wrote {paths[fmt]}")
    if report.wall_clock_seconds is not None:
        print(f"wall clock: {report.wall_clock_seconds:.2f}s", file=sys.stderr)
    return 0


def _cmd_table1(args) -> int:
    cfg = _config(args, _floats(args.c_sweep))
    return _emit(run_table1(cfg), args)


def _cmd_paramselect(args) -> int:
    cfg = _config(args, _floats(args.c_sweep))
    return _emit(run_param_select(cfg, widths=_floats(args.widths)), args)


def _cmd_oneclass(args) -> int:
    ds = load_dataset(args.data)
    kernel = KernelSpec.from_string(args.kernel)
    solver = SolverConfig(kkt_tol=args.kkt_tol, max_iterations=args.max_iter)
    flagged, scores = run_oneclass_flags(
        ds, kernel, args.nu, solver,
        scaling=SCALING_OPTIONS[args.scaling], backend=args.backend,
    )
    lines = ["index,score"]
    lines += [f"{int(i)},{scores[i]!r}" for i in flagged]
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        from pathlib import Path

        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        print(f"wrote {out} ({flagged.size} flagged of {ds.n})")
    return 0


def _cmd_backends(args) -> int:
    """Time the available SMO cores on one synthetic two-class dual."""
    rng = np.random.Generator(np.random.Philox(args.seed))
    n = args.n
    X = rng.normal(size=(n, 10))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    if np.all(y == y[0]):
        y[0] = -y[0]
    X += 0.5 * y[:, None]
    G = np.exp(-((X[:, None, :] - X[None, :, :]) ** 2).sum(-1) / 10.0)
    problem = BoxQP(
        Q=G * np.outer(y, y), linear=-np.ones(n),
        lower=np.zeros(n), upper=np.full(n, args.C),
        equality=(y, 0.0),
    )
    cfg = SolverConfig(kkt_tol=args.kkt_tol)
    print(f"n={n}, C={args.C}, kkt_tol={cfg.kkt_tol}")
    reference = None
    for backend in solver_backends():
        best = np.inf
        for _ in range(args.reps):
            start = time.perf_counter()
            alpha, iterations, converged = solve_smo(problem, np.zeros(n), cfg, backend=backend)
            best = min(best, time.perf_counter() - start)
        if reference is None:
            reference = alpha
            agree = "reference"
        else:
            agree = "bit-identical" if np.array_equal(reference, alpha) else "DIFFERS"
        rate = iterations / best if best > 0 else float("inf")
        print(
            f"{backend:>9}: {best * 1e3:8.2f} ms  {iterations} iterations "
            f"({rate / 1e3:.0f}k it/s, converged={converged}, {agree})"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    commands = parser.add_subparsers(dest="command", required=True)

    t1 = commands.add_parser("table1", help="fixed three-kernel comparison plus combination")
    _add_common(t1)
    t1.add_argument("--c-sweep", default="0.1,1,10,100", help="comma-separated C sweep")
    t1.set_defaults(func=_cmd_table1)

    ps = commands.add_parser("paramselect", help="gaussian width menu plus combination")
    _add_common(ps)
    ps.add_argument("--c-sweep", default="", help="comma-separated C sweep (default: just --C)")
    ps.add_argument("--widths", default=",".join(str(w) for w in DEFAULT_WIDTHS),
                    help="comma-separated gaussian widths")
    ps.set_defaults(func=_cmd_paramselect)

    oc = commands.add_parser("oneclass", help="one-class outlier flagging")
    oc.add_argument("--data", default="cancer")
    oc.add_argument("--nu", type=float, required=True, help="target outlier fraction in (0, 1]")
    oc.add_argument("--kernel", default="gauss:c=1", help="kernel spec string")
    oc.add_argument("--scaling", choices=sorted(SCALING_OPTIONS), default="unit")
    oc.add_argument("--kkt-tol", type=float, default=1e-3)
    oc.add_argument("--max-iter", type=int, default=10_000_000)
    oc.add_argument("--backend", choices=("auto", "compiled", "python"), default="auto")
    oc.add_argument("--out", default="-", help="output CSV path, or - for stdout")
    oc.set_defaults(func=_cmd_oneclass)

    be = commands.add_parser("backends", help="compare compiled vs python solver cores")
    be.add_argument("--n", type=int, default=400)
    be.add_argument("--C", type=float, default=1.0)
    be.add_argument("--reps", type=int, default=3)
    be.add_argument("--seed", type=int, default=42)
    be.add_argument("--kkt-tol", type=float, default=1e-3)
    be.set_defaults(func=_cmd_backends)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        error = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
