"""Command-line interface: run simulations, benchmark vmult, report memory.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 resource (memory) failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .active_set_solver import SolverFailure
from .material_model import MaterialParams
from .pff_operator import AssemblyMemoryError
from .simulation_driver import (ScenarioConfig, benchmark_vmult, memory_report,
                                run_simulation)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--level", type=int, required=True, help="mesh refinement level")
    p.add_argument("--degree", type=int, default=1, help="polynomial degree p")
    p.add_argument("--split", choices=["none", "miehe"], default="miehe")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracturekit")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a quasi-static fracture simulation")
    run.add_argument("--scenario", choices=["tension", "shear"], required=True)
    _add_common(run)
    run.add_argument("--steps", type=int, default=None,
                     help="loading steps (default: 800 tension, 1500 shear)")
    run.add_argument("--eps", type=float, default=4e-3, help="length scale in mm")
    run.add_argument("--c-as", type=float, default=100.0,
                     help="complementarity constant of the active-set test")
    run.add_argument("--lin-tol", type=float, default=1e-6)
    run.add_argument("--as-tol", type=float, default=1e-8)
    run.add_argument("--sweeps", type=int, default=5)
    run.add_argument("--coarse-level", type=int, default=2)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--vtk-every", type=int, default=10,
                     help="snapshot cadence in steps (0 disables)")

    bench = sub.add_parser("bench", help="benchmark harnesses")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True)
    vmult = bench_sub.add_parser("vmult", help="SpMV vs MFMV best-of-reps timing")
    _add_common(vmult)
    vmult.add_argument("--reps", type=int, default=100)

    report = sub.add_parser("report", help="resource reports")
    report_sub = report.add_subparsers(dest="report_command", required=True)
    memory = report_sub.add_parser("memory", help="bytes-per-dof accounting")
    _add_common(memory)

    return parser


def _config_from_args(args) -> ScenarioConfig:
    kwargs = dict(
        level=args.level, degree=args.degree, split=args.split, out_dir=args.out,
    )
    if args.command == "run":
        steps = args.steps
        if steps is None:
            steps = 800 if args.scenario == "tension" else 1500
        kwargs.update(
            scenario=args.scenario, steps=steps,
            params=MaterialParams(eps=args.eps),
            c_as=args.c_as, lin_tol=args.lin_tol, as_tol=args.as_tol,
            sweeps=args.sweeps, coarse_level=args.coarse_level,
            workers=args.workers, vtk_every=args.vtk_every,
        )
    return ScenarioConfig(**kwargs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not args.verbose:
        logging.getLogger("fracturekit").setLevel(logging.WARNING)
    try:
        config = _config_from_args(args)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "run":
            result = run_simulation(config)
            print(f"completed {len(result.records)} steps; "
                  f"records in {config.out_dir}/{config.scenario}_loads.csv")
        elif args.command == "bench":
            records = benchmark_vmult(config, reps=args.reps)
            out = Path(args.out) / f"bench_vmult_p{args.degree}_l{args.level}.csv"
            out.parent.mkdir(parents=True, exist_ok=True)
            io.write_bench_csv(records, out)
            for r in records:
                print(f"{r.kind}: best {r.best_time_s * 1e3:.3f} ms over {r.reps} reps "
                      f"({r.dofs} dofs)")
        elif args.command == "report":
            rep = memory_report(config)
            print(f"degree {rep.degree} level {rep.level} dofs {rep.dofs}")
            print(f"csr bytes/dof: {rep.csr_bytes_per_dof:.1f}")
            print(f"matrix-free bytes/dof: {rep.mf_bytes_per_dof:.1f}")
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except (AssemblyMemoryError, MemoryError) as exc:
        print(f"resource failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
