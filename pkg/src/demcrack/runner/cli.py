"""Command line interface.

Exit codes: 0 on success, 2 on a configuration or validation error, 3 on
a runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..mesh import MeshError
from ..system import LoadError
from .config import dump_config
from .run import resolve_scenario, run_convergence, run_scenario
from .scenario import CONVERGENCE, ScenarioError, build_problem, builtin_names

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="demcrack", description="Quasi-static brittle fracture runs.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a builtin scenario or a configuration file")
    r.add_argument("scenario", help="builtin name or path to an INI file")
    r.add_argument("--h", type=float, help="mesh size override")
    r.add_argument("--du", type=float, help="load increment override")
    r.add_argument("--u-final", type=float, help="final load override")
    r.add_argument("--seed", type=int, help="tie-breaking seed override")
    r.add_argument("--out", help="output directory")

    c = sub.add_parser("convergence", help="run a mesh convergence study")
    c.add_argument("scenario", help="builtin name or path to an INI file")
    c.add_argument("--levels", type=int, help="number of levels (default: all)")
    c.add_argument("--h", type=float, help="coarsest mesh size override")
    c.add_argument("--out", help="output directory")

    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("config", help="builtin name or path to an INI file")
    v.add_argument("--mesh", action="store_true", help="also build the mesh and check tags")

    sub.add_parser("list", help="list the builtin scenarios")

    s = sub.add_parser("show", help="print the configuration of a scenario")
    s.add_argument("scenario")
    return p


def _validate(args) -> int:
    sc = resolve_scenario(args.config)
    if args.mesh and sc.kind != CONVERGENCE:
        problem = build_problem(sc)
        problem.loads.validate(problem.mesh)
    print(f"{sc.name}: ok")
    return EXIT_OK


def _run(args) -> int:
    res = run_scenario(args.scenario, h=args.h, du=args.du, seed=args.seed, out=args.out,
                       u_final=args.u_final)
    _summary(res)
    return EXIT_OK if res.ok else EXIT_RUNTIME


def _convergence(args) -> int:
    res = run_convergence(args.scenario, n_levels=args.levels, h=args.h, out=args.out)
    print(f"{'n_dofs':>8} {'l2':>11} {'rate':>6} {'energy':>11} {'rate':>6}")
    for r in res.reports:
        print(f"{r.n_dofs:8d} {r.l2_error:11.3e} {r.l2_rate:6.2f} {r.energy_error:11.3e} "
              f"{r.energy_rate:6.2f}")
    _summary(res)
    return EXIT_OK


def _summary(res) -> None:
    m = res.manifest
    print(f"{m['scenario']}: {m['status']} in {m['wall_time_s']} s, outputs in {res.out_dir}")
    if m.get("crack_start"):
        print(f"crack starts at u_D = {m['crack_start']['u_D']:.6g}")
    if m.get("error"):
        print(f"error: {m['error']}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            for name in builtin_names():
                print(name)
            return EXIT_OK
        if args.command == "show":
            print(dump_config(resolve_scenario(args.scenario)), end="")
            return EXIT_OK
        if args.command == "validate":
            return _validate(args)
        if args.command == "run":
            return _run(args)
        return _convergence(args)
    except (ScenarioError, LoadError, MeshError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # runtime failures of any kind
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
