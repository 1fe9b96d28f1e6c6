"""Command-line interface: run experiments, check meshes, verify lemmas."""

from __future__ import annotations

import argparse
import sys

from .experiments import DRIVERS, ExperimentConfig, run_experiment
from .lemmas import format_table, verify_lemmas
from .mesh import Mesh
from .problems import PROBLEM_NAMES


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiniplate",
        description="Adini plate solver and convergence experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a convergence experiment")
    run.add_argument("--config", help="JSON file with ExperimentConfig "
                     "fields; command-line flags override it")
    run.add_argument("--problem", choices=PROBLEM_NAMES)
    run.add_argument("--variant", choices=["averaging", "hard"])
    run.add_argument("--driver", choices=list(DRIVERS))
    run.add_argument("--theta", type=float)
    run.add_argument("--max-ndof", type=int, dest="max_ndof")
    run.add_argument("--max-levels", type=int, dest="max_levels")
    run.add_argument("--out", help="output directory for CSV/JSON/figures")

    chk = sub.add_parser("check-mesh", help="validate a mesh JSON file")
    chk.add_argument("--in", dest="infile", required=True)

    sub.add_parser("verify-lemmas", help="run the property suites")
    return parser


def _cmd_run(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ["problem", "variant", "driver", "theta", "max_ndof",
                  "max_levels", "out"]}
    if args.config:
        config = ExperimentConfig.from_json(args.config, **overrides)
    else:
        if args.problem is None:
            print("error: --problem is required without --config",
                  file=sys.stderr)
            return 2
        config = ExperimentConfig(
            **{k: v for k, v in overrides.items() if v is not None})
    result = run_experiment(config)
    for r in result.rows:
        print(f"level {r.level:3d}  ndof {r.ndof:8d}  "
              f"error {r.error:.8e}  eta {r.eta:.8e}  "
              f"h_max {r.h_max:.4e}  {r.seconds:.2f}s")
    print(f"fitted tail slope: {result.slope:.4f} "
          f"(stderr {result.slope_stderr:.4f})")
    if config.out:
        print(f"reports written to {config.out}")
    return 0


def _cmd_check_mesh(args) -> int:
    with open(args.infile) as fh:
        text = fh.read()
    mesh = Mesh.from_json(text)
    if mesh.to_json() != text:
        print("warning: file is not in canonical form "
              "(round-trip differs textually)")
    violations = mesh.check_mesh_condition()
    print(f"elements: {len(mesh.rects)}  vertices: {mesh.num_vertices}  "
          f"hanging: {len(mesh.topo.hanging)}")
    if violations:
        for v in violations:
            print(f"VIOLATION [{v.kind}] host rect {v.host_rect}: "
                  f"{v.detail}")
        return 1
    print("mesh condition: OK")
    return 0


def _cmd_verify_lemmas() -> int:
    checks = verify_lemmas()
    print(format_table(checks))
    return 0 if all(c.passed for c in checks) else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "check-mesh":
        return _cmd_check_mesh(args)
    return _cmd_verify_lemmas()


if __name__ == "__main__":
    sys.exit(main())
