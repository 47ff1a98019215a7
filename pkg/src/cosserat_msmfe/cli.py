"""Command line entry point: ``run``, ``verify`` and ``mesh-info``.

The report directory defaults to ``$COSSERAT_MSMFE_OUTPUT`` (or ``results``)
and can be overridden with ``--output-dir`` or the ``output_dir`` config key.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .assembly import SCHEMES, DiscreteSpaces, get_scheme
from .mesh import barycentric_subdivide, build_structured_cube, build_structured_square, import_simplicial
from .study import FORMULATIONS, OUTPUT_ENV, load_config, run_study


def _levels(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def _overrides(args) -> dict:
    out = {}
    for key in ("scheme", "dim", "ell", "levels", "formulation", "output_dir", "name", "tol", "full_tol"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if args.mesh_files:
        out["mesh_files"] = args.mesh_files
    if args.format:
        out["formats"] = args.format
    return out


def cmd_run(args) -> int:
    try:
        config = load_config(args.config, _overrides(args))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        reports, written = run_study(config)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return 1
    status = 0
    for rep in reports.values():
        for row in rep.rows:
            print(f"{rep.scheme} {rep.formulation} n={row.level} h={row.h:.3e} "
                  + " ".join(f"{k}={row.errors[k]:.3e}" for k in ("sigma", "omega", "u", "r"))
                  + f" iters={row.iters}")
        if rep.failed:
            print(f"{rep.scheme} {rep.formulation}: {rep.message}", file=sys.stderr)
            status = 1
    for path in written:
        print(f"wrote {path}")
    return status


def cmd_verify(args) -> int:
    from .acceptance import run_criteria

    results = run_criteria(args.criteria or None)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} criteria passed")
    return 0 if n_ok == len(results) else 1


def cmd_mesh_info(args) -> int:
    try:
        if args.file:
            mesh = import_simplicial(args.file, dim=args.dim)
        elif args.dim == 3:
            mesh = build_structured_cube(args.n)
        else:
            mesh = build_structured_square(args.n)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.barycentric and not mesh.barycentric:
        mesh = barycentric_subdivide(mesh)
    for key, val in mesh.summary().items():
        print(f"{key}: {val}")
    for name in args.scheme or sorted(SCHEMES):
        if get_scheme(name).barycentric and not mesh.barycentric:
            print(f"{name}: requires --barycentric")
            continue
        sp = DiscreteSpaces(mesh, name)
        print(f"{name}: dof_full={sp.dof_full} dof_schur={sp.dof_schur} "
              f"ratio={sp.dof_schur / sp.dof_full:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cosserat-msmfe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-level progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a convergence study",
                         epilog=f"reports go to --output-dir, else ${OUTPUT_ENV}, else ./results")
    run.add_argument("config", nargs="?", help="flat key = value config file")
    run.add_argument("--scheme", choices=sorted(SCHEMES))
    run.add_argument("--dim", type=int, choices=(2, 3))
    run.add_argument("--ell", choices=("one", "varpi", "zero"))
    run.add_argument("--levels", type=_levels, help="comma separated mesh parameters, e.g. 6,12,24")
    run.add_argument("--formulation", choices=FORMULATIONS + ("both",))
    run.add_argument("--tol", type=float)
    run.add_argument("--full-tol", type=float, dest="full_tol")
    run.add_argument("--mesh-files", nargs="+", dest="mesh_files", help="one msh file per level")
    run.add_argument("--output-dir", dest="output_dir")
    run.add_argument("--name", help="report file stem")
    run.add_argument("--format", action="append", choices=("csv", "markdown"))
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("criteria", nargs="*", type=int, help="subset of criterion numbers")
    ver.set_defaults(func=cmd_verify)

    info = sub.add_parser("mesh-info", help="describe a mesh and the DOF counts per scheme")
    info.add_argument("--n", type=int, default=3, help="grid parameter, a multiple of 3")
    info.add_argument("--dim", type=int, choices=(2, 3), default=2)
    info.add_argument("--file", help="ASCII msh 2.x file")
    info.add_argument("--barycentric", action="store_true")
    info.add_argument("--scheme", action="append", choices=sorted(SCHEMES))
    info.set_defaults(func=cmd_mesh_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
