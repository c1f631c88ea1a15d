"""Command-line driver.

    fosls --problem boundary-layer --formulation 2 --epsilon 1e-3 --out run1

Exit status: 0 when the tolerance is met, 2 when the level cap is reached,
1 on any error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .adapt import MAX_ITER, TOLERANCE_MET, AdaptError, RunConfig, adaptive_solve
from .io import CSV_COLUMNS, convergence_rows, write_convergence_csv, write_level_vtk
from .problems import PROBLEMS, get_problem

DEFAULT_EPS = {"boundary-layer": 1e-3, "interior-layer": 1e-3, "manufactured": 1.0}
FLAG_KEYS = ["problem", "formulation", "epsilon", "theta", "tol", "max-iter", "rt-index",
             "degree", "out", "vtk", "true-error", "no-timings"]
BOOL_KEYS = {"vtk", "true-error", "no-timings"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fosls", description="Adaptive least-squares FEM for "
                "convection-dominated diffusion-reaction problems on the unit square.")
    p.add_argument("--config", type=Path, help="key=value file with any of the flags below")
    p.add_argument("--problem", choices=sorted(PROBLEMS), default="boundary-layer")
    p.add_argument("--formulation", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--epsilon", type=float, default=None,
                   help="diffusion coefficient (default depends on the problem)")
    p.add_argument("--theta", type=float, default=0.6, help="maximum-marking parameter in (0, 1]")
    p.add_argument("--tol", type=float, default=0.5, help="stop once the estimator is <= tol")
    p.add_argument("--max-iter", type=int, default=60, help="last adaptive level")
    p.add_argument("--rt-index", type=int, choices=[0, 1], default=0)
    p.add_argument("--degree", type=int, choices=[1, 2], default=1)
    p.add_argument("--out", type=Path, default=Path("fosls-out"))
    p.add_argument("--vtk", action="store_true", help="write level_<l>.vtk for every level")
    p.add_argument("--true-error", action="store_true",
                   help="compute error norms and effectivity (needs an exact solution)")
    p.add_argument("--no-timings", action="store_true",
                   help="leave timing columns empty (byte-reproducible CSV)")
    return p


def read_config(path: Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in FLAG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    pre, _ = parser.parse_known_args(argv)
    if pre.config is not None:
        try:
            cfg = read_config(pre.config)
        except OSError as exc:
            raise UsageError(f"cannot read config {pre.config}: {exc}") from exc
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if key in BOOL_KEYS:
                if value.lower() not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                    raise UsageError(f"config key {key!r} needs a boolean, got {value!r}")
                defaults[dest] = value.lower() in ("1", "true", "yes", "on")
            else:
                defaults[dest] = value   # argparse converts string defaults
        parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def format_table(record, timings: bool = True) -> str:
    rows = [CSV_COLUMNS] + list(convergence_rows(record, timings))
    rows = [[c if len(c) < 14 else f"{float(c):.6e}" for c in r] for r in rows]
    widths = [max(len(r[i]) for r in rows) for i in range(len(CSV_COLUMNS))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)


def run(args) -> int:
    eps = args.epsilon if args.epsilon is not None else DEFAULT_EPS[args.problem]
    config = RunConfig(formulation=args.formulation, theta=args.theta, tol=args.tol,
                       max_iter=args.max_iter, rt_index=args.rt_index, degree=args.degree,
                       compute_true_error=args.true_error)
    problem = get_problem(args.problem, eps)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    def export(entry, mesh, solution, indicators, cls):
        if args.vtk:
            written.append(write_level_vtk(out / f"level_{entry.level}.vtk",
                                           mesh, solution, indicators, cls))

    record = adaptive_solve(problem, config, callback=export)
    written.append(write_convergence_csv(record, out / "convergence.csv",
                                         timings=not args.no_timings))
    print(format_table(record, not args.no_timings))
    print(f"termination: {record.reason} after level {record.final.level}")
    print("files written:")
    for path in written:
        print(f"  {path}")
    if record.reason == TOLERANCE_MET:
        return 0
    if record.reason == MAX_ITER:
        return 2
    return 1


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        return run(args)
    except UsageError as exc:
        print(f"fosls: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, AdaptError) as exc:
        print(f"fosls: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
