"""Bundled MILP solver subprocess: reads MPS, solves with HiGHS, writes a
solution file.

Usage: python -m nbsopt.solver_cli MODEL.mps SOLUTION.sol TIMELIMIT [--gap G]

The solution file starts with '# key value' metadata lines (solver, status,
objective, bound, walltime) followed by one 'name value' line per column.
Statuses: optimal, feasible-timeout, no-incumbent, infeasible, unbounded,
error. This is the reference implementation of the solver-side contract; any
external solver wrapped to the same file formats can replace it.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from .mps import MpsData, read_mps


def solve_mps(data: MpsData, time_limit: float, gap: float = 0.0):
    """Run HiGHS on parsed MPS arrays; returns the scipy result object."""
    n = data.n_columns
    c = data.objective_vector()
    con_lb, con_ub = data.constraint_bounds()
    a = sparse.csr_matrix(
        (data.entry_vals, (data.entry_rows, data.entry_cols)),
        shape=(data.n_rows, n),
    )
    return milp(
        c,
        constraints=LinearConstraint(a, con_lb, con_ub),
        integrality=data.is_integer.astype(int),
        bounds=Bounds(data.lower, data.upper),
        options={"time_limit": float(time_limit), "mip_rel_gap": float(gap)},
    )


def _status_name(res) -> str:
    if res.status == 0:
        return "optimal"
    if res.status == 1:
        return "feasible-timeout" if res.x is not None else "no-incumbent"
    if res.status == 2:
        return "infeasible"
    if res.status == 3:
        return "unbounded"
    return "error"


def write_solution(path: Path, data: MpsData, res, wall_time: float) -> None:
    lines = ["# solver nbsopt-highs-cli", f"# status {_status_name(res)}"]
    constant = data.objective_constant
    if res.x is not None and res.fun is not None:
        lines.append(f"# objective {float(res.fun) + constant!r}")
    bound = getattr(res, "mip_dual_bound", None)
    if bound is not None:
        lines.append(f"# bound {float(bound) + constant!r}")
    lines.append(f"# walltime {float(wall_time)!r}")
    if res.message:
        lines.append(f"# message {res.message}")
    if res.x is not None:
        for name, value in zip(data.column_names, res.x):
            lines.append(f"{name} {float(value)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nbsopt.solver_cli", description="Solve a free-format MPS file with HiGHS."
    )
    parser.add_argument("model", type=Path)
    parser.add_argument("solution", type=Path)
    parser.add_argument("timelimit", type=float)
    parser.add_argument("--gap", type=float, default=0.0, help="relative MIP gap")
    args = parser.parse_args(argv)

    t0 = time.perf_counter()
    data = read_mps(args.model)
    res = solve_mps(data, args.timelimit, args.gap)
    write_solution(args.solution, data, res, time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
