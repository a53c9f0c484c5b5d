"""Solving: exhaustive enumeration oracle and external-solver bridge.

The oracle enumerates every feasible placement of the free decision units
(clusters, plus per-cell type choices) and evaluates each with the direct
objective evaluation; it never touches the big-M linearization, which makes
it an independent check of the MILP. It is exact but exponential, so it is
capped by a decision-unit budget.

The external backend writes the model to a free-format MPS file, invokes a
solver subprocess through a configurable command template with {model},
{solution} and {timelimit} placeholders, parses the whitespace-separated
"name value" solution file it leaves behind, and re-verifies feasibility and
the objective before trusting the answer. The default template runs the
bundled HiGHS-backed CLI (python -m nbsopt.solver_cli); any solver that can
read MPS and write the documented solution format can be swapped in.
"""

from __future__ import annotations

import logging
import os
import shlex
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engine
from .instance import Cell, Instance
from .model import (
    InfeasiblePlacement,
    MilpModel,
    ObjectiveBreakdown,
    build_model,
    check_placement,
    evaluate_solution,
    objective_normalizers,
)
from .mps import export_interchange

logger = logging.getLogger(__name__)

DEFAULT_TIME_LIMIT = 1800.0
DEFAULT_UNIT_CAP = 16
SOLVER_CMD_ENV = "NBSOPT_SOLVER_CMD"
OBJECTIVE_MATCH_TOL = 1e-6
SUBPROCESS_GRACE = 60.0

STATUS_OPTIMAL = "optimal"
STATUS_TIMEOUT = "feasible-timeout"
STATUS_INFEASIBLE = "infeasible"
STATUS_ERROR = "error"


class OracleCapExceeded(ValueError):
    """Instance has more free decision units than the oracle is allowed."""


def default_solver_cmd() -> str:
    return (
        f"{shlex.quote(sys.executable)} -m nbsopt.solver_cli"
        " {model} {solution} {timelimit}"
    )


@dataclass
class SolveConfig:
    backend: str = "oracle"
    time_limit: float = DEFAULT_TIME_LIMIT
    gap: float = 0.0
    solver_cmd: str | None = None
    unit_cap: int = DEFAULT_UNIT_CAP
    workdir: Path | None = None

    def resolved_solver_cmd(self) -> str:
        if self.solver_cmd:
            return self.solver_cmd
        env = os.environ.get(SOLVER_CMD_ENV)
        return env if env else default_solver_cmd()


@dataclass
class SolveResult:
    status: str
    backend: str
    placement: engine.Placement | None = None
    objective: float | None = None
    bound: float | None = None
    wall_time: float = 0.0
    breakdown: ObjectiveBreakdown | None = None
    variables: dict[str, float] | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (STATUS_OPTIMAL, STATUS_TIMEOUT)


def values_close(a: float, b: float, rel: float = OBJECTIVE_MATCH_TOL) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


# --- Exhaustive oracle -------------------------------------------------------


@dataclass
class _Unit:
    """One selectable decision: a whole cluster or one (cell, type) option."""

    kind: str  # "cluster" | "cell"
    nbs_id: str
    cells: list[Cell]
    cost: float
    dz: dict[str, np.ndarray]  # per measure, flattened impact increment
    df_sum: float  # total fairness increment
    cover: np.ndarray  # flat cell indices newly occupied


@dataclass
class _Slot:
    """A point of choice in the enumeration: binary cluster or cell options."""

    options: list[_Unit]  # state k > 0 picks options[k - 1]; state 0 picks none
    label: tuple


def _unit_for_cells(inst: Instance, nbs_id: str, cells: list[Cell], kind: str) -> _Unit:
    shape = inst.dims.shape
    h = inst.dims.height
    cost = inst.nbs_by_id(nbs_id).cost * len(cells)
    dz: dict[str, np.ndarray] = {}
    for u in inst.measure_ids:
        acc = np.zeros(shape)
        kernel = inst.kernel(u, nbs_id)
        for i, j in cells:
            engine.stamp_kernel(acc, kernel, i, j)
        dz[u] = acc.ravel()
    acc = np.zeros(shape)
    kernel = inst.fairness_kernels[nbs_id]
    for i, j in cells:
        engine.stamp_kernel(acc, kernel, i, j)
    df_sum = float((inst.population * acc).sum())
    cover = np.array(sorted(i * h + j for i, j in cells), dtype=np.int64)
    return _Unit(
        kind=kind, nbs_id=nbs_id, cells=cells, cost=cost, dz=dz, df_sum=df_sum, cover=cover
    )


def _build_slots(inst: Instance) -> tuple[list[_Slot], int]:
    """Canonical decision slots and the total decision-unit count."""
    slots: list[_Slot] = []
    n_units = 0
    clustered_cells: dict[str, set[Cell]] = {t: set() for t in inst.nbs_ids}
    for t in inst.nbs_ids:
        for q, group in enumerate(inst.clusters_for(t)):
            clustered_cells[t].update(group)
            slots.append(
                _Slot(
                    options=[_unit_for_cells(inst, t, list(group), "cluster")],
                    label=("cluster", t, q),
                )
            )
            n_units += 1

    eligible = {t: inst.eligible_mask(t) for t in inst.nbs_ids}
    w, h = inst.dims.shape
    for i in range(w):
        for j in range(h):
            options = [
                _unit_for_cells(inst, t, [(i, j)], "cell")
                for t in inst.nbs_ids
                if eligible[t][i, j] and (i, j) not in clustered_cells[t]
            ]
            if options:
                slots.append(_Slot(options=options, label=("cell", i, j)))
                n_units += len(options)
    return slots, n_units


def count_decision_units(inst: Instance) -> int:
    """Free binary choices: one per cluster plus one per eligible (cell, type)."""
    n = sum(len(inst.clusters_for(t)) for t in inst.nbs_ids)
    clustered: dict[str, set[Cell]] = {
        t: {c for group in inst.clusters_for(t) for c in group} for t in inst.nbs_ids
    }
    for t in inst.nbs_ids:
        mask = inst.eligible_mask(t).copy()
        for i, j in clustered[t]:
            mask[i, j] = False
        n += int(mask.sum())
    return n


def solve_oracle(inst: Instance, unit_cap: int = DEFAULT_UNIT_CAP) -> SolveResult:
    """Enumerate all feasible placements and return a true optimum.

    Ties on the objective are broken by the lexicographically smallest state
    vector over the canonical slot order (clusters first, then cells in
    row-major order, types in catalog order).
    """
    t0 = time.perf_counter()
    slots, n_units = _build_slots(inst)
    if n_units > unit_cap:
        raise OracleCapExceeded(
            f"instance has {n_units} decision units, oracle cap is {unit_cap}"
        )

    norms = objective_normalizers(inst)
    base = engine.Placement.do_nothing(inst)
    fields = {u.id: u.field.ravel() for u in inst.measures}
    deltas = {u: inst.delta(u) for u in inst.measure_ids}
    weights = inst.weights
    n_cells = inst.dims.n_cells

    z_acc = {u: np.zeros(n_cells) for u in inst.measure_ids}
    f_total = float(engine.fairness(inst, base).sum())
    occupancy = np.zeros(n_cells, dtype=np.int8)

    best_obj = np.inf
    best_states: list[int] | None = None
    state = [0] * len(slots)

    fair_coeff = weights.fairness * norms.fairness_scale
    cost_coeff = weights.cost * norms.cost_scale

    def leaf_objective(cost: float, f_sum: float) -> float | None:
        total = cost_coeff * cost - fair_coeff * (f_sum - norms.fairness_min)
        for u in inst.measure_ids:
            reduced = fields[u] - np.minimum(z_acc[u], deltas[u])
            avg = float(reduced.mean())
            if avg < -1e-12:
                return None  # zavg is a nonnegative variable in the MILP
            peak = max(0.0, float(reduced.max()))
            scale = norms.peak_scale[u]
            total += weights.peak[u] * scale * peak + weights.avg[u] * scale * avg
        return total

    def descend(k: int, cost: float, f_sum: float) -> None:
        nonlocal best_obj, best_states
        if k == len(slots):
            obj = leaf_objective(cost, f_sum)
            if obj is not None and obj < best_obj:
                best_obj = obj
                best_states = state.copy()
            return
        slot = slots[k]
        # state 0: leave the slot unused
        state[k] = 0
        descend(k + 1, cost, f_sum)
        for s, unit in enumerate(slot.options, start=1):
            if cost + unit.cost > inst.budget * (1 + 1e-9) + 1e-9:
                continue
            if occupancy[unit.cover].any():
                continue
            state[k] = s
            occupancy[unit.cover] += 1
            for u in inst.measure_ids:
                z_acc[u] += unit.dz[u]
            descend(k + 1, cost + unit.cost, f_sum + unit.df_sum)
            for u in inst.measure_ids:
                z_acc[u] -= unit.dz[u]
            occupancy[unit.cover] -= 1
        state[k] = 0

    descend(0, 0.0, f_total)

    if best_states is None:
        # The do-nothing leaf always exists, so this cannot happen unless the
        # instance itself is infeasible via the zavg domain.
        return SolveResult(
            status=STATUS_INFEASIBLE,
            backend="oracle",
            wall_time=time.perf_counter() - t0,
            message="no placement satisfies the nonnegative-average domain",
        )

    placement = base.copy()
    for k, s in enumerate(best_states):
        if s > 0:
            unit = slots[k].options[s - 1]
            mask = placement.masks[unit.nbs_id]
            for i, j in unit.cells:
                mask[i, j] = True

    breakdown = evaluate_solution(inst, placement, norms=norms)
    if not values_close(breakdown.total, best_obj, rel=1e-9):
        raise RuntimeError(
            f"oracle bookkeeping mismatch: {breakdown.total!r} vs {best_obj!r}"
        )
    return SolveResult(
        status=STATUS_OPTIMAL,
        backend="oracle",
        placement=placement,
        objective=breakdown.total,
        bound=breakdown.total,
        wall_time=time.perf_counter() - t0,
        breakdown=breakdown,
    )


# --- External solver bridge --------------------------------------------------


def parse_solution_file(path: Path) -> tuple[dict[str, str], dict[str, float]]:
    """Parse '# key value' metadata lines and 'name value' variable lines."""
    meta: dict[str, str] = {}
    values: dict[str, float] = {}
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            tokens = line[1:].split(None, 1)
            if len(tokens) == 2:
                meta[tokens[0]] = tokens[1].strip()
            continue
        tokens = line.split()
        if len(tokens) != 2:
            logger.warning("skipping malformed solution line: %s", raw)
            continue
        try:
            values[tokens[0]] = float(tokens[1])
        except ValueError:
            logger.warning("skipping non-numeric solution line: %s", raw)
    return meta, values


def placement_from_values(
    inst: Instance, model: MilpModel, values: dict[str, float]
) -> engine.Placement:
    """Rebuild a placement from solved x column values; unknown names warn."""
    layout = model.layout
    placement = engine.Placement.empty(inst)
    h = inst.dims.height
    for name, value in values.items():
        idx = model.index_of(name)
        if idx is None:
            logger.warning("solution contains unknown variable %r; ignored", name)
            continue
        if model.variable_kinds[idx] == "x" and value > 0.5:
            ti, cell = divmod(idx - layout.x_base, layout.n_cells)
            placement.masks[layout.nbs_ids[ti]][cell // h, cell % h] = True
    return placement


def _meta_float(meta: dict[str, str], key: str) -> float | None:
    try:
        return float(meta[key])
    except (KeyError, ValueError):
        return None


def solve_external(
    inst: Instance, config: SolveConfig | None = None, model: MilpModel | None = None
) -> SolveResult:
    """Export, invoke the external solver, parse, and re-verify its answer."""
    config = config or SolveConfig(backend="external")
    t0 = time.perf_counter()
    if model is None:
        model = build_model(inst)

    cleanup: tempfile.TemporaryDirectory | None = None
    if config.workdir is None:
        cleanup = tempfile.TemporaryDirectory(prefix="nbsopt-solve-")
        workdir = Path(cleanup.name)
    else:
        workdir = Path(config.workdir)
        workdir.mkdir(parents=True, exist_ok=True)

    try:
        model_path = workdir / "model.mps"
        solution_path = workdir / "solution.sol"
        export_interchange(model, model_path)

        cmd = config.resolved_solver_cmd().format(
            model=shlex.quote(str(model_path)),
            solution=shlex.quote(str(solution_path)),
            timelimit=config.time_limit,
        )
        logger.info("invoking external solver: %s", cmd)
        # grace covers model parsing and solution IO on top of the solver's
        # own time limit; scale it with the file size so huge models are not
        # killed while still being read
        grace = SUBPROCESS_GRACE + 2.0 * model_path.stat().st_size / 1e6
        try:
            proc = subprocess.run(
                shlex.split(cmd),
                capture_output=True,
                text=True,
                timeout=config.time_limit + grace,
            )
        except subprocess.TimeoutExpired:
            return SolveResult(
                status=STATUS_ERROR,
                backend="external",
                wall_time=time.perf_counter() - t0,
                message="external solver exceeded its grace period",
            )
        if proc.returncode != 0 or not solution_path.exists():
            tail = (proc.stderr or proc.stdout or "").strip()[-500:]
            return SolveResult(
                status=STATUS_ERROR,
                backend="external",
                wall_time=time.perf_counter() - t0,
                message=f"solver exited with {proc.returncode}: {tail}",
            )

        meta, values = parse_solution_file(solution_path)
        status = meta.get("status", "")
        wall = time.perf_counter() - t0
        bound = _meta_float(meta, "bound")

        if status == "infeasible":
            return SolveResult(
                status=STATUS_INFEASIBLE, backend="external", wall_time=wall, bound=bound
            )
        if status == "no-incumbent":
            # Nothing found within the limit; the pre-existing-only placement
            # is always feasible, so report it rather than failing.
            placement = engine.Placement.do_nothing(inst)
            breakdown = evaluate_solution(inst, placement)
            return SolveResult(
                status=STATUS_TIMEOUT,
                backend="external",
                placement=placement,
                objective=breakdown.total,
                bound=bound,
                wall_time=wall,
                breakdown=breakdown,
                message="no incumbent within the time limit; reporting do-nothing",
            )
        if status not in ("optimal", "feasible-timeout"):
            return SolveResult(
                status=STATUS_ERROR,
                backend="external",
                wall_time=wall,
                message=f"solver reported status {status!r}: {meta.get('message', '')}",
            )

        placement = placement_from_values(inst, model, values)
        violations = check_placement(inst, placement)
        if violations:
            families = sorted({v.family for v in violations})
            return SolveResult(
                status=STATUS_ERROR,
                backend="external",
                wall_time=wall,
                variables=values,
                message=f"solver placement violates: {', '.join(families)}",
            )
        try:
            breakdown = evaluate_solution(inst, placement, check=False)
        except InfeasiblePlacement as exc:  # pragma: no cover - checked above
            return SolveResult(
                status=STATUS_ERROR, backend="external", wall_time=wall, message=str(exc)
            )

        reported = _meta_float(meta, "objective")
        if reported is not None and not values_close(breakdown.total, reported):
            return SolveResult(
                status=STATUS_ERROR,
                backend="external",
                wall_time=wall,
                variables=values,
                message=(
                    f"objective mismatch: solver {reported!r}, "
                    f"re-evaluated {breakdown.total!r}"
                ),
            )
        return SolveResult(
            status=STATUS_OPTIMAL if status == "optimal" else STATUS_TIMEOUT,
            backend="external",
            placement=placement,
            objective=breakdown.total,
            bound=bound if bound is not None else breakdown.total,
            wall_time=wall,
            breakdown=breakdown,
            variables=values,
        )
    finally:
        if cleanup is not None:
            cleanup.cleanup()


def solve(inst: Instance, config: SolveConfig | None = None) -> SolveResult:
    config = config or SolveConfig()
    if config.backend == "oracle":
        return solve_oracle(inst, unit_cap=config.unit_cap)
    if config.backend == "external":
        return solve_external(inst, config)
    raise ValueError(f"unknown backend {config.backend!r}")
