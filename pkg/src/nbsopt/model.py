"""Solver-agnostic MILP assembly for the placement problem.

Variables (all per instance; G = grid cells, T = NBS types, U = measures):

    x[t,i,j]  binary   NBS t installed at (i, j) (fixed 1 on pre-existing)
    y[u,i,j]  binary   1 iff the raw impact z is below the cap delta
    z[u,i,j]  >= 0     summed kernel impact of new installations
    zbar      >= 0     achieved reduction, min(z, delta) after linearization
    zmax[u]   >= 0     peak of the reduced field
    zavg[u]   >= 0     mean of the reduced field
    f[i,j]    >= 0     population-weighted accessibility
    lam[t,q]  binary   cluster q of type t used

Constraint families, in emission order: one NBS per cell; budget over newly
installed cells; forbidden fixing (x = 0); pre-existing fixing (x = 1);
cluster linking (x = lam); impact definition (windowed sums excluding
pre-existing cells, zero padded); six big-M rows per (u, i, j) encoding
zbar = min(z, delta); peak rows zmax >= a - zbar; mean rows; fairness rows.

The minimized objective is the weighted sum of normalized peak, mean, and
cost terms minus the normalized total fairness. Peak and mean terms divide by
the field maximum, cost by the budget, and fairness is min-max scaled between
the pre-existing-only total and the best single-type-everywhere total.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import engine
from .instance import Cell, Instance
from .kernels import Kernel, compute_big_m

SENSE_LE = "<="
SENSE_EQ = "="
SENSE_GE = ">="

FEAS_TOL = 1e-9
DEGENERATE_SCALE_TOL = 1e-12


@dataclass(frozen=True)
class VarRef:
    """One model variable: kind, grid coordinates, and flat column index."""

    kind: str
    index: int
    name: str


@dataclass(eq=False)
class LinearConstraint:
    name: str
    tag: str
    indices: np.ndarray
    coeffs: np.ndarray
    sense: str
    rhs: float


@dataclass(eq=False)
class MilpModel:
    variable_names: list[str]
    variable_kinds: list[str]
    lower: np.ndarray
    upper: np.ndarray
    is_integer: np.ndarray
    constraints: list[LinearConstraint]
    objective_indices: np.ndarray
    objective_coeffs: np.ndarray
    objective_constant: float
    layout: "VariableLayout"
    _name_index: dict[str, int] | None = dataclass_field(default=None, repr=False)

    @property
    def n_variables(self) -> int:
        return len(self.variable_names)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def var(self, index: int) -> VarRef:
        return VarRef(self.variable_kinds[index], index, self.variable_names[index])

    def index_of(self, name: str) -> int | None:
        if self._name_index is None:
            self._name_index = {n: k for k, n in enumerate(self.variable_names)}
        return self._name_index.get(name)

    def objective_value(self, values: np.ndarray) -> float:
        return float(
            values[self.objective_indices] @ self.objective_coeffs
            + self.objective_constant
        )


class VariableLayout:
    """Bijection between (kind, coordinates) and flat column indices."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.width, self.height = inst.dims.shape
        self.n_cells = inst.dims.n_cells
        self.nbs_ids = inst.nbs_ids
        self.measure_ids = inst.measure_ids
        self.cluster_lists: dict[str, list[list[Cell]]] = {
            t: inst.clusters_for(t) for t in self.nbs_ids
        }
        n, n_t, n_u = self.n_cells, len(self.nbs_ids), len(self.measure_ids)
        self.x_base = 0
        self.y_base = n_t * n
        self.z_base = self.y_base + n_u * n
        self.zbar_base = self.z_base + n_u * n
        self.zmax_base = self.zbar_base + n_u * n
        self.zavg_base = self.zmax_base + n_u
        self.f_base = self.zavg_base + n_u
        self.lam_base = self.f_base + n
        self.lam_offsets: dict[str, int] = {}
        offset = self.lam_base
        for t in self.nbs_ids:
            self.lam_offsets[t] = offset
            offset += len(self.cluster_lists[t])
        self.n_variables = offset

    def cell(self, i: int, j: int) -> int:
        return i * self.height + j

    def x(self, ti: int, i: int, j: int) -> int:
        return self.x_base + ti * self.n_cells + self.cell(i, j)

    def y(self, ui: int, i: int, j: int) -> int:
        return self.y_base + ui * self.n_cells + self.cell(i, j)

    def z(self, ui: int, i: int, j: int) -> int:
        return self.z_base + ui * self.n_cells + self.cell(i, j)

    def zbar(self, ui: int, i: int, j: int) -> int:
        return self.zbar_base + ui * self.n_cells + self.cell(i, j)

    def zmax(self, ui: int) -> int:
        return self.zmax_base + ui

    def zavg(self, ui: int) -> int:
        return self.zavg_base + ui

    def f(self, i: int, j: int) -> int:
        return self.f_base + self.cell(i, j)

    def lam(self, nbs_id: str, q: int) -> int:
        return self.lam_offsets[nbs_id] + q

    def variable_names_kinds(self) -> tuple[list[str], list[str]]:
        names: list[str] = []
        kinds: list[str] = []
        w, h = self.width, self.height
        for ti in range(len(self.nbs_ids)):
            for i in range(w):
                for j in range(h):
                    names.append(f"x_t{ti}_i{i}_j{j}")
                    kinds.append("x")
        for prefix, kind in (("y", "y"), ("z", "z"), ("zbar", "zbar")):
            for ui in range(len(self.measure_ids)):
                for i in range(w):
                    for j in range(h):
                        names.append(f"{prefix}_u{ui}_i{i}_j{j}")
                        kinds.append(kind)
        for prefix in ("zmax", "zavg"):
            for ui in range(len(self.measure_ids)):
                names.append(f"{prefix}_u{ui}")
                kinds.append(prefix)
        for i in range(w):
            for j in range(h):
                names.append(f"f_i{i}_j{j}")
                kinds.append("f")
        for ti, t in enumerate(self.nbs_ids):
            for q in range(len(self.cluster_lists[t])):
                names.append(f"lam_t{ti}_q{q}")
                kinds.append("lam")
        return names, kinds


@dataclass(frozen=True)
class Normalizers:
    """Instance-constant scale factors bringing objective terms into [0, 1]."""

    peak_scale: dict[str, float]
    cost_scale: float
    fairness_scale: float
    fairness_min: float
    fairness_max: float


def objective_normalizers(inst: Instance) -> Normalizers:
    """Compute the per-term normalization constants.

    Peak/mean terms divide by the observed field maximum, cost by the budget.
    Fairness is min-max scaled: the minimum is the pre-existing-only total,
    the maximum the best total over hypothetical solutions installing a single
    type on every cell it is not forbidden on. Degenerate scales fall back to
    one.
    """
    peak_scale: dict[str, float] = {}
    for u in inst.measures:
        m = float(np.max(u.field))
        peak_scale[u.id] = 1.0 / m if m > DEGENERATE_SCALE_TOL else 1.0
    cost_scale = 1.0 / inst.budget if inst.budget > 0 else 1.0

    f_min = float(engine.fairness(inst, engine.Placement.do_nothing(inst)).sum())
    f_max = f_min
    for t in inst.nbs_ids:
        placement = engine.Placement.empty(inst)
        placement.masks[t] = ~inst.forbidden_mask(t)
        f_max = max(f_max, float(engine.fairness(inst, placement).sum()))
    spread = f_max - f_min
    fairness_scale = 1.0 / spread if spread > DEGENERATE_SCALE_TOL else 1.0
    return Normalizers(
        peak_scale=peak_scale,
        cost_scale=cost_scale,
        fairness_scale=fairness_scale,
        fairness_min=f_min,
        fairness_max=f_max,
    )


def big_m_values(inst: Instance) -> dict[str, float]:
    """Per-measure upper bounds on the raw impact z (max kernel sum)."""
    return {
        u: compute_big_m([inst.kernel(u, t) for t in inst.nbs_ids])
        for u in inst.measure_ids
    }


def linearization_big_m(inst: Instance) -> dict[str, float]:
    """Big-M constants used in the clamp rows.

    The impact bound alone is not enough: the rows z >= delta - M*y and
    zbar >= delta - M*y must stay satisfiable at z = 0 with y = 1, which
    needs M >= delta. Take the max of both.
    """
    return {
        u: max(m, inst.delta(u)) for u, m in big_m_values(inst).items()
    }


def _kernel_offsets(kernel: Kernel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flattened (di, dj, value) triplets of the nonzero kernel entries."""
    cw, ch = kernel.width // 2, kernel.height // 2
    dis, djs = np.meshgrid(
        np.arange(-cw, cw + 1), np.arange(-ch, ch + 1), indexing="ij"
    )
    vals = kernel.entries.ravel()
    keep = vals != 0.0
    return dis.ravel()[keep], djs.ravel()[keep], vals[keep]


def build_model(inst: Instance) -> MilpModel:
    """Assemble the full MILP for a validated instance."""
    layout = VariableLayout(inst)
    norms = objective_normalizers(inst)
    deltas = {u: inst.delta(u) for u in inst.measure_ids}
    big_m = linearization_big_m(inst)
    w, h = layout.width, layout.height
    n = layout.n_cells

    names, kinds = layout.variable_names_kinds()
    n_vars = layout.n_variables
    lower = np.zeros(n_vars)
    upper = np.full(n_vars, np.inf)
    is_integer = np.zeros(n_vars, dtype=bool)
    for k, kind in enumerate(kinds):
        if kind in ("x", "y", "lam"):
            upper[k] = 1.0
            is_integer[k] = True

    constraints: list[LinearConstraint] = []

    def add(name: str, tag: str, indices, coeffs, sense: str, rhs: float) -> None:
        constraints.append(
            LinearConstraint(
                name=name,
                tag=tag,
                indices=np.asarray(indices, dtype=np.int64),
                coeffs=np.asarray(coeffs, dtype=float),
                sense=sense,
                rhs=float(rhs),
            )
        )

    n_t = len(layout.nbs_ids)
    x_cols = np.arange(n_t, dtype=np.int64) * n  # x index = x_base + ti*n + cell

    # One NBS type per cell.
    for i in range(w):
        for j in range(h):
            add(
                f"one_type_i{i}_j{j}",
                "one_type",
                x_cols + layout.cell(i, j),
                np.ones(n_t),
                SENSE_LE,
                1.0,
            )

    # Budget over newly installed cells; pre-existing ones are cost-free.
    budget_idx: list[int] = []
    budget_coef: list[float] = []
    for ti, t in enumerate(layout.nbs_ids):
        cost = inst.nbs_by_id(t).cost
        pre = inst.masks.pre_existing[t]
        for i in range(w):
            for j in range(h):
                if (i, j) not in pre:
                    budget_idx.append(layout.x(ti, i, j))
                    budget_coef.append(cost)
    add("budget", "budget", budget_idx, budget_coef, SENSE_LE, inst.budget)

    # Fix forbidden cells off and pre-existing cells on.
    for ti, t in enumerate(layout.nbs_ids):
        for i, j in sorted(inst.masks.forbidden[t]):
            add(
                f"forbid_t{ti}_i{i}_j{j}",
                "forbidden",
                [layout.x(ti, i, j)],
                [1.0],
                SENSE_EQ,
                0.0,
            )
    for ti, t in enumerate(layout.nbs_ids):
        for i, j in sorted(inst.masks.pre_existing[t]):
            add(
                f"pre_t{ti}_i{i}_j{j}",
                "pre_existing",
                [layout.x(ti, i, j)],
                [1.0],
                SENSE_EQ,
                1.0,
            )

    # Cluster linking: every cell of a cluster equals its lambda.
    for ti, t in enumerate(layout.nbs_ids):
        for q, group in enumerate(layout.cluster_lists[t]):
            lam_idx = layout.lam(t, q)
            for i, j in group:
                add(
                    f"link_t{ti}_q{q}_i{i}_j{j}",
                    "cluster",
                    [layout.x(ti, i, j), lam_idx],
                    [1.0, -1.0],
                    SENSE_EQ,
                    0.0,
                )

    # Impact definition: z minus the windowed sums of new installations.
    pre_flat = {
        t: inst.pre_mask(t).ravel() for t in layout.nbs_ids
    }
    offsets = {
        (u, t): _kernel_offsets(inst.kernel(u, t))
        for u in layout.measure_ids
        for t in layout.nbs_ids
    }
    for ui, u in enumerate(layout.measure_ids):
        for i in range(w):
            for j in range(h):
                idx_parts = [np.array([layout.z(ui, i, j)], dtype=np.int64)]
                coef_parts = [np.array([1.0])]
                for ti, t in enumerate(layout.nbs_ids):
                    dis, djs, vals = offsets[(u, t)]
                    src_i = i + dis
                    src_j = j + djs
                    keep = (src_i >= 0) & (src_i < w) & (src_j >= 0) & (src_j < h)
                    if not keep.any():
                        continue
                    cells = src_i[keep] * h + src_j[keep]
                    vals_k = vals[keep]
                    new = ~pre_flat[t][cells]
                    if not new.any():
                        continue
                    idx_parts.append(layout.x_base + ti * n + cells[new])
                    coef_parts.append(-vals_k[new])
                add(
                    f"conv_u{ui}_i{i}_j{j}",
                    "conv",
                    np.concatenate(idx_parts),
                    np.concatenate(coef_parts),
                    SENSE_EQ,
                    0.0,
                )

    # Big-M linearization of zbar = min(z, delta); y = 1 marks z <= delta.
    for ui, u in enumerate(layout.measure_ids):
        d, m = deltas[u], big_m[u]
        for i in range(w):
            for j in range(h):
                zi = layout.z(ui, i, j)
                zbi = layout.zbar(ui, i, j)
                yi = layout.y(ui, i, j)
                suffix = f"u{ui}_i{i}_j{j}"
                add(f"bigm1_{suffix}", "bigm", [zi, yi], [1.0, m], SENSE_LE, d + m)
                add(f"bigm2_{suffix}", "bigm", [zi, yi], [1.0, m], SENSE_GE, d)
                add(f"bigm3_{suffix}", "bigm", [zbi, zi], [1.0, -1.0], SENSE_LE, 0.0)
                add(f"bigm4_{suffix}", "bigm", [zbi], [1.0], SENSE_LE, d)
                add(
                    f"bigm5_{suffix}",
                    "bigm",
                    [zbi, zi, yi],
                    [1.0, -1.0, -m],
                    SENSE_GE,
                    -m,
                )
                add(f"bigm6_{suffix}", "bigm", [zbi, yi], [1.0, m], SENSE_GE, d)

    # Peak rows: zmax dominates every reduced value.
    for ui, u in enumerate(layout.measure_ids):
        a = inst.measure_by_id(u).field
        for i in range(w):
            for j in range(h):
                add(
                    f"peak_u{ui}_i{i}_j{j}",
                    "peak",
                    [layout.zmax(ui), layout.zbar(ui, i, j)],
                    [1.0, 1.0],
                    SENSE_GE,
                    float(a[i, j]),
                )

    # Mean rows: zavg equals the average reduced value.
    inv_n = 1.0 / n
    for ui, u in enumerate(layout.measure_ids):
        a = inst.measure_by_id(u).field
        idx = [layout.zavg(ui)] + [
            layout.zbar(ui, i, j) for i in range(w) for j in range(h)
        ]
        coef = [1.0] + [inv_n] * n
        add(f"avg_u{ui}", "avg", idx, coef, SENSE_EQ, float(a.mean()))

    # Fairness rows: f equals the population-weighted accessibility sum.
    fairness_offsets = {
        t: _kernel_offsets(inst.fairness_kernels[t]) for t in layout.nbs_ids
    }
    pop = inst.population
    for i in range(w):
        for j in range(h):
            p = float(pop[i, j])
            idx_parts = [np.array([layout.f(i, j)], dtype=np.int64)]
            coef_parts = [np.array([1.0])]
            if p != 0.0:
                for ti, t in enumerate(layout.nbs_ids):
                    dis, djs, vals = fairness_offsets[t]
                    src_i = i + dis
                    src_j = j + djs
                    keep = (src_i >= 0) & (src_i < w) & (src_j >= 0) & (src_j < h)
                    if not keep.any():
                        continue
                    cells = src_i[keep] * h + src_j[keep]
                    idx_parts.append(layout.x_base + ti * n + cells)
                    coef_parts.append(-p * vals[keep])
            add(
                f"fair_i{i}_j{j}",
                "fairness",
                np.concatenate(idx_parts),
                np.concatenate(coef_parts),
                SENSE_EQ,
                0.0,
            )

    # Objective: weighted normalized peak + mean + cost - fairness.
    obj_idx: list[int] = []
    obj_coef: list[float] = []
    for ui, u in enumerate(layout.measure_ids):
        wp = inst.weights.peak[u] * norms.peak_scale[u]
        if wp != 0.0:
            obj_idx.append(layout.zmax(ui))
            obj_coef.append(wp)
        wa = inst.weights.avg[u] * norms.peak_scale[u]
        if wa != 0.0:
            obj_idx.append(layout.zavg(ui))
            obj_coef.append(wa)
    if inst.weights.cost != 0.0:
        for ti, t in enumerate(layout.nbs_ids):
            coef = inst.weights.cost * inst.nbs_by_id(t).cost * norms.cost_scale
            pre = inst.masks.pre_existing[t]
            for i in range(w):
                for j in range(h):
                    if (i, j) not in pre:
                        obj_idx.append(layout.x(ti, i, j))
                        obj_coef.append(coef)
    constant = 0.0
    if inst.weights.fairness != 0.0:
        wf = inst.weights.fairness * norms.fairness_scale
        for i in range(w):
            for j in range(h):
                obj_idx.append(layout.f(i, j))
                obj_coef.append(-wf)
        constant = wf * norms.fairness_min

    return MilpModel(
        variable_names=names,
        variable_kinds=kinds,
        lower=lower,
        upper=upper,
        is_integer=is_integer,
        constraints=constraints,
        objective_indices=np.asarray(obj_idx, dtype=np.int64),
        objective_coeffs=np.asarray(obj_coef, dtype=float),
        objective_constant=constant,
        layout=layout,
    )


def expected_variable_count(inst: Instance) -> int:
    """Closed-form column count: |G||T| + 3|G||U| + 2|U| + |G| + sum |Q^t|."""
    n = inst.dims.n_cells
    n_t = len(inst.nbs)
    n_u = len(inst.measures)
    n_clusters = sum(len(inst.clusters_for(t)) for t in inst.nbs_ids)
    return n * n_t + 3 * n * n_u + 2 * n_u + n + n_clusters


# --- Placement feasibility and objective evaluation --------------------------


@dataclass(frozen=True)
class Violation:
    family: str
    message: str
    cells: tuple[Cell, ...] = ()


class InfeasiblePlacement(ValueError):
    """Placement breaks one or more constraint families."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        lines = [f"[{v.family}] {v.message}" for v in violations]
        super().__init__("infeasible placement:\n - " + "\n - ".join(lines))


def check_placement(inst: Instance, placement: engine.Placement) -> list[Violation]:
    """Independent check of every constraint family against a placement."""
    violations: list[Violation] = []

    stack = np.zeros(inst.dims.shape, dtype=int)
    for t in inst.nbs_ids:
        stack += placement.masks[t].astype(int)
    bad = np.argwhere(stack > 1)
    if bad.size:
        cells = tuple((int(i), int(j)) for i, j in bad)
        violations.append(
            Violation("one_type", f"{len(cells)} cell(s) host more than one NBS", cells)
        )

    cost = 0.0
    for t in inst.nbs_ids:
        cost += inst.nbs_by_id(t).cost * int(placement.new_mask(inst, t).sum())
    if cost > inst.budget * (1 + FEAS_TOL) + FEAS_TOL:
        violations.append(
            Violation("budget", f"cost {cost!r} exceeds budget {inst.budget!r}")
        )

    for t in inst.nbs_ids:
        on_forbidden = placement.masks[t] & inst.forbidden_mask(t)
        bad = np.argwhere(on_forbidden)
        if bad.size:
            cells = tuple((int(i), int(j)) for i, j in bad)
            violations.append(
                Violation("forbidden", f"NBS {t!r} placed on forbidden cell(s)", cells)
            )
        missing = inst.pre_mask(t) & ~placement.masks[t]
        bad = np.argwhere(missing)
        if bad.size:
            cells = tuple((int(i), int(j)) for i, j in bad)
            violations.append(
                Violation(
                    "pre_existing", f"pre-existing NBS {t!r} cell(s) switched off", cells
                )
            )

    for t in inst.nbs_ids:
        mask = placement.masks[t]
        for q, group in enumerate(inst.clusters_for(t)):
            values = {bool(mask[i, j]) for i, j in group}
            if len(values) > 1:
                violations.append(
                    Violation(
                        "cluster",
                        f"cluster {q} of NBS {t!r} is partially used",
                        tuple(group),
                    )
                )

    # zavg is a nonnegative variable, so placements driving the mean reduced
    # value below zero are infeasible in the MILP as well.
    for u in inst.measures:
        zbar = engine.measure_reduction(inst, placement, u.id)
        if float((u.field - zbar).mean()) < -FEAS_TOL:
            violations.append(
                Violation(
                    "avg_nonneg",
                    f"mean reduced value of measure {u.id!r} is negative",
                )
            )

    return violations


@dataclass
class ObjectiveBreakdown:
    """Raw quantities and weighted normalized terms of the objective."""

    peak_value: dict[str, float]
    avg_value: dict[str, float]
    cost_value: float
    fairness_value: float
    peak_term: dict[str, float]
    avg_term: dict[str, float]
    cost_term: float
    fairness_term: float
    total: float

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "peak_value": dict(self.peak_value),
            "avg_value": dict(self.avg_value),
            "cost_value": self.cost_value,
            "fairness_value": self.fairness_value,
            "peak_term": dict(self.peak_term),
            "avg_term": dict(self.avg_term),
            "cost_term": self.cost_term,
            "fairness_term": self.fairness_term,
        }


def evaluate_solution(
    inst: Instance,
    placement: engine.Placement,
    norms: Normalizers | None = None,
    check: bool = True,
) -> ObjectiveBreakdown:
    """Objective value of a placement, computed directly from the fields.

    Uses the same normalizers and term structure as build_model, with no MILP
    involved, so it doubles as the independent evaluation for the enumeration
    oracle and for verifying solver output.
    """
    if check:
        violations = check_placement(inst, placement)
        if violations:
            raise InfeasiblePlacement(violations)
    if norms is None:
        norms = objective_normalizers(inst)

    peak_value: dict[str, float] = {}
    avg_value: dict[str, float] = {}
    peak_term: dict[str, float] = {}
    avg_term: dict[str, float] = {}
    total = 0.0
    for u in inst.measures:
        zbar = engine.measure_reduction(inst, placement, u.id)
        reduced = u.field - zbar
        # zmax/zavg live in R+, so the solver can never report below zero.
        peak_value[u.id] = max(0.0, float(reduced.max()))
        avg_value[u.id] = float(reduced.mean())
        peak_term[u.id] = inst.weights.peak[u.id] * norms.peak_scale[u.id] * peak_value[u.id]
        avg_term[u.id] = inst.weights.avg[u.id] * norms.peak_scale[u.id] * avg_value[u.id]
        total += peak_term[u.id] + avg_term[u.id]

    cost_value = 0.0
    for t in inst.nbs_ids:
        cost_value += inst.nbs_by_id(t).cost * int(placement.new_mask(inst, t).sum())
    cost_term = inst.weights.cost * norms.cost_scale * cost_value
    total += cost_term

    fairness_value = float(engine.fairness(inst, placement).sum())
    fairness_term = (
        -inst.weights.fairness * norms.fairness_scale * (fairness_value - norms.fairness_min)
    )
    total += fairness_term

    return ObjectiveBreakdown(
        peak_value=peak_value,
        avg_value=avg_value,
        cost_value=cost_value,
        fairness_value=fairness_value,
        peak_term=peak_term,
        avg_term=avg_term,
        cost_term=cost_term,
        fairness_term=fairness_term,
        total=total,
    )


def clamp_witness(
    z: float, delta: float, big_m: float
) -> tuple[int, float, float]:
    """Pick y and zbar satisfying the six big-M rows for a given raw impact.

    Returns (y, zbar, residual) where residual is the largest constraint
    violation; a correct linearization yields residual <= 0 up to rounding.
    """
    y = 1 if z <= delta else 0
    zbar = min(z, delta)
    residuals = (
        z - (delta + big_m * (1 - y)),
        (delta - big_m * y) - z,
        zbar - z,
        zbar - delta,
        (z - big_m * (1 - y)) - zbar,
        (delta - big_m * y) - zbar,
    )
    return y, zbar, max(residuals)
