"""Shared test helpers: independent oracles and small instance builders.

The oracles here are deliberately naive (triple loops, BFS) and stay
independent of the production code paths they check.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from nbsopt import GridDims, Instance, Masks, NbsType, ObjectiveWeights, UcMeasure
from nbsopt.engine import Placement
from nbsopt.instance import validate_instance
from nbsopt.kernels import Kernel
from nbsopt.model import MilpModel, clamp_witness, linearization_big_m


def naive_correlate(field: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Per-cell windowed sum with zero padding, written as plain loops."""
    w, h = field.shape
    kw, kh = kernel.shape
    cw, ch = kw // 2, kh // 2
    out = np.zeros((w, h))
    for i in range(w):
        for j in range(h):
            acc = 0.0
            for a in range(kw):
                for b in range(kh):
                    ii = i - cw + a
                    jj = j - ch + b
                    if 0 <= ii < w and 0 <= jj < h:
                        acc += field[ii, jj] * kernel[a, b]
            out[i, j] = acc
    return out


def flood_fill_components(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """4-connected components via BFS, sorted like the production output."""
    mask = np.asarray(mask, dtype=bool)
    w, h = mask.shape
    seen = np.zeros_like(mask)
    components = []
    for i in range(w):
        for j in range(h):
            if not mask[i, j] or seen[i, j]:
                continue
            queue = deque([(i, j)])
            seen[i, j] = True
            cells = []
            while queue:
                ci, cj = queue.popleft()
                cells.append((ci, cj))
                for ni, nj in ((ci - 1, cj), (ci + 1, cj), (ci, cj - 1), (ci, cj + 1)):
                    if 0 <= ni < w and 0 <= nj < h and mask[ni, nj] and not seen[ni, nj]:
                        seen[ni, nj] = True
                        queue.append((ni, nj))
            components.append(sorted(cells))
    components.sort(key=lambda cells: cells[0])
    return components


def make_instance(
    field: np.ndarray,
    kernel: Kernel | None = None,
    fairness_kernel: Kernel | None = None,
    cost: float = 100.0,
    budget: float = 1e9,
    forbidden: set | None = None,
    pre_existing: set | None = None,
    delta: float | None = None,
    population: np.ndarray | None = None,
    clusters: dict | None = None,
    weights: ObjectiveWeights | None = None,
    resolution: float = 10.0,
) -> Instance:
    """Single-NBS single-measure instance with sensible defaults."""
    field = np.asarray(field, dtype=float)
    dims = GridDims(field.shape[0], field.shape[1], resolution)
    if kernel is None:
        kernel = Kernel(np.array([[1.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 1.0]]))
    if fairness_kernel is None:
        fairness_kernel = Kernel(np.array([[3.0]]))
    if population is None:
        population = np.full(dims.shape, 1.0 / dims.n_cells)
    if weights is None:
        weights = ObjectiveWeights(
            peak={"M": 0.25}, avg={"M": 0.25}, cost=0.25, fairness=0.25
        )
    inst = Instance(
        dims=dims,
        nbs=[NbsType("GW", "Green Wall", cost)],
        measures=[UcMeasure("M", "unit", field, delta=delta)],
        kernels={("M", "GW"): kernel},
        fairness_kernels={"GW": fairness_kernel},
        masks=Masks(
            forbidden={"GW": forbidden or set()},
            pre_existing={"GW": pre_existing or set()},
        ),
        population=population,
        budget=budget,
        weights=weights,
        clusters=clusters,
    )
    validate_instance(inst)
    return inst


def variable_vector(inst: Instance, model: MilpModel, placement: Placement) -> np.ndarray:
    """Embed a placement into the model's variable space.

    Auxiliary variables take their defining values; y takes the clamp
    witness. Useful for checking the MILP rows against engine output.
    """
    from nbsopt import engine

    layout = model.layout
    vals = np.zeros(model.n_variables)
    big_m = linearization_big_m(inst)
    for ti, t in enumerate(layout.nbs_ids):
        mask = placement.masks[t]
        for i in range(layout.width):
            for j in range(layout.height):
                if mask[i, j]:
                    vals[layout.x(ti, i, j)] = 1.0
        for q, group in enumerate(layout.cluster_lists[t]):
            vals[layout.lam(t, q)] = 1.0 if mask[group[0]] else 0.0
    for ui, u in enumerate(layout.measure_ids):
        z = engine.measure_impact(inst, placement, u)
        d = inst.delta(u)
        reduced = inst.measure_by_id(u).field - np.minimum(z, d)
        for i in range(layout.width):
            for j in range(layout.height):
                y, zbar, _ = clamp_witness(float(z[i, j]), d, big_m[u])
                vals[layout.z(ui, i, j)] = z[i, j]
                vals[layout.zbar(ui, i, j)] = zbar
                vals[layout.y(ui, i, j)] = y
        vals[layout.zmax(ui)] = max(0.0, float(reduced.max()))
        vals[layout.zavg(ui)] = float(reduced.mean())
    f = engine.fairness(inst, placement)
    for i in range(layout.width):
        for j in range(layout.height):
            vals[layout.f(i, j)] = f[i, j]
    return vals


def constraint_residuals(model: MilpModel, vals: np.ndarray) -> float:
    """Largest violation of any model row at the given point (<= 0 is feasible)."""
    worst = -np.inf
    for con in model.constraints:
        lhs = float(vals[con.indices] @ con.coeffs)
        if con.sense == "<=":
            worst = max(worst, lhs - con.rhs)
        elif con.sense == ">=":
            worst = max(worst, con.rhs - lhs)
        else:
            worst = max(worst, abs(lhs - con.rhs))
    return worst
