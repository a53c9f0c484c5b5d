"""Post-solve analysis: reduction statistics, budget breakdown, equity, exports.

Reduced fields are reported raw (observed minus achieved reduction); cells
that dip below zero are counted rather than clamped, since whether a measure
may physically go negative depends on its unit. Equity is summarized by the
Gini coefficient over per-cell fairness values, before (pre-existing only)
and after the solved placement.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import engine
from .instance import Instance
from .model import ObjectiveBreakdown, evaluate_solution
from .solve import SolveResult

# Placement map categories (one map per NBS type; the four codes partition
# the grid) and the gray levels used for the exported images.
CAT_FORBIDDEN = 0
CAT_UNUSED = 1
CAT_PRE_EXISTING = 2
CAT_NEW = 3
CATEGORY_LABELS = {
    CAT_FORBIDDEN: "forbidden",
    CAT_UNUSED: "unused",
    CAT_PRE_EXISTING: "pre-existing",
    CAT_NEW: "new",
}
CATEGORY_GRAY = {CAT_FORBIDDEN: 64, CAT_UNUSED: 255, CAT_PRE_EXISTING: 112, CAT_NEW: 176}


def gini(values: Sequence[float] | np.ndarray) -> float:
    """Gini coefficient in [0, 1]; 0 is perfect equality.

    Mean absolute difference over twice the mean, computed via the sorted
    rank formula. The all-zero vector maps to 0.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("gini needs at least one value")
    if np.any(v < 0):
        raise ValueError("gini is undefined for negative values")
    total = v.sum()
    if total == 0.0:
        return 0.0
    v = np.sort(v)
    n = v.size
    ranks = np.arange(1, n + 1, dtype=float)
    g = 2.0 * (ranks @ v) / (n * total) - (n + 1) / n
    # rounding can push the result a few ulps outside the exact [0, 1] range
    return float(min(1.0, max(0.0, g)))


@dataclass
class MeasureReport:
    measure_id: str
    initial_peak: float
    final_peak: float
    initial_avg: float
    final_avg: float
    reduction: np.ndarray
    negative_cells: int


@dataclass
class NbsReport:
    nbs_id: str
    new_cells: int
    spend: float
    budget_fraction: float


@dataclass
class Report:
    measures: list[MeasureReport]
    nbs: list[NbsReport]
    gini_initial: float
    gini_final: float
    objective: ObjectiveBreakdown
    placement_categories: dict[str, np.ndarray]
    metadata: dict

    def measure(self, measure_id: str) -> MeasureReport:
        for m in self.measures:
            if m.measure_id == measure_id:
                return m
        raise KeyError(measure_id)


def build_report(inst: Instance, result: SolveResult) -> Report:
    """Summarize a feasible solve result against the instance's initial state."""
    if result.placement is None:
        raise ValueError(f"result has no placement (status {result.status!r})")
    placement = result.placement

    measures: list[MeasureReport] = []
    for u in inst.measures:
        zbar = engine.measure_reduction(inst, placement, u.id)
        reduced = engine.reduced_measure(u.field, zbar)
        measures.append(
            MeasureReport(
                measure_id=u.id,
                initial_peak=float(u.field.max()),
                final_peak=float(reduced.max()),
                initial_avg=float(u.field.mean()),
                final_avg=float(reduced.mean()),
                reduction=zbar,
                negative_cells=int((reduced < 0).sum()),
            )
        )

    nbs_reports: list[NbsReport] = []
    for t in inst.nbs_ids:
        count = int(placement.new_mask(inst, t).sum())
        spend = count * inst.nbs_by_id(t).cost
        nbs_reports.append(
            NbsReport(
                nbs_id=t,
                new_cells=count,
                spend=spend,
                budget_fraction=spend / inst.budget if inst.budget > 0 else 0.0,
            )
        )

    gini_initial = gini(engine.fairness(inst, engine.Placement.do_nothing(inst)))
    gini_final = gini(engine.fairness(inst, placement))

    categories: dict[str, np.ndarray] = {}
    for t in inst.nbs_ids:
        cat = np.full(inst.dims.shape, CAT_UNUSED, dtype=np.uint8)
        cat[inst.forbidden_mask(t)] = CAT_FORBIDDEN
        cat[placement.new_mask(inst, t)] = CAT_NEW
        cat[inst.pre_mask(t)] = CAT_PRE_EXISTING
        categories[t] = cat

    breakdown = result.breakdown or evaluate_solution(inst, placement)
    return Report(
        measures=measures,
        nbs=nbs_reports,
        gini_initial=gini_initial,
        gini_final=gini_final,
        objective=breakdown,
        placement_categories=categories,
        metadata={
            "backend": result.backend,
            "status": result.status,
            "wall_time": result.wall_time,
            "objective": result.objective,
            "bound": result.bound,
        },
    )


def report_to_dict(report: Report) -> dict:
    return {
        "measures": [
            {
                "id": m.measure_id,
                "initial_peak": m.initial_peak,
                "final_peak": m.final_peak,
                "initial_avg": m.initial_avg,
                "final_avg": m.final_avg,
                "negative_cells": m.negative_cells,
                "reduction": m.reduction.tolist(),
            }
            for m in report.measures
        ],
        "nbs": [
            {
                "id": t.nbs_id,
                "new_cells": t.new_cells,
                "spend": t.spend,
                "budget_fraction": t.budget_fraction,
            }
            for t in report.nbs
        ],
        "gini": {"initial": report.gini_initial, "final": report.gini_final},
        "objective": report.objective.to_dict(),
        "placement_categories": {
            t: cat.tolist() for t, cat in sorted(report.placement_categories.items())
        },
        "metadata": report.metadata,
    }


def write_report(report: Report, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def _safe_name(name: str) -> str:
    return name.replace("/", "_").replace("\\", "_").replace(" ", "_")


def write_matrix_csv(matrix: np.ndarray, path: Path) -> None:
    """RFC-4180 CSV, one line per grid row, '.' decimal separator."""
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(matrix):
            writer.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path: Path) -> np.ndarray:
    with path.open("r", encoding="utf-8", newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


def write_pgm(levels: np.ndarray, path: Path, comment: str = "") -> None:
    """ASCII portable graymap (P2), maxval 255; rows follow grid rows."""
    levels = np.asarray(levels, dtype=int)
    lines = ["P2"]
    if comment:
        lines.append(f"# {comment}")
    lines.append(f"{levels.shape[1]} {levels.shape[0]}")
    lines.append("255")
    for row in levels:
        lines.append(" ".join(str(int(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_heatmaps(report: Report, directory: str | Path) -> list[Path]:
    """Write per-measure reduction CSVs and grayscale maps plus placement maps.

    Images are min-max scaled per measure; the scales used are recorded in
    heatmap_scales.json, and placement_legend.json maps category codes to
    labels and gray levels.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    scales: dict[str, dict[str, float]] = {}

    for m in report.measures:
        base = _safe_name(m.measure_id)
        csv_path = directory / f"reduction_{base}.csv"
        write_matrix_csv(m.reduction, csv_path)
        written.append(csv_path)

        lo = float(m.reduction.min())
        hi = float(m.reduction.max())
        scales[m.measure_id] = {"min": lo, "max": hi}
        if hi > lo:
            levels = np.rint((m.reduction - lo) / (hi - lo) * 255).astype(int)
        else:
            levels = np.zeros_like(m.reduction, dtype=int)
        pgm_path = directory / f"reduction_{base}.pgm"
        write_pgm(levels, pgm_path, comment=f"scale min={lo!r} max={hi!r}")
        written.append(pgm_path)

    scales_path = directory / "heatmap_scales.json"
    scales_path.write_text(json.dumps(scales, indent=2) + "\n", encoding="utf-8")
    written.append(scales_path)

    gray = np.vectorize(CATEGORY_GRAY.get, otypes=[int])
    for t, cat in sorted(report.placement_categories.items()):
        pgm_path = directory / f"placement_{_safe_name(t)}.pgm"
        write_pgm(gray(cat), pgm_path, comment=f"placement categories for {t}")
        written.append(pgm_path)

    legend_path = directory / "placement_legend.json"
    legend_path.write_text(
        json.dumps(
            {
                str(code): {"label": CATEGORY_LABELS[code], "gray": CATEGORY_GRAY[code]}
                for code in sorted(CATEGORY_LABELS)
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    written.append(legend_path)
    return written


def batch_stats(reports: list[Report]) -> dict:
    """Aggregate a batch of reports: timing, optimality, mean reductions."""
    if not reports:
        raise ValueError("batch_stats needs at least one report")
    n = len(reports)
    statuses = [r.metadata.get("status") for r in reports]
    wall_times = [float(r.metadata.get("wall_time") or 0.0) for r in reports]

    measure_ids = sorted({m.measure_id for r in reports for m in r.measures})
    nbs_ids = sorted({t.nbs_id for r in reports for t in r.nbs})

    def mean(values: list[float]) -> float:
        return float(np.mean(values)) if values else 0.0

    measures = {}
    for u in measure_ids:
        peaks, avgs = [], []
        for r in reports:
            for m in r.measures:
                if m.measure_id == u:
                    peaks.append(m.initial_peak - m.final_peak)
                    avgs.append(m.initial_avg - m.final_avg)
        measures[u] = {
            "mean_peak_reduction": mean(peaks),
            "mean_avg_reduction": mean(avgs),
        }

    nbs = {}
    for t in nbs_ids:
        fractions = [
            entry.budget_fraction for r in reports for entry in r.nbs if entry.nbs_id == t
        ]
        nbs[t] = {"mean_budget_fraction": mean(fractions)}

    return {
        "count": n,
        "mean_wall_time": mean(wall_times),
        "pct_optimal": 100.0 * sum(s == "optimal" for s in statuses) / n,
        "measures": measures,
        "nbs": nbs,
        "gini": {
            "mean_initial": mean([r.gini_initial for r in reports]),
            "mean_final": mean([r.gini_final for r in reports]),
        },
    }
