"""Command-line interface tying the pipeline together for batch use.

Commands: gen, validate, kernels, cluster, build, solve, report, bench.
Exit codes: 0 ok, 2 validation/schema failure, 3 solve failure, 4 IO failure.
All randomness flows from --seed; identical command lines over identical
inputs produce byte-identical primary outputs (timestamps and wall times are
confined to metadata fields).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import sys
from pathlib import Path
from typing import Any

from . import analysis, clustering, kernels as kf
from .engine import Placement
from .generator import generate_synthetic
from .instance import (
    GridDims,
    Instance,
    InstanceError,
    SchemaError,
    ValidationError,
    load_instance,
    save_instance,
)
from .model import build_model, expected_variable_count
from .mps import export_interchange
from .solve import (
    DEFAULT_TIME_LIMIT,
    DEFAULT_UNIT_CAP,
    OracleCapExceeded,
    SolveConfig,
    SolveResult,
    solve,
)
from .suite import desk_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVE = 3
EXIT_IO = 4

# Instance side lengths by size label.
SIZE_TABLE = {"xs": 50, "s": 100, "m": 200, "l": 300}


def _fail(code: str, message: str, exit_code: int) -> int:
    print(f"error code={code} message={json.dumps(message)}", file=sys.stderr)
    return exit_code


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise SchemaError("config", "config file must hold a JSON object")
    return raw


def _pick(args: argparse.Namespace, config: dict, key: str, default: Any) -> Any:
    """Flag value if given, else config value, else the built-in default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _result_to_dict(result: SolveResult, inst: Instance) -> dict[str, Any]:
    new_cells = (
        {t: [list(c) for c in cells] for t, cells in result.placement.new_cells(inst).items()}
        if result.placement is not None
        else None
    )
    return {
        "status": result.status,
        "objective": result.objective,
        "bound": result.bound,
        "new_cells": new_cells,
        "objective_terms": result.breakdown.to_dict() if result.breakdown else None,
        "metadata": {
            "backend": result.backend,
            "wall_time": result.wall_time,
            "message": result.message,
        },
    }


def _result_from_dict(raw: dict[str, Any], inst: Instance) -> SolveResult:
    placement = None
    if raw.get("new_cells") is not None:
        placement = Placement.from_new_cells(
            inst,
            {t: [tuple(c) for c in cells] for t, cells in raw["new_cells"].items()},
        )
    meta = raw.get("metadata") or {}
    return SolveResult(
        status=raw.get("status", "error"),
        backend=meta.get("backend", "unknown"),
        placement=placement,
        objective=raw.get("objective"),
        bound=raw.get("bound"),
        wall_time=float(meta.get("wall_time") or 0.0),
        message=meta.get("message", ""),
    )


def _write_json(obj: Any, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


# --- Commands ----------------------------------------------------------------


def cmd_gen(args: argparse.Namespace, config: dict) -> int:
    side = SIZE_TABLE[args.size]
    inst = generate_synthetic(
        seed=args.seed,
        dims=GridDims(side, side, float(_pick(args, config, "resolution", 10.0))),
        nbs_count=int(_pick(args, config, "nbs", 4)),
        measure_count=int(_pick(args, config, "measures", 4)),
        forbidden_fraction=float(_pick(args, config, "forbidden_frac", 0.3)),
        pre_existing_fraction=float(_pick(args, config, "pre_frac", 0.07)),
    )
    save_instance(inst, args.out)
    print(f"wrote {args.out} ({inst.dims.width}x{inst.dims.height})")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, config: dict) -> int:
    inst = load_instance(args.instance)
    print(
        f"ok: {inst.dims.width}x{inst.dims.height}, "
        f"{len(inst.nbs)} NBS, {len(inst.measures)} measures"
    )
    return EXIT_OK


def cmd_kernels(args: argparse.Namespace, config: dict) -> int:
    kernel_map, fairness = kf.default_kernel_set()
    print(f"{'NBS':<4} {'measure':<10} {'size':<7} {'edge':>6} {'center':>7}")
    for t in kf.DEFAULT_NBS_IDS:
        for u in kf.DEFAULT_MEASURE_IDS:
            k = kernel_map[(u, t)]
            size, edge, center = kf.KERNEL_TABLE[(t, u)]
            print(f"{t:<4} {u:<10} {k.width}x{k.height:<5} {edge:>6} {center:>7}")
        k = fairness[t]
        size, edge, center = kf.FAIRNESS_TABLE[t]
        print(f"{t:<4} {'Fairness':<10} {k.width}x{k.height:<5} {edge:>6} {center:>7}")
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace, config: dict) -> int:
    inst = load_instance(args.instance)
    nbs_ids = args.nbs if args.nbs else None
    partition = clustering.partition_instance(
        inst,
        nbs_ids=nbs_ids,
        min_size=int(_pick(args, config, "min", clustering.DEFAULT_MIN_SIZE)),
        max_size=int(_pick(args, config, "max", clustering.DEFAULT_MAX_SIZE)),
    )
    annotated = clustering.with_clusters(inst, partition)
    save_instance(annotated, args.out)
    total = sum(len(e.clusters) for e in partition.entries.values())
    print(f"wrote {args.out} ({total} cluster(s))")
    return EXIT_OK


def cmd_build(args: argparse.Namespace, config: dict) -> int:
    inst = load_instance(args.instance)
    model = build_model(inst)
    export_interchange(model, args.out)
    assert model.n_variables == expected_variable_count(inst)
    print(f"wrote {args.out} ({model.n_variables} columns, {model.n_constraints} rows)")
    return EXIT_OK


def _solve_config(args: argparse.Namespace, config: dict) -> SolveConfig:
    return SolveConfig(
        backend=str(_pick(args, config, "backend", "external")),
        time_limit=float(_pick(args, config, "timelimit", DEFAULT_TIME_LIMIT)),
        gap=float(_pick(args, config, "gap", 0.0)),
        solver_cmd=_pick(args, config, "solver_cmd", None),
        unit_cap=int(_pick(args, config, "cap", DEFAULT_UNIT_CAP)),
        workdir=Path(args.workdir) if getattr(args, "workdir", None) else None,
    )


def cmd_solve(args: argparse.Namespace, config: dict) -> int:
    inst = load_instance(args.instance)
    result = solve(inst, _solve_config(args, config))
    print(
        f"status={result.status} objective={result.objective} "
        f"wall_time={result.wall_time:.3f}s"
    )
    if args.out:
        _write_json(_result_to_dict(result, inst), Path(args.out))
    if result.status == "error":
        return _fail("solve.error", result.message or "solver failed", EXIT_SOLVE)
    return EXIT_OK


def cmd_report(args: argparse.Namespace, config: dict) -> int:
    inst = load_instance(args.instance)
    raw = json.loads(Path(args.result).read_text(encoding="utf-8"))
    result = _result_from_dict(raw, inst)
    if result.placement is None:
        return _fail("report.no-placement", f"result status {result.status!r}", EXIT_SOLVE)
    report = analysis.build_report(inst, result)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    analysis.write_report(report, out_dir / "report.json")
    analysis.export_heatmaps(report, out_dir)
    print(f"wrote {out_dir}")
    return EXIT_OK


def _bench_one(
    seed: int, inst: Instance, backend: str, timelimit: float, cap: int, out_dir: str | None
) -> analysis.Report:
    cfg = SolveConfig(backend=backend, time_limit=timelimit, unit_cap=cap)
    result = solve(inst, cfg)
    if not result.ok:
        raise RuntimeError(f"seed {seed}: solve failed ({result.status}): {result.message}")
    report = analysis.build_report(inst, result)
    if out_dir:
        inst_dir = Path(out_dir) / f"seed_{seed}"
        inst_dir.mkdir(parents=True, exist_ok=True)
        save_instance(inst, inst_dir / "instance.json")
        _write_json(_result_to_dict(result, inst), inst_dir / "result.json")
        analysis.write_report(report, inst_dir / "report.json")
        analysis.export_heatmaps(report, inst_dir)
    return report


def cmd_bench(args: argparse.Namespace, config: dict) -> int:
    count = int(_pick(args, config, "seeds", 10))
    start = int(_pick(args, config, "start_seed", 0))
    backend = str(_pick(args, config, "backend", "external"))
    timelimit = float(_pick(args, config, "timelimit", DEFAULT_TIME_LIMIT))
    cap = int(_pick(args, config, "cap", DEFAULT_UNIT_CAP))
    jobs = int(_pick(args, config, "jobs", 1))
    out_dir = args.out_dir

    suite = desk_suite(count, start_seed=start, unit_cap=cap)
    if jobs <= 1:
        reports = [
            _bench_one(seed, inst, backend, timelimit, cap, out_dir)
            for seed, inst in suite
        ]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_bench_one, seed, inst, backend, timelimit, cap, out_dir)
                for seed, inst in suite
            ]
            reports = [f.result() for f in futures]

    stats = analysis.batch_stats(reports)
    print(json.dumps(stats, indent=2))
    if out_dir:
        _write_json(stats, Path(out_dir) / "stats.json")
    return EXIT_OK


# --- Parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbsopt",
        description="Optimal placement of nature-based solutions on urban grids.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="verbose logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--size", choices=sorted(SIZE_TABLE), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--nbs", type=int, help="number of NBS types (default 4)")
    p.add_argument("--measures", type=int, help="number of measures (default 4)")
    p.add_argument("--forbidden-frac", dest="forbidden_frac", type=float)
    p.add_argument("--pre-frac", dest="pre_frac", type=float)
    p.add_argument("--resolution", type=float, help="meters per cell side (default 10)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", help="validate an instance file")
    p.add_argument("instance")
    p.add_argument("--config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("kernels", help="print the default kernel catalog")
    p.add_argument("--config")
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("cluster", help="annotate an instance with clusters")
    p.add_argument("instance")
    p.add_argument("--out", required=True)
    p.add_argument("--nbs", nargs="*", help="NBS ids to cluster (default: UP)")
    p.add_argument("--min", type=int, help="minimum cluster size (default 5)")
    p.add_argument("--max", type=int, help="maximum cluster size (default 50)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("build", help="export the MILP as a free-format MPS file")
    p.add_argument("instance")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("solve", help="solve an instance")
    p.add_argument("instance")
    p.add_argument("--backend", choices=["oracle", "external"])
    p.add_argument("--timelimit", type=float, help="seconds (default 1800)")
    p.add_argument("--gap", type=float, help="relative MIP gap (default 0)")
    p.add_argument("--solver-cmd", dest="solver_cmd", help="command template")
    p.add_argument("--cap", type=int, help="oracle decision-unit cap (default 16)")
    p.add_argument("--workdir", help="keep model/solution files here")
    p.add_argument("--out", help="write the result JSON here")
    p.add_argument("--config")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("report", help="build report and heatmaps from a result")
    p.add_argument("instance")
    p.add_argument("result")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench", help="run a seeded desk-scale suite")
    p.add_argument("--seeds", type=int, help="number of instances (default 10)")
    p.add_argument("--start-seed", dest="start_seed", type=int)
    p.add_argument("--backend", choices=["oracle", "external"])
    p.add_argument("--timelimit", type=float)
    p.add_argument("--cap", type=int)
    p.add_argument("--jobs", type=int, help="concurrent solves (default 1)")
    p.add_argument("--out-dir", dest="out_dir", help="per-instance output root")
    p.add_argument("--config")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load_config(getattr(args, "config", None))
        return args.func(args, config)
    except SchemaError as exc:
        return _fail("instance.schema", str(exc), EXIT_VALIDATION)
    except ValidationError as exc:
        return _fail("instance.validation", str(exc), EXIT_VALIDATION)
    except InstanceError as exc:
        return _fail("instance.error", str(exc), EXIT_VALIDATION)
    except OracleCapExceeded as exc:
        return _fail("solve.cap", str(exc), EXIT_SOLVE)
    except FileNotFoundError as exc:
        return _fail("io.missing", str(exc), EXIT_IO)
    except OSError as exc:
        return _fail("io.error", str(exc), EXIT_IO)
    except json.JSONDecodeError as exc:
        return _fail("instance.schema", f"not valid JSON: {exc}", EXIT_VALIDATION)
    except RuntimeError as exc:
        return _fail("solve.error", str(exc), EXIT_SOLVE)


if __name__ == "__main__":
    sys.exit(main())
