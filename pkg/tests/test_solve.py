import itertools
import shlex
import sys

import numpy as np
import pytest

from nbsopt import GridDims, generate_synthetic
from nbsopt.engine import Placement
from nbsopt.model import build_model, check_placement, evaluate_solution
from nbsopt.solve import (
    OracleCapExceeded,
    SolveConfig,
    count_decision_units,
    parse_solution_file,
    solve,
    solve_external,
    solve_oracle,
    values_close,
)
from nbsopt.suite import cluster_demo_instance

from _helpers import make_instance

EXTERNAL = SolveConfig(backend="external", time_limit=60.0)


class TestDecisionUnits:
    def test_zero_units_all_forbidden(self):
        all_cells = {(i, j) for i in range(3) for j in range(3)}
        inst = make_instance(np.ones((3, 3)), forbidden=all_cells)
        assert count_decision_units(inst) == 0

    def test_counts_cells_times_types(self):
        inst = generate_synthetic(0, GridDims(2, 2), nbs_count=2, measure_count=1,
                                  forbidden_fraction=0.0, pre_existing_fraction=0.0)
        assert count_decision_units(inst) == 8

    def test_cluster_counts_as_one_unit(self):
        inst = cluster_demo_instance()
        assert count_decision_units(inst) == 3


class TestOracle:
    def test_zero_units_returns_do_nothing(self):
        all_cells = {(i, j) for i in range(2) for j in range(2)}
        inst = make_instance(np.ones((2, 2)), forbidden=all_cells - {(0, 1)},
                             pre_existing={(0, 1)})
        result = solve_oracle(inst)
        assert result.status == "optimal"
        assert result.placement.new_cells(inst) == {"GW": []}
        do_nothing = evaluate_solution(inst, Placement.do_nothing(inst))
        assert result.objective == pytest.approx(do_nothing.total, abs=1e-12)

    def test_two_free_cells_matches_explicit_enumeration(self):
        field = np.array([[9.0, 1.0], [2.0, 8.0]])
        all_cells = {(i, j) for i in range(2) for j in range(2)}
        free = [(0, 0), (1, 1)]
        inst = make_instance(field, forbidden=all_cells - set(free), cost=10.0,
                             budget=15.0)
        # brute force over the four subsets, skipping budget-infeasible ones
        best = None
        for chosen in itertools.chain.from_iterable(
            itertools.combinations(free, k) for k in range(3)
        ):
            if len(chosen) * 10.0 > 15.0:
                continue
            value = evaluate_solution(
                inst, Placement.from_new_cells(inst, {"GW": list(chosen)})
            ).total
            if best is None or value < best[0]:
                best = (value, set(chosen))
        result = solve_oracle(inst)
        assert result.objective == pytest.approx(best[0], abs=1e-12)
        assert set(result.placement.new_cells(inst)["GW"]) == best[1]

    def test_cap_exceeded_raises(self):
        inst = generate_synthetic(0, GridDims(3, 3), nbs_count=2, measure_count=1,
                                  forbidden_fraction=0.0, pre_existing_fraction=0.0)
        with pytest.raises(OracleCapExceeded):
            solve_oracle(inst, unit_cap=16)

    def test_deterministic_repeat(self):
        inst = generate_synthetic(5, GridDims(4, 4), nbs_count=2, measure_count=1,
                                  forbidden_fraction=0.6, pre_existing_fraction=0.05)
        a = solve_oracle(inst)
        b = solve_oracle(inst)
        assert a.objective == b.objective
        for t in inst.nbs_ids:
            np.testing.assert_array_equal(a.placement.masks[t], b.placement.masks[t])

    def test_returned_placement_passes_checker(self):
        for seed in range(4):
            inst = generate_synthetic(seed, GridDims(4, 4), nbs_count=2, measure_count=2,
                                      forbidden_fraction=0.6, pre_existing_fraction=0.1)
            result = solve_oracle(inst, unit_cap=20)
            assert check_placement(inst, result.placement) == []

    def test_oracle_optimum_satisfies_milp_rows(self):
        # the oracle never touches the linearization, so embedding its answer
        # back into the model (with the witness y) must satisfy every row
        from _helpers import constraint_residuals, variable_vector

        for seed in (2, 7):
            inst = generate_synthetic(seed, GridDims(4, 4), nbs_count=2, measure_count=1,
                                      forbidden_fraction=0.6, pre_existing_fraction=0.1)
            model = build_model(inst)
            result = solve_oracle(inst, unit_cap=20)
            vals = variable_vector(inst, model, result.placement)
            assert constraint_residuals(model, vals) <= 1e-9


class TestExternal:
    def test_matches_oracle_on_three_by_three(self):
        inst = generate_synthetic(12, GridDims(3, 3), nbs_count=2, measure_count=1,
                                  forbidden_fraction=0.45, pre_existing_fraction=0.05)
        assert count_decision_units(inst) <= 16
        a = solve_oracle(inst)
        b = solve_external(inst, EXTERNAL)
        assert b.status == "optimal"
        assert values_close(a.objective, b.objective)

    def test_cluster_all_or_nothing_respected(self):
        inst = cluster_demo_instance()
        result = solve_external(inst, EXTERNAL)
        assert result.status == "optimal"
        cluster = inst.clusters["UP"][0]
        values = {bool(result.placement.masks["UP"][c]) for c in cluster}
        assert len(values) == 1
        assert check_placement(inst, result.placement) == []

    def test_short_time_limit_never_errors(self):
        inst = generate_synthetic(3, GridDims(30, 30), nbs_count=2, measure_count=1,
                                  forbidden_fraction=0.3, pre_existing_fraction=0.05)
        result = solve_external(inst, SolveConfig(backend="external", time_limit=1.0))
        assert result.status in ("optimal", "feasible-timeout")
        assert result.placement is not None
        assert check_placement(inst, result.placement) == []

    def test_all_forbidden_zero_budget(self):
        inst = generate_synthetic(1, GridDims(3, 3), nbs_count=1, measure_count=1,
                                  forbidden_fraction=1.0, pre_existing_fraction=0.0)
        inst.budget = 0.0
        result = solve_external(inst, EXTERNAL)
        assert result.status == "optimal"
        assert result.placement.new_cells(inst) == {"GW": []}

    def test_workdir_keeps_files(self, tmp_path):
        inst = generate_synthetic(2, GridDims(3, 3), nbs_count=1, measure_count=1,
                                  forbidden_fraction=0.7, pre_existing_fraction=0.0)
        cfg = SolveConfig(backend="external", time_limit=60, workdir=tmp_path / "w")
        result = solve_external(inst, cfg)
        assert result.status == "optimal"
        assert (tmp_path / "w" / "model.mps").exists()
        assert (tmp_path / "w" / "solution.sol").exists()

    def test_solve_dispatch(self):
        inst = generate_synthetic(4, GridDims(3, 3), nbs_count=1, measure_count=1,
                                  forbidden_fraction=0.8, pre_existing_fraction=0.0)
        assert solve(inst, SolveConfig(backend="oracle")).status == "optimal"
        with pytest.raises(ValueError):
            solve(inst, SolveConfig(backend="nope"))


class TestSolutionParsing:
    def test_metadata_and_values(self, tmp_path):
        p = tmp_path / "s.sol"
        p.write_text(
            "# solver test\n# status optimal\n# objective 1.5\n\n"
            "x_t0_i0_j0 1.0\nweird line with stuff\nbad value notanumber\n"
        )
        meta, values = parse_solution_file(p)
        assert meta["status"] == "optimal"
        assert values == {"x_t0_i0_j0": 1.0}

    def test_unknown_variable_names_ignored_with_warning(self, tmp_path, caplog):
        inst = generate_synthetic(6, GridDims(2, 2), nbs_count=1, measure_count=1,
                                  forbidden_fraction=0.5, pre_existing_fraction=0.0)
        model = build_model(inst)
        from nbsopt.solve import placement_from_values

        with caplog.at_level("WARNING"):
            placement = placement_from_values(inst, model, {"mystery_var": 1.0})
        assert "mystery_var" in caplog.text
        assert all(not placement.masks[t].any() for t in inst.nbs_ids)


class FakeSolverScript:
    """Writes a solver stub script that emits a fixed solution file."""

    def __init__(self, tmp_path, body: str):
        self.path = tmp_path / "fake_solver.py"
        self.path.write_text(
            "import sys\n"
            "model, solution, timelimit = sys.argv[1:4]\n"
            f"open(solution, 'w').write({body!r})\n"
        )

    def template(self) -> str:
        return f"{shlex.quote(sys.executable)} {shlex.quote(str(self.path))} {{model}} {{solution}} {{timelimit}}"


class TestExternalContract:
    def make_inst(self):
        return generate_synthetic(8, GridDims(2, 2), nbs_count=1, measure_count=1,
                                  forbidden_fraction=0.5, pre_existing_fraction=0.0)

    def test_objective_mismatch_is_an_error(self, tmp_path):
        inst = self.make_inst()
        fake = FakeSolverScript(
            tmp_path, "# status optimal\n# objective 999.0\nx_t0_i0_j0 0.0\n"
        )
        cfg = SolveConfig(backend="external", time_limit=10, solver_cmd=fake.template())
        result = solve_external(inst, cfg)
        assert result.status == "error"
        assert "mismatch" in result.message

    def test_infeasible_status_propagates(self, tmp_path):
        inst = self.make_inst()
        fake = FakeSolverScript(tmp_path, "# status infeasible\n")
        cfg = SolveConfig(backend="external", time_limit=10, solver_cmd=fake.template())
        result = solve_external(inst, cfg)
        assert result.status == "infeasible"
        assert result.placement is None

    def test_no_incumbent_falls_back_to_do_nothing(self, tmp_path):
        inst = self.make_inst()
        fake = FakeSolverScript(tmp_path, "# status no-incumbent\n# bound 0.0\n")
        cfg = SolveConfig(backend="external", time_limit=10, solver_cmd=fake.template())
        result = solve_external(inst, cfg)
        assert result.status == "feasible-timeout"
        assert result.placement is not None
        assert result.placement.new_cells(inst) == {"GW": []}

    def test_violating_solution_is_an_error(self, tmp_path):
        inst = self.make_inst()
        forbidden = sorted(inst.masks.forbidden["GW"])
        assert forbidden, "seed must produce at least one forbidden cell"
        i, j = forbidden[0]
        fake = FakeSolverScript(
            tmp_path, f"# status optimal\n# objective 0.0\nx_t0_i{i}_j{j} 1.0\n"
        )
        cfg = SolveConfig(backend="external", time_limit=10, solver_cmd=fake.template())
        result = solve_external(inst, cfg)
        assert result.status == "error"
        assert "forbidden" in result.message

    def test_env_var_supplies_template(self, tmp_path, monkeypatch):
        inst = self.make_inst()
        fake = FakeSolverScript(tmp_path, "# status infeasible\n")
        monkeypatch.setenv("NBSOPT_SOLVER_CMD", fake.template())
        result = solve_external(inst, SolveConfig(backend="external", time_limit=10))
        assert result.status == "infeasible"

    def test_solver_crash_is_an_error(self, tmp_path):
        inst = self.make_inst()
        bad = tmp_path / "crash.py"
        bad.write_text("import sys; sys.exit(3)\n")
        cfg = SolveConfig(
            backend="external", time_limit=10,
            solver_cmd=f"{shlex.quote(sys.executable)} {shlex.quote(str(bad))} {{model}} {{solution}} {{timelimit}}",
        )
        result = solve_external(inst, cfg)
        assert result.status == "error"
        assert "exited with 3" in result.message


class TestSolverCli:
    def test_infeasible_model_reported(self, tmp_path):
        from nbsopt import solver_cli

        mps = tmp_path / "bad.mps"
        mps.write_text(
            "NAME bad\nROWS\n N obj\n G lower\n L upper\nCOLUMNS\n"
            " x obj 1.0\n x lower 1.0\n x upper 1.0\n"
            "RHS\n rhs lower 1.0\n rhs upper 0.0\nBOUNDS\n UP bnd x 5.0\nENDATA\n"
        )
        out = tmp_path / "bad.sol"
        assert solver_cli.main([str(mps), str(out), "10"]) == 0
        meta, values = parse_solution_file(out)
        assert meta["status"] == "infeasible"
        assert values == {}

    def test_reports_objective_with_constant(self, tmp_path):
        from nbsopt import solver_cli

        inst = generate_synthetic(9, GridDims(2, 2), nbs_count=1, measure_count=1,
                                  forbidden_fraction=0.5, pre_existing_fraction=0.0)
        model = build_model(inst)
        from nbsopt.mps import export_interchange

        mps = tmp_path / "m.mps"
        export_interchange(model, mps)
        out = tmp_path / "m.sol"
        assert solver_cli.main([str(mps), str(out), "30"]) == 0
        meta, values = parse_solution_file(out)
        assert meta["status"] == "optimal"
        vals = np.zeros(model.n_variables)
        for name, v in values.items():
            vals[model.index_of(name)] = v
        assert float(meta["objective"]) == pytest.approx(
            model.objective_value(vals), abs=1e-9
        )
