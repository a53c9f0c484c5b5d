from collections import Counter

import numpy as np
import pytest

from nbsopt import GridDims, generate_synthetic
from nbsopt.clustering import partition_instance, with_clusters
from nbsopt.engine import Placement
from nbsopt.instance import ObjectiveWeights
from nbsopt.model import (
    InfeasiblePlacement,
    big_m_values,
    build_model,
    check_placement,
    clamp_witness,
    evaluate_solution,
    expected_variable_count,
    linearization_big_m,
    objective_normalizers,
)
from nbsopt.solve import solve_oracle

from _helpers import constraint_residuals, make_instance, variable_vector


class TestModelShape:
    def test_one_by_one_counts(self):
        inst = make_instance(np.array([[10.0]]), kernel=None)
        model = build_model(inst)
        assert model.n_variables == 7
        assert model.n_constraints == 12
        tags = Counter(c.tag for c in model.constraints)
        assert tags == {
            "one_type": 1, "budget": 1, "conv": 1, "bigm": 6,
            "peak": 1, "avg": 1, "fairness": 1,
        }

    def test_two_by_two_two_types_counts(self):
        inst = generate_synthetic(0, GridDims(2, 2), nbs_count=2, measure_count=1,
                                  forbidden_fraction=0.0, pre_existing_fraction=0.0)
        model = build_model(inst)
        kinds = Counter(model.variable_kinds)
        assert kinds["x"] == 8 and kinds["y"] == 4
        assert sum(model.is_integer[k] for k, kind in enumerate(model.variable_kinds)
                   if kind == "x") == 8
        tags = Counter(c.tag for c in model.constraints)
        assert tags["conv"] == 4
        assert tags["bigm"] == 24

    @pytest.mark.parametrize("seed", [0, 3])
    def test_variable_count_closed_form(self, seed):
        inst = generate_synthetic(seed, GridDims(7, 6), nbs_count=4, measure_count=3,
                                  forbidden_fraction=0.5, pre_existing_fraction=0.05)
        inst = with_clusters(inst, partition_instance(inst, ["UP", "ST"]))
        model = build_model(inst)
        assert model.n_variables == expected_variable_count(inst)

    def test_forbidden_and_pre_existing_rows(self):
        inst = make_instance(np.ones((2, 2)), forbidden={(0, 0)}, pre_existing={(1, 1)})
        model = build_model(inst)
        tags = Counter(c.tag for c in model.constraints)
        assert tags["forbidden"] == 1 and tags["pre_existing"] == 1

    def test_variable_name_scheme(self):
        inst = make_instance(np.ones((2, 3)))
        model = build_model(inst)
        layout = model.layout
        assert model.variable_names[layout.x(0, 1, 2)] == "x_t0_i1_j2"
        assert model.variable_names[layout.zbar(0, 0, 1)] == "zbar_u0_i0_j1"
        assert model.variable_names[layout.zmax(0)] == "zmax_u0"
        assert model.variable_names[layout.f(1, 0)] == "f_i1_j0"


class TestNormalizers:
    def test_peak_scale_is_inverse_field_max(self):
        field = np.full((3, 3), 1.0)
        field[1, 1] = 35.6
        norms = objective_normalizers(make_instance(field))
        assert norms.peak_scale["M"] == 1.0 / 35.6

    def test_zero_field_scale_falls_back_to_one(self):
        norms = objective_normalizers(make_instance(np.zeros((2, 2))))
        assert norms.peak_scale["M"] == 1.0

    def test_zero_budget_cost_scale_one_and_term_zero(self):
        inst = make_instance(np.ones((2, 2)), budget=0.0)
        norms = objective_normalizers(inst)
        assert norms.cost_scale == 1.0
        breakdown = evaluate_solution(inst, Placement.do_nothing(inst), norms)
        assert breakdown.cost_term == 0.0

    def test_degenerate_fairness_scale(self):
        all_cells = {(i, j) for i in range(2) for j in range(2)}
        inst = make_instance(np.ones((2, 2)), forbidden=all_cells)
        norms = objective_normalizers(inst)
        assert norms.fairness_min == norms.fairness_max == 0.0
        assert norms.fairness_scale == 1.0

    def test_fairness_bounds_order(self):
        inst = generate_synthetic(5, GridDims(5, 5), nbs_count=2, measure_count=1,
                                  forbidden_fraction=0.3, pre_existing_fraction=0.1)
        norms = objective_normalizers(inst)
        assert norms.fairness_max >= norms.fairness_min >= 0.0


class TestBigM:
    def test_linearization_big_m_covers_delta(self):
        # tiny kernels with a large field: delta exceeds the impact bound
        inst = make_instance(np.full((3, 3), 100.0))
        assert big_m_values(inst)["M"] == 10.0
        assert linearization_big_m(inst)["M"] == 20.0  # delta = 0.2 * 100

    def test_clamp_witness_residuals(self):
        for z, delta in [(0.0, 2.0), (1.5, 2.0), (2.0, 2.0), (5.0, 2.0)]:
            y, zbar, residual = clamp_witness(z, delta, big_m=max(10.0, delta))
            assert zbar == min(z, delta)
            assert residual <= 1e-12
            assert y == (1 if z <= delta else 0)


class TestEvaluateSolution:
    def test_do_nothing_breakdown(self):
        inst = generate_synthetic(2, GridDims(4, 4), nbs_count=2, measure_count=2,
                                  forbidden_fraction=0.3, pre_existing_fraction=0.1)
        norms = objective_normalizers(inst)
        breakdown = evaluate_solution(inst, Placement.do_nothing(inst), norms)
        assert breakdown.cost_value == 0.0 and breakdown.cost_term == 0.0
        for u in inst.measures:
            assert breakdown.peak_value[u.id] == pytest.approx(float(u.field.max()))
        assert breakdown.fairness_value == pytest.approx(norms.fairness_min)
        assert breakdown.fairness_term == pytest.approx(0.0, abs=1e-15)

    def test_budget_violation_named(self):
        inst = make_instance(np.ones((2, 2)), cost=100.0, budget=150.0)
        placement = Placement.from_new_cells(inst, {"GW": [(0, 0), (0, 1)]})
        violations = check_placement(inst, placement)
        assert [v.family for v in violations] == ["budget"]
        with pytest.raises(InfeasiblePlacement) as exc:
            evaluate_solution(inst, placement)
        assert "budget" in str(exc.value)

    def test_one_type_violation(self):
        inst = generate_synthetic(1, GridDims(2, 2), nbs_count=2, measure_count=1,
                                  forbidden_fraction=0.0, pre_existing_fraction=0.0)
        placement = Placement.empty(inst)
        placement.masks["GW"][0, 0] = True
        placement.masks["GR"][0, 0] = True
        families = {v.family for v in check_placement(inst, placement)}
        assert "one_type" in families

    def test_forbidden_and_pre_existing_violations(self):
        inst = make_instance(np.ones((2, 2)), forbidden={(0, 0)}, pre_existing={(1, 1)})
        placement = Placement.empty(inst)  # drops the pre-existing cell
        placement.masks["GW"][0, 0] = True
        families = {v.family for v in check_placement(inst, placement)}
        assert families == {"forbidden", "pre_existing"}

    def test_partial_cluster_violation(self):
        from nbsopt.suite import cluster_demo_instance

        inst = cluster_demo_instance()
        cluster = inst.clusters["UP"][0]
        placement = Placement.do_nothing(inst)
        placement.masks["UP"][cluster[0]] = True  # only one cell of the cluster
        families = [v.family for v in check_placement(inst, placement)]
        assert families == ["cluster"]

    def test_matches_milp_objective_at_random_points(self):
        rng = np.random.default_rng(30)
        inst = generate_synthetic(9, GridDims(4, 4), nbs_count=2, measure_count=2,
                                  forbidden_fraction=0.4, pre_existing_fraction=0.1)
        model = build_model(inst)
        norms = objective_normalizers(inst)
        for _ in range(10):
            placement = Placement.do_nothing(inst)
            cost = 0.0
            for t in inst.nbs_ids:
                eligible = np.argwhere(inst.eligible_mask(t))
                for i, j in eligible:
                    occupied = any(placement.masks[s][i, j] for s in inst.nbs_ids)
                    unit_cost = inst.nbs_by_id(t).cost
                    if not occupied and rng.random() < 0.3 and cost + unit_cost <= inst.budget:
                        placement.masks[t][i, j] = True
                        cost += unit_cost
            vals = variable_vector(inst, model, placement)
            assert constraint_residuals(model, vals) <= 1e-9
            breakdown = evaluate_solution(inst, placement, norms)
            assert model.objective_value(vals) == pytest.approx(breakdown.total, abs=1e-9)


class TestAllForbidden:
    def test_only_feasible_point_is_do_nothing(self):
        inst = generate_synthetic(4, GridDims(3, 3), nbs_count=2, measure_count=1,
                                  forbidden_fraction=1.0, pre_existing_fraction=0.0)
        result = solve_oracle(inst)
        assert result.status == "optimal"
        do_nothing = evaluate_solution(inst, Placement.do_nothing(inst))
        assert result.objective == pytest.approx(do_nothing.total, abs=1e-12)
        for t in inst.nbs_ids:
            assert result.placement.new_mask(inst, t).sum() == 0


class TestPureFairnessWeights:
    def test_fairness_only_objective_maximizes_fairness(self):
        inst = generate_synthetic(6, GridDims(4, 4), nbs_count=1, measure_count=1,
                                  forbidden_fraction=0.5, pre_existing_fraction=0.1)
        inst.weights = ObjectiveWeights(
            peak={u: 0.0 for u in inst.measure_ids},
            avg={u: 0.0 for u in inst.measure_ids},
            cost=0.0,
            fairness=1.0,
        )
        result = solve_oracle(inst, unit_cap=20)
        norms = objective_normalizers(inst)
        assert result.breakdown.fairness_value >= norms.fairness_min - 1e-9
