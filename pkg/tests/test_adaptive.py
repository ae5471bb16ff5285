import numpy as np
import pytest

from sparsetrig import adaptive
from sparsetrig.adaptive import (
    BudgetError,
    init_isotropic,
    level_value,
    next_level,
    refine_once,
    run,
    run_full_tensor,
)
from sparsetrig.index_sets import LowerSet, hyperbolic_set, is_lower, total_degree_set
from sparsetrig.models import parse_model
from sparsetrig.sparse_grid import ModelOracle, OracleError, node_set, optimal_tensors


def smooth_oracle(d):
    return ModelOracle(lambda x: np.exp(np.sin(2 * np.pi * x).sum(axis=1)), d)


def test_init_examples():
    s1 = init_isotropic(1, 3, smooth_oracle(1))
    assert s1.lam.sorted() == [(0,), (1,), (2,)] and s1.node_count == 3
    s2 = init_isotropic(2, 3, smooth_oracle(2))
    assert len(s2.lam) == 5 and s2.node_count == 5
    s3 = init_isotropic(3, 2, smooth_oracle(3))
    assert s3.lam.sorted() == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0)]
    assert s3.node_count == 7


def test_init_errors():
    with pytest.raises(ValueError):
        init_isotropic(2, 1.5, smooth_oracle(2))
    calls = []
    oracle = ModelOracle(lambda x: calls.append(1) or np.zeros(len(x)), 2)
    with pytest.raises(BudgetError, match="4.*5|5.*4"):
        init_isotropic(2, 3, oracle, budget=4)
    assert not calls


def test_next_level_examples():
    L, delta = next_level(LowerSet([(0,)]), [1.0])
    assert delta.sorted() == [(1,)] and L == pytest.approx(2.0)
    lam = hyperbolic_set([1, 1], 3)
    L, delta = next_level(lam, [1.0, 2.0])
    # candidates (3,0): 4, (1,1): 2*2**2 = 8, (0,3): 16
    assert delta.sorted() == [(3, 0)] and L == pytest.approx(4.0)


def test_next_level_ties_added_together():
    lam = hyperbolic_set([1, 1], 3)
    L, delta = next_level(lam, [1.0, 1.0])
    # (1,1) also scores 2 * 2 = 4
    assert delta.sorted() == [(0, 3), (1, 1), (3, 0)] and L == pytest.approx(4.0)


def test_level_value_spaces():
    assert level_value((1, 2), [1, 2], "hyperbolic") == pytest.approx(np.log(2 * 9))
    assert level_value((1, 2), [1, 2], "total_degree") == pytest.approx(5)


def test_refine_once_at_budget_is_a_stop():
    state = init_isotropic(2, 3, smooth_oracle(2), budget=5)
    after = refine_once(state)
    assert after.stopped and after.grid is state.grid and after.history == []


def test_budget_zero_iterations():
    state = run(init_isotropic(2, 3, smooth_oracle(2), budget=5))
    assert state.history == [] and state.node_count == 5


def test_one_dimensional_alpha_normalized():
    oracle = parse_model("product:2").oracle()
    state = run(init_isotropic(1, 3, oracle, budget=300))
    assert state.history
    for rec in state.history[1:]:
        assert rec["alpha_used"] == [1.0]


def test_invariants_along_run():
    oracle = parse_model("product:1,3").oracle()
    state = init_isotropic(2, 3, oracle, budget=3000)
    counts = [state.node_count]
    previous = state.lam
    while True:
        state = refine_once(state)
        if state.stopped:
            break
        counts.append(state.node_count)
        assert previous.issubset(state.lam)
        assert is_lower(state.lam) and is_lower(state.grid.theta)
        assert optimal_tensors(state.lam).issubset(state.grid.theta)
        previous = state.lam
    assert all(b > a for a, b in zip(counts, counts[1:]))
    assert counts[-1] <= 3000
    rec = state.history[-1]
    assert {"iteration", "node_count", "alpha_used", "alpha_raw", "L_used"} <= set(rec)


def test_analytic_matches_batch_construction():
    alpha = [1.0, 1.7]
    oracle = smooth_oracle(2)
    state = run(init_isotropic(2, 3, oracle, budget=2000), "analytic", alpha)
    levels = [rec["L_used"] for rec in state.history]
    assert all(b > a for a, b in zip(levels, levels[1:]))
    last = state.history[-1]["L_used"]
    batch = hyperbolic_set(alpha, last)
    lam = LowerSet(state.lam.as_frozenset() | hyperbolic_set([1, 1], 3).as_frozenset(), dim=2)
    assert batch.as_frozenset() | hyperbolic_set([1, 1], 3).as_frozenset() == lam.as_frozenset()
    assert node_set(state.grid.theta) == node_set(optimal_tensors(lam))


def test_analytic_unit_alpha_equals_isotropic():
    a = run(init_isotropic(2, 3, smooth_oracle(2), budget=800), "analytic", [1.0, 1.0])
    b = run(init_isotropic(2, 3, smooth_oracle(2), budget=800), "isotropic")
    assert [r["node_count"] for r in a.history] == [r["node_count"] for r in b.history]
    assert [r["L_used"] for r in a.history] == [r["L_used"] for r in b.history]


def test_total_degree_space_runs():
    state = run(init_isotropic(2, 3, smooth_oracle(2), "total_degree", budget=500), "isotropic")
    assert state.lam == total_degree_set([1, 1], state.history[-1]["L_used"]) or is_lower(state.lam)
    assert state.node_count <= 500


def test_h1_h5_prefers_first_dimension():
    oracle = parse_model("product:1,5").oracle()
    state = run(init_isotropic(2, 3, oracle, budget=2000))
    raw = [r["alpha_raw"] for r in state.history if r["alpha_raw"]]
    assert raw and raw[-1][0] / raw[-1][1] < 1


def test_min_new_nodes_batches():
    state = init_isotropic(2, 3, smooth_oracle(2), budget=5000)
    after = refine_once(state, "isotropic", min_new_nodes=100)
    assert after.node_count - state.node_count >= 100


def test_underdetermined_fit_falls_back_with_warning():
    oracle = parse_model("product:2,5").oracle()
    state = refine_once(init_isotropic(2, 3, oracle, budget=1000))
    assert state.history[0]["alpha_used"] == [1.0, 1.0]
    assert "warning" in state.history[0]


def test_oracle_failure_keeps_state():
    def flaky(x):
        if len(x) > 4:
            raise OracleError("boom", x)
        return np.zeros(len(x))

    state = init_isotropic(1, 3, ModelOracle(lambda x: np.zeros(len(x)), 1), budget=100)
    state.oracle = ModelOracle(flaky, 1)
    with pytest.raises(OracleError):
        refine_once(state, "isotropic", min_new_nodes=10)
    assert state.node_count == 3 and state.history == []


def test_callback_merges_into_history():
    state = run(init_isotropic(2, 3, smooth_oracle(2), budget=200), "isotropic",
                callback=lambda s: {"extra": s.node_count})
    assert all(r["extra"] == r["node_count"] for r in state.history)


def test_full_tensor_ladder():
    grid, history = run_full_tensor(2, smooth_oracle(2), 1000)
    assert [r["node_count"] for r in history] == [9, 81, 729]
    assert grid.num_nodes == 729
