import csv

import numpy as np
import pytest

from sparsetrig import adaptive
from sparsetrig.index_sets import hyperbolic_set
from sparsetrig.metrics import (
    ValidationSet,
    convergence_slope,
    error_metrics,
    max_error,
    rmse,
    write_study_csv,
)
from sparsetrig.models import parse_model
from sparsetrig.sparse_grid import ModelOracle, build_grid, node_coordinate, optimal_tensors


def test_validation_set_reproducible_and_inside():
    a = ValidationSet([(-1, 1), (0, 2)], seed=11)
    b = ValidationSet([(-1, 1), (0, 2)], seed=11)
    c = ValidationSet([(-1, 1), (0, 2)], seed=12)
    assert a.points.shape == (2000, 2)
    assert np.array_equal(a.points, b.points) and not np.array_equal(a.points, c.points)
    assert np.all(a.unit > 0) and np.all(a.unit < 1)
    assert np.all(a.points[:, 0] > -1) and np.all(a.points[:, 1] < 2)


def test_validation_points_avoid_nodes():
    val = ValidationSet([(0, 1)], size=50, seed=1)
    nodes = node_coordinate(np.arange(27)).reshape(-1, 1)
    val.unit[:3, 0] = nodes[[1, 5, 9], 0]
    val.avoid_nodes(nodes)
    dist = np.abs(val.unit[:, None, 0] - nodes[None, :, 0]).min(axis=1)
    assert dist.min() > 1e-12


def test_exact_space_and_zero_function():
    theta = optimal_tensors(hyperbolic_set([1, 1], 10))
    f = lambda x: np.cos(2 * np.pi * x[:, 0]) + np.sin(4 * np.pi * x[:, 1])
    oracle = ModelOracle(f, 2)
    val = ValidationSet(oracle.domain, seed=0)
    assert max_error(build_grid(theta, oracle), oracle, val) <= 1e-9
    zero = ModelOracle(lambda x: np.zeros(len(x)), 2)
    assert max_error(build_grid(theta, zero), zero, val) == 0.0


def test_rmse_bounds_and_shift_invariance():
    model = parse_model("product:1,2")
    base = model.func
    oracle = model.oracle()
    shift_oracle = ModelOracle(lambda x: base(x) + 3.0, 2, model.domain)
    theta = optimal_tensors(hyperbolic_set([1, 1], 20))
    val = ValidationSet(model.domain, seed=2)
    g1 = build_grid(theta, oracle)
    g2 = build_grid(theta, shift_oracle)
    m1 = error_metrics(g1, oracle, val)
    m2 = error_metrics(g2, shift_oracle, val)
    assert m1["rmse"] <= m1["max_error"]
    assert rmse(g2, shift_oracle, val) == pytest.approx(m1["rmse"], abs=1e-12)
    assert m2["max_error"] == pytest.approx(m1["max_error"], abs=1e-12)


def test_convergence_slope_synthetic():
    n = np.array([10, 100, 1000, 10000], dtype=float)
    assert convergence_slope(list(zip(n, n ** -2.0))) == pytest.approx(-2, abs=1e-6)
    corrected = np.log(n) ** 2 * n ** -2.0
    assert convergence_slope(list(zip(n, corrected)), log_correction=True) == pytest.approx(-2, abs=1e-6)
    with pytest.raises(ValueError):
        convergence_slope([(10, 1.0), (20, 0.0), (30, -1.0), (40, 0.1)])


def test_isotropic_error_trend():
    model = parse_model("product:1,1,1")
    oracle = model.oracle()
    val = ValidationSet(model.domain, size=500, seed=0)
    ref = oracle.evaluate_domain(val.points)
    state = adaptive.init_isotropic(3, 3, oracle, budget=4000)
    errors = []
    state = adaptive.run(state, "isotropic",
                         callback=lambda s: errors.append(max_error(s.grid, oracle, val, ref)))
    assert len(errors) >= 5
    assert errors[-1] < errors[0] / 10
    assert convergence_slope(list(zip([r["node_count"] for r in state.history], errors))) < 0


def test_study_csv(tmp_path):
    history = [
        {"iteration": 0, "node_count": 5, "max_error": 0.5, "rmse": 0.1, "alpha_used": [1.0, 1.0]},
        {"iteration": 1, "node_count": 9, "max_error": 0.25, "rmse": 0.05, "alpha_used": [1.0, 2.0]},
    ]
    path = tmp_path / "s.csv"
    write_study_csv(path, history, 2)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["iteration", "nodes", "max_error", "rmse", "alpha_1", "alpha_2"]
    assert rows[2] == ["1", "9", "0.25", "0.050000000000000003", "1", "2"]
