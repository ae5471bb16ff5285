import numpy as np
import pytest

from sparsetrig.trig_basis import basis_eval, basis_table, nodes_1d, points_at_level, sigma


def test_sigma_first_labels():
    assert [sigma(n) for n in range(7)] == [0, 1, -1, 2, -2, 3, -3]


def test_sigma_array_matches_scalar():
    nu = np.arange(50)
    assert sigma(nu).tolist() == [sigma(int(n)) for n in nu]


def test_sigma_is_a_bijection_onto_a_symmetric_range():
    # labels 0..2n cover every frequency -n..n exactly once
    for n in range(6):
        freqs = sorted(int(s) for s in sigma(np.arange(2 * n + 1)))
        assert freqs == list(range(-n, n + 1))


def test_sigma_rejects_negative():
    with pytest.raises(ValueError):
        sigma(-1)


def test_points_at_level():
    assert [points_at_level(l) for l in range(5)] == [1, 3, 9, 27, 81]
    with pytest.raises(ValueError):
        points_at_level(-1)


def test_nodes_1d():
    assert np.allclose(nodes_1d(3), [0, 1 / 3, 2 / 3])
    assert nodes_1d(1).tolist() == [0.0]
    for bad in (0, 2, 4):
        with pytest.raises(ValueError):
            nodes_1d(bad)


def test_nodes_are_nested():
    coarse = nodes_1d(9)
    fine = nodes_1d(27)
    assert np.allclose(fine[::3], coarse)


def test_basis_table_matches_basis_eval():
    x = np.linspace(0, 1, 11)
    table = basis_table(6, x)
    assert table.shape == (11, 7)
    for nu in range(7):
        assert np.allclose(table[:, nu], basis_eval(nu, x))


def test_basis_orthonormal_on_nodes():
    m = 9
    x = nodes_1d(m)
    table = basis_table(m - 1, x)
    gram = table.conj().T @ table / m
    assert np.allclose(gram, np.eye(m), atol=1e-13)
