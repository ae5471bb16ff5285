import numpy as np
import pytest

from sparsetrig.tensor_rule import (
    dft_coefficients,
    dft_direct,
    fft3,
    tensor_eval,
    tensor_nodes,
    tensor_shape,
)
from sparsetrig.trig_basis import basis_eval


@pytest.mark.parametrize("n", [1, 3, 9, 27, 81])
def test_fft3_matches_direct(n, rng):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    assert np.allclose(fft3(x), dft_direct(x), rtol=0, atol=1e-11 * max(1, np.abs(x).sum()))


def test_fft3_matches_numpy(rng):
    x = rng.normal(size=(4, 27))
    assert np.allclose(fft3(x, axis=1), np.fft.fft(x, axis=1))


def test_fft3_rejects_non_power_of_three():
    with pytest.raises(ValueError):
        fft3(np.ones(6))


def test_tensor_nodes_layout():
    nodes = tensor_nodes((1, 0))
    assert tensor_shape((1, 0)) == (3, 1)
    assert np.allclose(nodes, [[0, 0], [1 / 3, 0], [2 / 3, 0]])


def test_single_mode_coefficients():
    # samples of exp(2 pi i sigma(nu) x) must give the unit vector at nu
    m = 9
    x = tensor_nodes((2,))[:, 0]
    for nu in range(m):
        c = dft_coefficients((2,), basis_eval(nu, x).real)
        # real part only: label nu and its conjugate partner share the weight
        expected = np.zeros(m, dtype=complex)
        partner = nu if nu == 0 else (nu + 1 if nu % 2 else nu - 1)
        expected[nu] += 0.5
        expected[partner] += 0.5
        assert np.allclose(c, expected, atol=1e-14)


def test_interpolates_at_nodes(rng):
    level = (2, 1, 1)
    values = rng.normal(size=tensor_shape(level))
    c = dft_coefficients(level, values)
    nodes = tensor_nodes(level)
    assert np.allclose(tensor_eval(c, nodes), values.reshape(-1), atol=1e-12)


def test_dict_samples_and_missing_node(rng):
    level = (1, 1)
    values = rng.normal(size=(3, 3))
    as_dict = {j: values[j] for j in np.ndindex(3, 3)}
    assert np.allclose(dft_coefficients(level, as_dict), dft_coefficients(level, values))
    del as_dict[(2, 1)]
    with pytest.raises(KeyError):
        dft_coefficients(level, as_dict)
    with pytest.raises(ValueError):
        dft_coefficients(level, np.ones(4))


def test_transform_argument_is_used(rng):
    values = rng.normal(size=(9, 3))
    fast = dft_coefficients((2, 1), values)
    slow = dft_coefficients((2, 1), values, transform=dft_direct)
    assert np.allclose(fast, slow, atol=1e-13)
