"""Fully tensorized trigonometric interpolation on ``3**i_k``-point grids.

Coefficients are stored as a dense complex array whose axis ``k`` is indexed
by the basis label ``j_k = 0..m_k-1`` (not by natural DFT frequency order);
the permutation happens once, in :func:`dft_coefficients`.
"""

import itertools

import numpy as np

from .trig_basis import basis_table, nodes_1d, points_at_level, sigma


def fft3(x, axis=-1):
    """Unnormalized forward DFT ``X_k = sum_p x_p exp(-2 pi i k p / n)``.

    Recursive radix-3 decimation in time; ``x.shape[axis]`` must be a power
    of three. Batched over all other axes.
    """
    x = np.moveaxis(np.asarray(x, dtype=complex), axis, -1)
    n = x.shape[-1]
    m = n
    while m > 1 and m % 3 == 0:
        m //= 3
    if m != 1:
        raise ValueError(f"radix-3 transform needs a power of three, got length {n}")
    return np.moveaxis(_fft3_last(x), -1, axis)


def _fft3_last(x):
    n = x.shape[-1]
    if n == 1:
        return x.copy()
    third = n // 3
    a = _fft3_last(x[..., 0::3])
    b = _fft3_last(x[..., 1::3])
    c = _fft3_last(x[..., 2::3])
    k = np.arange(third)
    tw1 = np.exp(-2j * np.pi * k / n)
    tw2 = tw1 * tw1
    b = b * tw1
    c = c * tw2
    # cube roots of unity
    w = np.exp(-2j * np.pi / 3)
    out = np.empty(x.shape, dtype=complex)
    out[..., :third] = a + b + c
    out[..., third:2 * third] = a + w * b + w * w * c
    out[..., 2 * third:] = a + w * w * b + w * c
    return out


def dft_direct(x, axis=-1):
    """O(n^2) reference DFT with the same convention as :func:`fft3`."""
    x = np.moveaxis(np.asarray(x, dtype=complex), axis, -1)
    n = x.shape[-1]
    p = np.arange(n)
    mat = np.exp(-2j * np.pi * np.outer(p, p) / n)
    return np.moveaxis(x @ mat.T, -1, axis)


def tensor_shape(level_index):
    return tuple(points_at_level(l) for l in level_index)


def tensor_nodes(level_index):
    """Nodes of the tensor grid, shape ``(prod m, d)``, lexicographic in ``j``."""
    axes = [nodes_1d(m) for m in tensor_shape(level_index)]
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(axes))


def _label_permutation(m):
    # natural DFT bin holding basis label j
    return np.mod(sigma(np.arange(m)), m)


def dft_coefficients(level_index, samples, transform=fft3):
    """Interpolation coefficients of one tensor.

    ``samples`` is either an array of shape ``tensor_shape(level_index)`` or a
    mapping from node multi-index to value. Returns the complex coefficient
    array indexed by basis labels.
    """
    shape = tensor_shape(level_index)
    if isinstance(samples, dict):
        values = np.empty(shape)
        for j in np.ndindex(*shape):
            if j not in samples:
                raise KeyError(f"missing sample for node index {j} of tensor {tuple(level_index)}")
            values[j] = samples[j]
    else:
        values = np.asarray(samples, dtype=float)
        if values.size != int(np.prod(shape)):
            raise ValueError(
                f"tensor {tuple(level_index)} needs {int(np.prod(shape))} samples, got {values.size}")
        values = values.reshape(shape)
    coeffs = values.astype(complex)
    for axis, m in enumerate(shape):
        if m == 1:
            continue
        coeffs = transform(coeffs, axis=axis) / m
        coeffs = np.take(coeffs, _label_permutation(m), axis=axis)
    return coeffs


def tensor_eval(coeffs, x, real=True):
    """Evaluate ``sum_j c_j phi_j(x)`` at points ``x`` of shape ``(n, d)``."""
    coeffs = np.asarray(coeffs)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != coeffs.ndim:
        raise ValueError(f"points have dimension {x.shape[1]}, coefficients {coeffs.ndim}")
    tables = [basis_table(m - 1, x[:, k]) for k, m in enumerate(coeffs.shape)]
    letters = "abcdefghijklmnopqrstuvwxyz"[:coeffs.ndim]
    spec = "".join(f"p{c}," for c in letters) + letters + "->p"
    out = np.einsum(spec, *tables, coeffs, optimize=True)
    return out.real if real else out
