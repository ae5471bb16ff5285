"""One-dimensional trigonometric rule: node placement, frequency labels, basis.

Basis functions are labelled by a nonnegative integer ``nu`` which maps to a
signed frequency through :func:`sigma`::

    nu     0  1  2  3  4  5  6 ...
    sigma  0  1 -1  2 -2  3 -3 ...

so that labels ``0..2n`` span every trigonometric polynomial of degree ``n``.
"""

import numpy as np


def sigma(nu):
    """Signed frequency of basis label ``nu`` (works elementwise on arrays)."""
    if isinstance(nu, (int, np.integer)):
        if nu < 0:
            raise ValueError(f"basis label must be nonnegative, got {nu}")
        return -(nu // 2) if nu % 2 == 0 else (nu + 1) // 2
    nu = np.asarray(nu, dtype=np.int64)
    return np.where(nu % 2 == 0, -(nu // 2), (nu + 1) // 2)


def points_at_level(level):
    """Number of points ``m(l) = 3**l`` of the nested rule at ``level``."""
    if level < 0:
        raise ValueError(f"level must be nonnegative, got {level}")
    return 3 ** level


def nodes_1d(m):
    """Equispaced nodes ``j/m`` for ``j = 0..m-1``; ``m`` must be odd."""
    if m < 1 or m % 2 == 0:
        raise ValueError(f"trigonometric rule needs an odd number of points, got {m}")
    return np.arange(m) / m


def basis_eval(nu, x):
    """Evaluate ``exp(2*pi*i*sigma(nu)*x)``."""
    return np.exp(2j * np.pi * sigma(nu) * np.asarray(x, dtype=float))


def basis_table(max_label, x):
    """All basis values for labels ``0..max_label`` at points ``x``.

    Returns a complex array of shape ``(len(x), max_label + 1)``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    freqs = sigma(np.arange(max_label + 1))
    return np.exp(2j * np.pi * np.outer(x, freqs))
