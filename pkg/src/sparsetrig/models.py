"""Built-in periodic target functions.

* ``g_k``/``h_k``: piecewise-smooth periodic polynomials on ``[-1, 1]`` whose
  ``k``-th derivative is continuous across the periodic boundary and whose
  ``(k+1)``-th is not. ``h_k`` is ``g_k`` scaled to unit sup-norm.
* ``product_model``: ``prod_k h_{i_k}(x_k)``; anisotropy ``alpha_k = i_k + 2``.
* ``anisotropic_6d``: ``h1(x1) h5(x4) + h2(x2) h5(x5) + h3(x3) h5(x6)``.
* ``pib_wavefunction``: first-order perturbed n=(2, 2) state of a particle in
  the unit box, with a step potential in x and a quadratic one in y.
"""

from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

from .sparse_grid import ModelOracle

# ascending-power coefficients of g_1..g_5
G_COEFFS = {
    1: (0, -1, 0, 1),
    2: (0, 0, Fraction(-1, 2), 0, Fraction(1, 4)),
    3: (0, Fraction(7, 60), 0, Fraction(-1, 6), 0, Fraction(1, 20)),
    4: (0, 0, Fraction(7, 120), 0, Fraction(-1, 24), 0, Fraction(1, 120)),
    5: (0, Fraction(-31, 2520), 0, Fraction(7, 360), 0, Fraction(-1, 120), 0, Fraction(1, 840)),
}

SIX_D_ALPHA = (3, 4, 5, 7, 7, 7)
PIB_ALPHA = (3, 5)
PIB_TERMS = 10_000
PIB_STEP_HEIGHT = 15.0
PIB_QUADRATIC_SCALE = 60.0


def _check_order(k):
    if k not in G_COEFFS:
        raise ValueError(f"polynomial order must be in 1..5, got {k}")


def g_coefficients(k):
    _check_order(k)
    return np.array([float(c) for c in G_COEFFS[k]])


def g_k(k, x):
    return P.polyval(np.asarray(x, dtype=float), g_coefficients(k))


def g_k_exact(k, x):
    """Rational evaluation of ``g_k`` at a rational ``x``."""
    _check_order(k)
    x = Fraction(x)
    return sum(Fraction(c) * x ** p for p, c in enumerate(G_COEFFS[k]))


@lru_cache(maxsize=None)
def sup_norm(k):
    """``max_{[-1,1]} |g_k|`` from the critical points of the polynomial."""
    coeffs = g_coefficients(k)
    crit = P.polyroots(P.polyder(coeffs))
    crit = crit[np.abs(crit.imag) < 1e-12].real
    cand = np.concatenate([crit[(crit >= -1) & (crit <= 1)], [-1.0, 1.0]])
    return float(np.max(np.abs(P.polyval(cand, coeffs))))


def h_coefficients(k):
    return g_coefficients(k) / sup_norm(k)


def h_k(k, x):
    return P.polyval(np.asarray(x, dtype=float), h_coefficients(k))


def product_model(orders, x):
    """``prod_k h_{orders[k]}(x[:, k])`` on points ``x`` in ``[-1, 1]^d``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != len(orders):
        raise ValueError(f"points have dimension {x.shape[1]}, model has {len(orders)}")
    out = np.ones(len(x))
    for k, order in enumerate(orders):
        out *= h_k(order, x[:, k])
    return out


def anisotropic_6d(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != 6:
        raise ValueError(f"six-dimensional model got points of dimension {x.shape[1]}")
    return (h_k(1, x[:, 0]) * h_k(5, x[:, 3])
            + h_k(2, x[:, 1]) * h_k(5, x[:, 4])
            + h_k(3, x[:, 2]) * h_k(5, x[:, 5]))


# ---------------------------------------------------------------- particle in a box

def _sin_rational(k, num, den):
    # sin(k * pi * num / den) with the argument reduced exactly in integers
    return np.sin(np.pi * (np.mod(k * num, 2 * den) / den))


def _cos_integral(k, a, b):
    """``int_a^b cos(k pi u) du`` for rational ``a, b`` (as (num, den) pairs)."""
    k = np.asarray(k, dtype=np.int64)
    out = np.full(k.shape, float(Fraction(*b) - Fraction(*a)))
    nz = k != 0
    kk = k[nz]
    out[nz] = (_sin_rational(kk, *b) - _sin_rational(kk, *a)) / (kk * np.pi)
    return out


def _quadratic_cos_integral(k):
    """``int_0^1 (u - 1/2)^2 cos(k pi u) du``."""
    k = np.asarray(k, dtype=np.int64)
    out = np.full(k.shape, 1.0 / 12.0)
    nz = k != 0
    kk = k[nz]
    out[nz] = (1.0 + np.where(kk % 2 == 0, 1.0, -1.0)) / (kk * np.pi) ** 2
    return out


def step_matrix_elements(n):
    """``int_0^1 psi_n f_1 psi_2`` for the step potential ``f_1``."""
    n = np.asarray(n, dtype=np.int64)
    pieces = [((0, 1), (1, 4)), ((3, 4), (1, 1))]

    def integral(k):
        return sum(_cos_integral(np.abs(k), a, b) for a, b in pieces)

    return PIB_STEP_HEIGHT * (integral(n - 2) - integral(n + 2))


def quadratic_matrix_elements(n):
    """``int_0^1 psi_n f_2 psi_2`` for ``f_2(y) = 60 (y - 1/2)^2``."""
    n = np.asarray(n, dtype=np.int64)
    return PIB_QUADRATIC_SCALE * (_quadratic_cos_integral(np.abs(n - 2))
                                  - _quadratic_cos_integral(n + 2))


def pib_energy(n):
    return 0.5 * (np.asarray(n, dtype=float) * np.pi) ** 2


@lru_cache(maxsize=None)
def pib_correction_coefficients(axis, terms=PIB_TERMS):
    """Modes ``n != 2`` and coefficients of the first-order correction.

    ``axis`` is ``"x"`` (step potential) or ``"y"`` (quadratic potential).
    Only nonzero coefficients are returned.
    """
    n = np.arange(1, terms + 1)
    n = n[n != 2]
    if axis == "x":
        elems = step_matrix_elements(n)
    elif axis == "y":
        elems = quadratic_matrix_elements(n)
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    coeffs = elems / (pib_energy(2) - pib_energy(n))
    keep = np.abs(coeffs) > 1e-300
    keep &= np.abs(elems) > 1e-13 * np.abs(elems).max()
    return n[keep], coeffs[keep]


def _perturbed_state(axis, u, chunk=512):
    u = np.asarray(u, dtype=float).reshape(-1)
    modes, coeffs = pib_correction_coefficients(axis)
    out = np.sqrt(2.0) * np.sin(2 * np.pi * u)
    for start in range(0, len(u), chunk):
        us = u[start:start + chunk]
        out[start:start + chunk] += np.sqrt(2.0) * (np.sin(np.pi * np.outer(us, modes)) @ coeffs)
    return out


def pib_wavefunction(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != 2:
        raise ValueError(f"particle-in-a-box model is two-dimensional, got {x.shape[1]}")
    return _perturbed_state("x", x[:, 0]) * _perturbed_state("y", x[:, 1])


# ---------------------------------------------------------------- registry

class BuiltinModel:
    def __init__(self, name, func, dim, domain, alpha=None):
        self.name = name
        self.func = func
        self.dim = dim
        self.domain = domain
        self.alpha = alpha

    def oracle(self, noise=0.0, seed=None):
        return ModelOracle(self.func, self.dim, self.domain, name=self.name, noise=noise, seed=seed)


def parse_model(spec):
    """Resolve a model name such as ``product:1,2``, ``aniso6d``, ``pib``.

    Also ``constant:c:d`` (constant ``c`` in ``d`` dimensions) for testing.
    """
    name, _, args = spec.partition(":")
    if name == "product":
        orders = tuple(int(a) for a in args.split(",") if a)
        if not orders:
            raise ValueError("product model needs orders, e.g. product:1,2")
        for k in orders:
            _check_order(k)
        func = lambda x, orders=orders: product_model(orders, x)
        return BuiltinModel(spec, func, len(orders), [(-1.0, 1.0)] * len(orders),
                            alpha=tuple(k + 2 for k in orders))
    if name == "aniso6d":
        return BuiltinModel(spec, anisotropic_6d, 6, [(-1.0, 1.0)] * 6, alpha=SIX_D_ALPHA)
    if name == "pib":
        return BuiltinModel(spec, pib_wavefunction, 2, [(0.0, 1.0)] * 2, alpha=PIB_ALPHA)
    if name == "constant":
        value, _, dim = args.partition(":")
        dim = int(dim or 1)
        value = float(value or 0.0)
        func = lambda x, value=value: np.full(len(x), value)
        return BuiltinModel(spec, func, dim, [(0.0, 1.0)] * dim)
    raise ValueError(f"unknown model {spec!r}")
