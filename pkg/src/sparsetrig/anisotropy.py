"""Anisotropy estimation from the decay of sparse Fourier weights.

The weights are modelled as ``|w_j| ~ C * prod_k (1 + |sigma(j_k)|)**(-alpha_k)``
(hyperbolic space) or ``C * exp(-alpha . |sigma(j)|)`` (total-degree space).
Taking ``-log`` gives a linear least-squares problem in ``(cbar, alpha)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .trig_basis import sigma

HYPERBOLIC = "hyperbolic"
TOTAL_DEGREE = "total_degree"
SPACES = (HYPERBOLIC, TOTAL_DEGREE)

# weights below FLOOR * max|w| are dropped from the fit
FLOOR = np.sqrt(np.finfo(float).eps)


class UnderdeterminedFit(ValueError):
    pass


class RankDeficientFit(ValueError):
    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension


@dataclass
class FitSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    excluded_count: int = 0
    mode: str = HYPERBOLIC

    @property
    def dim(self):
        return self.matrix.shape[1] - 1


@dataclass
class AnisotropyEstimate:
    alpha: np.ndarray
    cbar: float = 0.0
    alpha_raw: np.ndarray = field(default=None)
    excluded_count: int = 0
    mode: str = HYPERBOLIC

    def report(self):
        raw = self.alpha if self.alpha_raw is None else self.alpha_raw
        return {
            "alpha_raw": [float(a) for a in raw],
            "alpha_stabilized": [float(a) for a in stabilize(raw)],
            "cbar": float(self.cbar),
            "excluded_count": int(self.excluded_count),
            "mode": self.mode,
        }


def _regressors(labels, mode):
    freq = np.abs(sigma(labels)).astype(float)
    if mode == HYPERBOLIC:
        return np.log1p(freq)
    if mode == TOTAL_DEGREE:
        return freq
    raise ValueError(f"unknown space {mode!r}; expected one of {SPACES}")


def build_fit(weights, mode=HYPERBOLIC, labels=None):
    """Assemble the least-squares system.

    ``weights`` is either a dict ``{label multi-index: complex}`` or an array
    aligned with ``labels`` (an ``(n, d)`` integer array).
    """
    if isinstance(weights, dict):
        if not weights:
            raise UnderdeterminedFit("no weights to fit")
        keys = list(weights)
        labels = np.array(keys, dtype=np.int64).reshape(len(keys), -1)
        values = np.array([weights[k] for k in keys], dtype=complex)
    else:
        values = np.asarray(weights, dtype=complex).reshape(-1)
        labels = np.asarray(labels, dtype=np.int64)
        if len(values) == 0:
            raise UnderdeterminedFit("no weights to fit")
    mags = np.abs(values)
    keep = mags >= FLOOR * mags.max() if mags.max() > 0 else np.zeros(len(mags), dtype=bool)
    d = labels.shape[1]
    if keep.sum() < d + 1:
        raise UnderdeterminedFit(
            f"{int(keep.sum())} usable weights, need at least {d + 1} for dimension {d}")
    matrix = np.empty((int(keep.sum()), d + 1))
    matrix[:, 0] = 1.0
    matrix[:, 1:] = _regressors(labels[keep], mode)
    rhs = -np.log(mags[keep])
    return FitSystem(matrix, rhs, excluded_count=int((~keep).sum()), mode=mode)


def householder_qr(a):
    """Thin QR of a tall matrix by Householder reflections.

    Returns ``(vs, r)``: the list of unit reflector vectors and the upper
    triangular ``n x n`` factor.
    """
    r = np.array(a, dtype=float)
    m, n = r.shape
    vs = []
    for k in range(n):
        x = r[k:, k]
        norm = np.linalg.norm(x)
        v = x.copy()
        v[0] += norm if x[0] >= 0 else -norm
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            vs.append(None)
            continue
        v /= vnorm
        r[k:, k:] -= 2.0 * np.outer(v, v @ r[k:, k:])
        vs.append(v)
    return vs, np.triu(r[:n])


def qr_lstsq(a, b):
    """Minimize ``||a x - b||_2`` via Householder QR (no normal equations)."""
    a = np.asarray(a, dtype=float)
    b = np.array(b, dtype=float)
    m, n = a.shape
    if m < n:
        raise UnderdeterminedFit(f"{m} equations for {n} unknowns")
    vs, r = householder_qr(a)
    for k, v in enumerate(vs):
        if v is not None:
            b[k:] -= 2.0 * v * (v @ b[k:])
    diag = np.abs(np.diag(r))
    scale = np.abs(a).max(axis=0)
    tiny = diag <= 1e-12 * np.maximum(scale, 1.0) * np.sqrt(m)
    if tiny.any():
        col = int(np.argmax(tiny))
        raise RankDeficientFit(f"regressor column {col} is (numerically) dependent", col)
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - r[k, k + 1:] @ x[k + 1:]) / r[k, k]
    return x


def solve_fit(system):
    """Least-squares ``(cbar, alpha)``; ``alpha`` is returned un-normalized."""
    a = system.matrix
    for k in range(1, a.shape[1]):
        col = a[:, k]
        if np.ptp(col) == 0.0:
            raise RankDeficientFit(
                f"no frequency variation in dimension {k} among the fitted weights", k - 1)
    try:
        v = qr_lstsq(a, system.rhs)
    except RankDeficientFit as exc:
        dim = None if exc.dimension in (None, 0) else exc.dimension - 1
        raise RankDeficientFit(str(exc), dim) from exc
    return AnisotropyEstimate(alpha=v[1:].copy(), cbar=float(v[0]), alpha_raw=v[1:].copy(),
                              excluded_count=system.excluded_count, mode=system.mode)


def stabilize(alpha):
    """Make all rates positive and rescale so the smallest equals one.

    Non-positive rates are replaced by the smallest positive one; if none is
    positive the isotropic vector is returned.
    """
    alpha = np.asarray(alpha, dtype=float)
    positive = alpha[alpha > 0]
    if positive.size == 0:
        return np.ones_like(alpha)
    out = np.where(alpha > 0, alpha, positive.min())
    return out / out.min()


def estimate(weights, mode=HYPERBOLIC, labels=None):
    """Fit and stabilize in one go; ``alpha_raw`` keeps the unstabilized fit."""
    est = solve_fit(build_fit(weights, mode, labels))
    est.alpha = stabilize(est.alpha_raw)
    return est
