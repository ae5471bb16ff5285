"""Validation errors and convergence bookkeeping."""

import csv

import numpy as np

VALIDATION_SIZE = 2000
# validation points closer than this to a grid node are redrawn
NODE_CLEARANCE = 1e-12


class ValidationSet:
    """Uniform random points over a model domain, reproducible from ``seed``.

    Points are stored both in domain coordinates (``points``) and in the unit
    cube (``unit``). The generator is numpy's PCG64.
    """

    def __init__(self, domain, size=VALIDATION_SIZE, seed=0):
        self.domain = [(float(a), float(b)) for a, b in domain]
        self.seed = int(seed)
        self.size = int(size)
        self._rng = np.random.default_rng(self.seed)
        self.unit = self._draw(self.size)

    def _draw(self, n):
        u = self._rng.random((n, len(self.domain)))
        # strictly inside: random() is in [0, 1)
        while True:
            bad = np.any(u <= 0.0, axis=1)
            if not bad.any():
                return u
            u[bad] = self._rng.random((int(bad.sum()), len(self.domain)))

    @property
    def points(self):
        lo = np.array([a for a, _ in self.domain])
        hi = np.array([b for _, b in self.domain])
        return lo + (hi - lo) * self.unit

    def avoid_nodes(self, node_points):
        """Redraw any point within ``NODE_CLEARANCE`` of a node (max norm)."""
        node_points = np.asarray(node_points, dtype=float)
        for _ in range(100):
            close = np.zeros(len(self.unit), dtype=bool)
            for start in range(0, len(node_points), 4096):
                block = node_points[start:start + 4096]
                dist = np.abs(self.unit[:, None, :] - block[None, :, :]).max(axis=2)
                close |= (dist <= NODE_CLEARANCE).any(axis=1)
            if not close.any():
                return self
            self.unit[close] = self._draw(int(close.sum()))
        raise RuntimeError("could not draw validation points away from the grid nodes")


def reference_values(oracle, validation):
    return oracle.evaluate_domain(validation.points)


def _errors(grid, oracle, validation, reference=None):
    if reference is None:
        reference = reference_values(oracle, validation)
    approx = grid.evaluate(validation.unit)
    return reference - approx


def max_error(grid, oracle, validation, reference=None):
    """``max_j |f(x_j) - I[f](x_j)|`` over the validation points."""
    return float(np.max(np.abs(_errors(grid, oracle, validation, reference))))


def rmse(grid, oracle, validation, reference=None):
    err = _errors(grid, oracle, validation, reference)
    return float(np.sqrt(np.mean(err ** 2)))


def error_metrics(grid, oracle, validation, reference=None):
    err = _errors(grid, oracle, validation, reference)
    return {"max_error": float(np.max(np.abs(err))), "rmse": float(np.sqrt(np.mean(err ** 2)))}


def convergence_slope(history, log_correction=False):
    """Least-squares slope of ``log(error)`` against ``log(N)``.

    ``history`` is a sequence of ``(node_count, error)``. With
    ``log_correction`` the errors are first divided by ``log(N)**2``.
    Entries with non-positive error are dropped.
    """
    data = np.array([(n, e) for n, e in history if e > 0 and n > 1], dtype=float).reshape(-1, 2)
    if len(data) < 3:
        raise ValueError(f"need at least 3 positive-error points, got {len(data)}")
    n, err = data[:, 0], data[:, 1]
    if log_correction:
        err = err / np.log(n) ** 2
    a = np.column_stack([np.ones(len(n)), np.log(n)])
    coef, *_ = np.linalg.lstsq(a, np.log(err), rcond=None)
    return float(coef[1])


def study_rows(history, dim):
    """Rows for the study CSV from history records carrying error metrics."""
    rows = []
    for rec in history:
        alpha = rec.get("alpha_used") or [1.0] * dim
        rows.append([rec["iteration"], rec["node_count"], rec.get("max_error"), rec.get("rmse")]
                    + list(alpha))
    return rows


def write_study_csv(path, history, dim):
    header = ["iteration", "nodes", "max_error", "rmse"] + [f"alpha_{k + 1}" for k in range(dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in study_rows(history, dim):
            writer.writerow(["" if v is None else (f"{v:.17g}" if isinstance(v, float) else v)
                             for v in row])
