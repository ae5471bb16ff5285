"""Sparse trigonometric interpolation by the combination technique.

Nodes are numbered hierarchically in each dimension so that the nodes of
level ``l`` are exactly the global indices ``0..3**l - 1``::

    global index  0    1    2    3    4    5    6    7    8   ...
    coordinate    0   1/3  2/3  1/9  2/9  4/9  5/9  7/9  8/9  ...

With this numbering the node multi-indices of a tensor ``i`` form the box
``j <= m(i) - 1``, the same box as its basis labels, and the union over all
tensors (``node_set``) indexes both the nodes and the sparse weights.
"""

import json
import os
import tempfile

import numpy as np

from .index_sets import LowerSet, is_lower
from .tensor_rule import dft_coefficients, tensor_shape
from .trig_basis import basis_table, points_at_level

FORMAT_VERSION = 1


class OracleError(RuntimeError):
    """A model evaluation failed; ``points`` holds the offending inputs."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class ModelOracle:
    """Batched evaluator of a target function.

    ``evaluator`` receives an ``(n, d)`` array of points in the model domain
    ``[a_1, b_1] x ... x [a_d, b_d]`` and returns ``n`` real values. Calling the
    oracle takes points in ``[0, 1]^d``; the affine map happens here.
    """

    def __init__(self, evaluator, dim, domain=None, name=None, noise=0.0, seed=None):
        self.evaluator = evaluator
        self.dim = int(dim)
        if domain is None:
            domain = [(0.0, 1.0)] * self.dim
        domain = [(float(a), float(b)) for a, b in domain]
        if len(domain) != self.dim:
            raise ValueError(f"domain has {len(domain)} intervals for dimension {self.dim}")
        if any(not b > a for a, b in domain):
            raise ValueError(f"empty domain interval in {domain}")
        self.domain = domain
        self.name = name or getattr(evaluator, "__name__", "model")
        self.noise = float(noise)
        self._rng = np.random.default_rng(seed)
        self.n_calls = 0
        self.n_points = 0

    @property
    def lower(self):
        return np.array([a for a, _ in self.domain])

    @property
    def upper(self):
        return np.array([b for _, b in self.domain])

    def to_domain(self, unit_points):
        return self.lower + (self.upper - self.lower) * np.asarray(unit_points, dtype=float)

    def to_unit(self, points):
        return (np.asarray(points, dtype=float) - self.lower) / (self.upper - self.lower)

    def evaluate_domain(self, points):
        """Evaluate at points given in domain coordinates (no sample accounting)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if len(points) == 0:
            return np.zeros(0)
        values = np.asarray(self.evaluator(points), dtype=float).reshape(-1)
        if len(values) != len(points):
            raise OracleError(f"model returned {len(values)} values for {len(points)} points", points)
        bad = ~np.isfinite(values)
        if bad.any():
            raise OracleError(f"model returned non-finite value at point {points[bad][0].tolist()}",
                              points[bad])
        if self.noise:
            values = values + self._rng.uniform(-self.noise, self.noise, size=len(values))
        return values

    def __call__(self, unit_points):
        unit_points = np.asarray(unit_points, dtype=float).reshape(-1, self.dim)
        if len(unit_points) == 0:
            return np.zeros(0)
        values = self.evaluate_domain(self.to_domain(unit_points))
        self.n_calls += 1
        self.n_points += len(unit_points)
        return values


# ---------------------------------------------------------------- node indexing

def canonical_to_global(level):
    """Global hierarchical index of each canonical node ``j/3**level``."""
    perm = np.zeros(1, dtype=np.int64)
    for l in range(1, level + 1):
        m_prev = 3 ** (l - 1)
        j = np.arange(3 ** l)
        new = m_prev + j - j // 3 - 1
        new[j % 3 == 0] = perm
        perm = new
    return perm


def node_coordinate(g):
    """Coordinate in [0, 1) of global 1D node index ``g`` (elementwise)."""
    g = np.asarray(g, dtype=np.int64)
    out = np.zeros(g.shape)
    nz = g > 0
    if nz.any():
        gg = g[nz]
        level = np.zeros(gg.shape, dtype=np.int64)
        while True:
            grow = gg >= 3 ** level
            if not grow.any():
                break
            level += grow
        r = gg - 3 ** (level - 1)
        j = 3 * (r // 2) + r % 2 + 1
        out[nz] = j / 3.0 ** level
    return out


def required_label(level):
    """Basis label whose presence in Lambda requires tensor level ``level``.

    Level ``l - 1`` reproduces labels ``0..m(l-1)-1``, so level ``l`` is needed
    once label ``m(l-1)`` (frequency ``(m(l-1)+1)/2``) is present; level 0 is
    needed for label 0.
    """
    return 0 if level == 0 else points_at_level(level - 1)


def _level_of_label(nu):
    # inverse of required_label, or None when nu triggers no level
    if nu == 0:
        return 0
    level = 1
    while points_at_level(level - 1) < nu:
        level += 1
    return level if points_at_level(level - 1) == nu else None


def optimal_tensors(lam):
    """Smallest tensor set whose interpolant reproduces every label in ``lam``."""
    theta = []
    for nu in lam:
        levels = [_level_of_label(c) for c in nu]
        if all(l is not None for l in levels):
            theta.append(tuple(levels))
    return LowerSet(theta, dim=lam.dim)


def combination_coefficients(theta):
    """Integer ``t_i`` with ``sum_{i in theta, i >= j} t_i = 1`` for all ``j``.

    Back-substitution in descending lexicographic order: any ``i >= j`` other
    than ``j`` itself comes later lexicographically, so it is already solved.
    """
    idx = theta.as_array()
    n = len(idx)
    t = np.zeros(n, dtype=np.int64)
    for p in range(n - 1, -1, -1):
        later = idx[p + 1:]
        dominates = np.all(later >= idx[p], axis=1)
        t[p] = 1 - int(t[p + 1:][dominates].sum())
    return {tuple(int(c) for c in i): int(tp) for i, tp in zip(idx, t)}


def node_set(theta):
    """``union_{i in theta} {j : j <= m(i) - 1}`` in global node indexing."""
    nodes = set()
    for i in theta:
        nodes.update(np.ndindex(*tensor_shape(i)))
    return LowerSet(nodes, dim=theta.dim)


def assemble_weights(theta, t, per_tensor):
    """Sparse weights ``w_j = sum_i t_i c^i_j`` as a dict keyed by label ``j``."""
    weights = {}
    for i in theta:
        ti = t.get(i, 0)
        if ti == 0:
            continue
        if i not in per_tensor:
            raise KeyError(f"missing tensor coefficients for {i} (t = {ti})")
        coeffs = per_tensor[i]
        for j in np.ndindex(*coeffs.shape):
            weights[j] = weights.get(j, 0.0) + ti * coeffs[j]
    for j in node_set(theta):
        weights.setdefault(j, 0.0 + 0.0j)
    return weights


# ---------------------------------------------------------------- the grid

class SparseGrid:
    """Sparse interpolant with its samples, tensor data and weights.

    ``nodes`` is an ``(N, d)`` integer array in insertion order; ``samples`` and
    ``weights`` are aligned with it. Grids are treated as immutable:
    :func:`refine_grid` returns a new object and leaves its input untouched.
    """

    def __init__(self, dim):
        self.dim = int(dim)
        self.theta = LowerSet([], dim=self.dim)
        self.t_coeffs = {}
        self.nodes = np.zeros((0, self.dim), dtype=np.int64)
        self.samples = np.zeros(0)
        self.weights = np.zeros(0, dtype=complex)
        self._pos = {}
        self._tensors = {}
        self._max_label = np.full(self.dim, -1, dtype=np.int64)

    def __len__(self):
        return len(self.nodes)

    @property
    def num_nodes(self):
        return len(self.nodes)

    def node_points(self):
        """Node coordinates in [0, 1)^d, aligned with ``samples``."""
        return node_coordinate(self.nodes)

    def sample_dict(self):
        return {tuple(int(c) for c in j): float(v) for j, v in zip(self.nodes, self.samples)}

    def weight_dict(self):
        return {tuple(int(c) for c in j): complex(w) for j, w in zip(self.nodes, self.weights)}

    def _copy(self):
        new = SparseGrid(self.dim)
        new.theta = self.theta
        new.t_coeffs = dict(self.t_coeffs)
        new.nodes = self.nodes
        new.samples = self.samples
        new.weights = self.weights
        new._pos = dict(self._pos)
        new._tensors = dict(self._tensors)
        new._max_label = self._max_label.copy()
        return new

    def _tensor_data(self, i, pos, samples):
        shape = tensor_shape(i)
        labels = np.array(list(np.ndindex(*shape)), dtype=np.int64).reshape(-1, self.dim)
        label_pos = np.fromiter((pos[tuple(r)] for r in labels.tolist()), dtype=np.int64,
                                count=len(labels))
        perms = [canonical_to_global(l) for l in i]
        node_global = np.stack([perms[k][labels[:, k]] for k in range(self.dim)], axis=1)
        node_pos = np.fromiter((pos[tuple(r)] for r in node_global.tolist()), dtype=np.int64,
                               count=len(labels))
        coeffs = dft_coefficients(i, samples[node_pos].reshape(shape))
        return label_pos, coeffs.reshape(-1)

    def _reassemble(self):
        weights = np.zeros(len(self.nodes), dtype=complex)
        for i, ti in self.t_coeffs.items():
            if ti == 0:
                continue
            if i not in self._tensors:
                self._tensors[i] = self._tensor_data(i, self._pos, self.samples)
            label_pos, coeffs = self._tensors[i]
            weights[label_pos] += ti * coeffs
        self.weights = weights

    def new_nodes_for(self, theta):
        """Node multi-indices required by ``theta`` that the grid lacks."""
        fresh = {}
        for i in theta:
            if i in self.theta:
                continue
            for j in np.ndindex(*tensor_shape(i)):
                if j not in self._pos:
                    fresh[j] = None
        return list(fresh)

    def evaluate(self, x, chunk=None, real=True):
        """Interpolant at points ``x`` in [0, 1]^d, shape ``(n, d)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"points have dimension {x.shape[1]}, grid has {self.dim}")
        out = np.zeros(len(x), dtype=float if real else complex)
        if len(self.nodes) == 0:
            return out
        if chunk is None:
            chunk = max(1, int(4_000_000 // max(1, len(self.nodes))))
        for start in range(0, len(x), chunk):
            xs = x[start:start + chunk]
            prod = None
            for k in range(self.dim):
                table = basis_table(int(self._max_label[k]), xs[:, k])[:, self.nodes[:, k]]
                prod = table if prod is None else prod * table
            vals = prod @ self.weights
            out[start:start + chunk] = vals.real if real else vals
        return out

    # ------------------------------------------------------------ persistence

    def to_json(self, extra=None):
        data = {
            "format": FORMAT_VERSION,
            "dim": self.dim,
            "theta": self.theta.to_json(),
            "t_coeffs": [[list(i), t] for i, t in sorted(self.t_coeffs.items())],
            "nodes": self.nodes.tolist(),
            "samples": self.samples.tolist(),
            "weights": [[w.real, w.imag] for w in self.weights.tolist()],
        }
        if extra:
            data.update(extra)
        return data

    @classmethod
    def from_json(cls, data):
        if data.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported grid format {data.get('format')!r}")
        dim = int(data["dim"])
        grid = cls(dim)
        grid.theta = LowerSet.from_json(data["theta"], dim)
        grid.t_coeffs = {tuple(i): int(t) for i, t in data["t_coeffs"]}
        grid.nodes = np.array(data["nodes"], dtype=np.int64).reshape(-1, dim)
        grid.samples = np.array(data["samples"], dtype=float)
        grid.weights = np.array([complex(re, im) for re, im in data["weights"]], dtype=complex)
        if not (len(grid.nodes) == len(grid.samples) == len(grid.weights)):
            raise ValueError("grid file has inconsistent node/sample/weight counts")
        grid._pos = {tuple(j): p for p, j in enumerate(grid.nodes.tolist())}
        if len(grid.nodes):
            grid._max_label = grid.nodes.max(axis=0)
        return grid

    def save(self, path, extra=None):
        """Write the grid as JSON, replacing ``path`` atomically."""
        path = os.fspath(path)
        fd, tmp = tempfile.mkstemp(prefix=".grid-", suffix=".tmp",
                                   dir=os.path.dirname(os.path.abspath(path)))
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(self.to_json(extra), fh)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def refine_grid(grid, new_theta, oracle):
    """Grid on ``grid.theta | new_theta``; only unseen nodes are sampled."""
    if new_theta.dim != grid.dim:
        raise ValueError(f"dimension mismatch: {new_theta.dim} vs {grid.dim}")
    theta = LowerSet(grid.theta.as_frozenset() | new_theta.as_frozenset(), dim=grid.dim)
    if theta == grid.theta:
        return grid
    if not is_lower(theta):
        raise ValueError("refined tensor set is not lower")
    fresh = grid.new_nodes_for(new_theta)
    if fresh:
        fresh_arr = np.array(fresh, dtype=np.int64).reshape(-1, grid.dim)
        values = oracle(node_coordinate(fresh_arr))
    else:
        fresh_arr = np.zeros((0, grid.dim), dtype=np.int64)
        values = np.zeros(0)

    new = grid._copy()
    base = len(grid.nodes)
    for p, j in enumerate(fresh):
        new._pos[j] = base + p
    new.nodes = np.concatenate([grid.nodes, fresh_arr])
    new.samples = np.concatenate([grid.samples, values])
    if len(new.nodes):
        new._max_label = new.nodes.max(axis=0)
    new.theta = theta
    new.t_coeffs = combination_coefficients(theta)
    new._reassemble()
    return new


def build_grid(theta, oracle):
    return refine_grid(SparseGrid(theta.dim), theta, oracle)


def sparse_eval(grid, x):
    return grid.evaluate(x)

