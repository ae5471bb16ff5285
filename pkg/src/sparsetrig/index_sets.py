"""Multi-index sets: lower (downward-closed) sets and quasi-optimal constructors.

Multi-indices are plain tuples of nonnegative ints. A :class:`LowerSet` is an
immutable collection of them with a fixed dimension; iteration order is
lexicographic so equality, hashing and serialization are deterministic.
"""

import math

import numpy as np

# slack for float comparisons against the level bound L
_REL_TOL = 1e-12


class LowerSet:
    """Immutable set of multi-indices of a fixed dimension.

    The constructor does not check lowerness (``lower_completion`` and the
    set constructors guarantee it); call :func:`is_lower` where in doubt.
    """

    __slots__ = ("dim", "_indices", "_sorted")

    def __init__(self, indices, dim=None):
        indices = frozenset(tuple(int(c) for c in idx) for idx in indices)
        if dim is None:
            if not indices:
                raise ValueError("dimension is required for an empty set")
            dim = len(next(iter(indices)))
        for idx in indices:
            if len(idx) != dim:
                raise ValueError(f"index {idx} does not have dimension {dim}")
            if min(idx) < 0:
                raise ValueError(f"index {idx} has a negative component")
        self.dim = int(dim)
        self._indices = indices
        self._sorted = None

    def __contains__(self, idx):
        return tuple(idx) in self._indices

    def __len__(self):
        return len(self._indices)

    def __iter__(self):
        return iter(self.sorted())

    def __eq__(self, other):
        if isinstance(other, LowerSet):
            return self.dim == other.dim and self._indices == other._indices
        return NotImplemented

    def __hash__(self):
        return hash((self.dim, self._indices))

    def __repr__(self):
        body = ", ".join(str(idx) for idx in self.sorted()[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"LowerSet(dim={self.dim}, n={len(self)}: {{{body}{more}}})"

    def sorted(self):
        if self._sorted is None:
            self._sorted = sorted(self._indices)
        return self._sorted

    def as_frozenset(self):
        return self._indices

    def as_array(self):
        if not self._indices:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.array(self.sorted(), dtype=np.int64)

    def issubset(self, other):
        return self._indices <= other.as_frozenset()

    def to_json(self):
        return [list(idx) for idx in self.sorted()]

    @classmethod
    def from_json(cls, data, dim):
        return cls((tuple(idx) for idx in data), dim=dim)


def _check_alpha(alpha):
    alpha = [float(a) for a in alpha]
    if not alpha:
        raise ValueError("anisotropy vector is empty")
    if any(not a > 0 for a in alpha):
        raise ValueError(f"anisotropy components must be positive, got {alpha}")
    return alpha


def _enumerate(bound_per_dim, fits, d):
    """Depth-first enumeration of indices ``i`` with ``fits(prefix)`` true."""
    out = []
    prefix = []

    def recurse(k):
        if k == d:
            out.append(tuple(prefix))
            return
        for i in range(bound_per_dim[k] + 1):
            prefix.append(i)
            if fits(prefix):
                recurse(k + 1)
                prefix.pop()
            else:
                prefix.pop()
                break

    recurse(0)
    return out


def hyperbolic_set(alpha, L, d=None):
    """``{i : prod_k (i_k + 1)**alpha_k <= L}``."""
    alpha = _check_alpha(alpha)
    d = len(alpha) if d is None else d
    if len(alpha) != d:
        raise ValueError(f"alpha has {len(alpha)} components, expected {d}")
    if L < 1:
        raise ValueError(f"hyperbolic level must be >= 1, got {L}")
    log_bound = math.log(L) * (1 + _REL_TOL) + _REL_TOL
    bounds = [int(math.floor(math.exp(log_bound / a))) - 1 for a in alpha]

    def fits(prefix):
        return sum(a * math.log(i + 1) for a, i in zip(alpha, prefix)) <= log_bound

    return LowerSet(_enumerate(bounds, fits, d), dim=d)


def total_degree_set(alpha, L, d=None):
    """``{i : sum_k alpha_k * i_k <= L}``."""
    alpha = _check_alpha(alpha)
    d = len(alpha) if d is None else d
    if len(alpha) != d:
        raise ValueError(f"alpha has {len(alpha)} components, expected {d}")
    if L < 0:
        raise ValueError(f"total-degree level must be >= 0, got {L}")
    bound = L * (1 + _REL_TOL) + _REL_TOL
    bounds = [int(math.floor(bound / a)) for a in alpha]

    def fits(prefix):
        return sum(a * i for a, i in zip(alpha, prefix)) <= bound

    return LowerSet(_enumerate(bounds, fits, d), dim=d)


def predecessors(idx):
    """Immediate predecessors of ``idx`` (one component decremented)."""
    return [idx[:k] + (idx[k] - 1,) + idx[k + 1:] for k in range(len(idx)) if idx[k] > 0]


def is_lower(indices):
    members = indices.as_frozenset() if isinstance(indices, LowerSet) else {tuple(i) for i in indices}
    return all(p in members for idx in members for p in predecessors(idx))


def lower_completion(indices, dim=None):
    """Smallest lower set containing ``indices``."""
    indices = [tuple(i) for i in indices]
    if dim is None:
        if not indices:
            raise ValueError("dimension is required for an empty set")
        dim = len(indices[0])
    members = set()
    stack = list(indices)
    while stack:
        idx = stack.pop()
        if idx in members:
            continue
        members.add(idx)
        stack.extend(p for p in predecessors(idx) if p not in members)
    return LowerSet(members, dim=dim)


def union_lower(a, b):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return LowerSet(a.as_frozenset() | b.as_frozenset(), dim=a.dim)


def frontier(lower):
    """Indices outside ``lower`` whose immediate predecessors all lie inside.

    These are exactly the indices that can be added one at a time while
    keeping the set lower.
    """
    members = lower.as_frozenset()
    if not members:
        return [(0,) * lower.dim]
    out = set()
    for idx in members:
        for k in range(lower.dim):
            cand = idx[:k] + (idx[k] + 1,) + idx[k + 1:]
            if cand not in members and all(p in members for p in predecessors(cand)):
                out.add(cand)
    return sorted(out)
