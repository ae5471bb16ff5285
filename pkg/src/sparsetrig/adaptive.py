"""Dimensionally adaptive refinement driver.

Each iteration fits decay rates to the current sparse weights, normalizes
them, and grows the basis set ``lam`` along the cheapest admissible indices
until the tensor set demands new nodes. ``lam`` holds basis labels (see
:mod:`sparsetrig.trig_basis`), the grid's tensor set is ``optimal_tensors(lam)``.
"""

import heapq
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import anisotropy
from .anisotropy import HYPERBOLIC, SPACES, TOTAL_DEGREE
from .index_sets import LowerSet, frontier, hyperbolic_set, predecessors, total_degree_set
from .sparse_grid import SparseGrid, _level_of_label, node_set, optimal_tensors, refine_grid
from .tensor_rule import tensor_shape

log = logging.getLogger(__name__)

ADAPTIVE = "adaptive"
ANALYTIC = "analytic"
ISOTROPIC = "isotropic"
MODES = (ADAPTIVE, ANALYTIC, ISOTROPIC)

# relative slack when grouping frontier indices with equal level value
_TIE_TOL = 1e-12


class BudgetError(ValueError):
    pass


@dataclass
class RefinementState:
    grid: SparseGrid
    lam: LowerSet
    budget: int
    space: str = HYPERBOLIC
    history: list = field(default_factory=list)
    frontier: set = None
    stopped: bool = False
    oracle: object = None

    def __post_init__(self):
        if self.frontier is None:
            self.frontier = set(frontier(self.lam))

    @property
    def node_count(self):
        return self.grid.num_nodes


def initial_set(d, L0, space=HYPERBOLIC):
    if space == HYPERBOLIC:
        return hyperbolic_set([1.0] * d, L0, d)
    if space == TOTAL_DEGREE:
        return total_degree_set([1.0] * d, L0, d)
    raise ValueError(f"unknown space {space!r}; expected one of {SPACES}")


def init_isotropic(d, L0, oracle, space=HYPERBOLIC, budget=None):
    """Isotropic starting grid on ``optimal_tensors(Lambda^1(L0))``."""
    if L0 < 2:
        raise ValueError(f"initial level must be >= 2, got {L0}")
    lam = initial_set(d, L0, space)
    theta = optimal_tensors(lam)
    n_init = len(node_set(theta))
    if budget is not None and n_init > budget:
        raise BudgetError(f"budget {budget} is smaller than the initial grid size {n_init}")
    grid = refine_grid(SparseGrid(d), theta, oracle)
    return RefinementState(grid=grid, lam=lam, budget=budget if budget is not None else n_init,
                           space=space, oracle=oracle)


def level_value(idx, alpha, space=HYPERBOLIC):
    """``log prod (i_k+1)**alpha_k`` (hyperbolic) or ``sum alpha_k i_k`` (total degree).

    Hyperbolic values are kept in log form; compare with ``log(L)``.
    """
    if space == HYPERBOLIC:
        return sum(a * math.log(i + 1) for a, i in zip(alpha, idx))
    return sum(a * i for a, i in zip(alpha, idx))


def _to_level(value, space):
    return math.exp(value) if space == HYPERBOLIC else value


def _successors(idx, members):
    for k in range(len(idx)):
        cand = idx[:k] + (idx[k] + 1,) + idx[k + 1:]
        if cand not in members and all(p in members for p in predecessors(cand)):
            yield cand


class _Growth:
    """Grows a basis set along its frontier in order of level value."""

    def __init__(self, lam, front, alpha, space):
        self.members = set(lam.as_frozenset())
        self.front = set(front)
        self.alpha = list(alpha)
        self.space = space
        self.heap = [(level_value(f, self.alpha, space), f) for f in self.front]
        heapq.heapify(self.heap)
        self.added = []

    def step(self):
        """Add the next batch of tied frontier indices; returns (L, batch)."""
        value = self.heap[0][0]
        limit = value + _TIE_TOL * max(1.0, abs(value))
        batch = []
        while self.heap and self.heap[0][0] <= limit:
            _, idx = heapq.heappop(self.heap)
            batch.append(idx)
        for idx in batch:
            self.members.add(idx)
            self.front.discard(idx)
        for idx in batch:
            for cand in _successors(idx, self.members):
                if cand not in self.front:
                    self.front.add(cand)
                    heapq.heappush(self.heap, (level_value(cand, self.alpha, self.space), cand))
        self.added.extend(batch)
        return _to_level(value, self.space), batch


def next_level(lam, alpha, space=HYPERBOLIC):
    """Smallest ``L`` with ``Lambda^alpha(L)`` not inside ``lam``, and the new indices."""
    growth = _Growth(lam, frontier(lam), alpha, space)
    L, batch = growth.step()
    return L, LowerSet(batch, dim=lam.dim)


def _new_tensor(idx, theta):
    levels = [_level_of_label(c) for c in idx]
    if any(l is None for l in levels):
        return None
    levels = tuple(levels)
    return None if levels in theta else levels


def choose_alpha(state, mode=ADAPTIVE, alpha=None):
    """Anisotropy for the next step: (alpha_used, alpha_raw, warning)."""
    d = state.grid.dim
    if mode == ISOTROPIC:
        return np.ones(d), None, None
    if mode == ANALYTIC:
        if alpha is None:
            raise ValueError("analytic mode needs an anisotropy vector")
        if len(alpha) != d:
            raise ValueError(f"alpha has {len(alpha)} components for dimension {d}")
        return anisotropy.stabilize(alpha), None, None
    if mode != ADAPTIVE:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    try:
        est = anisotropy.estimate(state.grid.weights, state.space, labels=state.grid.nodes)
    except (anisotropy.UnderdeterminedFit, anisotropy.RankDeficientFit) as exc:
        log.warning("anisotropy fit failed (%s); using isotropic rates", exc)
        return np.ones(d), None, str(exc)
    return est.alpha, est.alpha_raw, None


def _grow(state, alpha, min_new, max_steps=None):
    """Extend the ladder until ``min_new`` nodes are pending or the budget bites.

    Returns ``(growth, new_tensors, n_pending, L)``; ``n_pending == 0`` means
    not even the first increment fits in the budget.
    """
    grid = state.grid
    growth = _Growth(state.lam, state.frontier, alpha, state.space)
    theta = set(grid.theta.as_frozenset())
    new_tensors = []
    pending = set()
    L = None
    steps = 0
    while len(pending) < min_new and (max_steps is None or steps < max_steps):
        before = len(pending)
        L, batch = growth.step()
        steps += 1
        for idx in batch:
            tensor = _new_tensor(idx, theta)
            if tensor is None:
                continue
            theta.add(tensor)
            new_tensors.append(tensor)
            for j in np.ndindex(*tensor_shape(tensor)):
                if j not in grid._pos:
                    pending.add(j)
        if grid.num_nodes + len(pending) > state.budget:
            if before == 0:
                return growth, [], 0, L
            # keep the increments that still fit
            return _grow(state, alpha, min_new, max_steps=steps - 1)
    return growth, new_tensors, len(pending), L


def refine_once(state, mode=ADAPTIVE, alpha=None, min_new_nodes=1):
    """One adaptive iteration. Returns the new state (``stopped`` set on budget stop).

    The input state is never modified; on oracle failure the exception
    propagates and the caller still holds the last good state.
    """
    grid = state.grid
    if state.stopped or grid.num_nodes >= state.budget:
        return _stopped(state)
    alpha_used, alpha_raw, warning = choose_alpha(state, mode, alpha)
    growth, new_tensors, n_pending, L = _grow(state, alpha_used, max(1, min_new_nodes))
    if n_pending == 0:
        return _stopped(state)
    new_grid = refine_grid(grid, LowerSet(new_tensors, dim=grid.dim), state.oracle)
    lam = LowerSet(growth.members, dim=grid.dim)
    record = {
        "iteration": len(state.history) + 1,
        "node_count": new_grid.num_nodes,
        "new_nodes": new_grid.num_nodes - grid.num_nodes,
        "alpha_raw": None if alpha_raw is None else [float(a) for a in alpha_raw],
        "alpha_used": [float(a) for a in alpha_used],
        "L_used": float(L),
        "lambda_size": len(lam),
    }
    if warning:
        record["warning"] = warning
    return replace(state, grid=new_grid, lam=lam, history=state.history + [record],
                   frontier=growth.front)


def _stopped(state):
    return replace(state, stopped=True)


def run(state, mode=ADAPTIVE, alpha=None, min_new_nodes=1, callback=None, max_iterations=None):
    """Refine until the budget stops growth.

    ``callback(state)`` is invoked after every completed iteration and may
    return a dict merged into that iteration's history record (e.g. errors).
    """
    n = 0
    while not state.stopped:
        if max_iterations is not None and n >= max_iterations:
            break
        state = refine_once(state, mode, alpha, min_new_nodes)
        if state.stopped:
            break
        n += 1
        if callback is not None:
            extra = callback(state)
            if extra:
                state.history[-1].update(extra)
    return state


def tensor_box(level, d):
    """All level multi-indices ``i <= (level, ..., level)``."""
    return LowerSet(np.ndindex(*([level + 1] * d)), dim=d)


def run_full_tensor(d, oracle, budget, callback=None):
    """Baseline ladder of single full tensor grids ``(l, ..., l)``, l = 1, 2, ...

    Stops before the first grid that would exceed ``budget``. Returns
    ``(grid, history)``; records follow the adaptive history layout.
    """
    grid = SparseGrid(d)
    history = []
    level = 1
    while 3 ** (level * d) <= budget:
        grid = refine_grid(grid, tensor_box(level, d), oracle)
        record = {"iteration": len(history) + 1, "node_count": grid.num_nodes,
                  "new_nodes": grid.num_nodes - (history[-1]["node_count"] if history else 0),
                  "alpha_raw": None, "alpha_used": [1.0] * d, "L_used": float(level),
                  "lambda_size": grid.num_nodes}
        if callback is not None:
            record.update(callback(grid) or {})
        history.append(record)
        level += 1
    return grid, history
