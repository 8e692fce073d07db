"""Exact worst-case selection of the most violated feature set.

Given current per-instance weights ``alpha``, the most violated constraint
under a cardinality budget ``B`` is found by scoring every candidate unit
and keeping the ``B`` largest scores.  With ``omega = sum_i alpha_i y_i x_i``:

* plain features score ``c_j = lambda_j^2 * omega_j^2``;
* disjoint groups score ``c_j = lambda_j^2 * ||omega_{G_j}||^2``;
* tree nodes score like groups, and a subtree whose scale-adjusted bound
  ``max-lambda^2 * ||omega_{G_g}||^2`` falls below the current B-th best
  score is skipped without touching its descendants;
* degree-2 polynomial interaction features are scored blockwise from the
  raw data without materializing the expanded design;
* histogram-intersection scores follow the pairwise-minimum kernel form.

Selection is exact: ties are broken toward the smallest unit index, and
zero-score units remain selectable so exactly ``min(B, p)`` units return.
Scoring reads shared state but never mutates it, so independent calls are
safe to run concurrently and results do not depend on thread count.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .dataset import GroupStructure, SparseDataset, TreeStructure


@dataclass(frozen=True)
class Constraint:
    """A selected unit set: sorted ids and the budget that produced it."""

    ids: tuple[int, ...]
    budget: int

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        if list(self.ids) != sorted(set(self.ids)):
            raise ValueError("constraint ids must be sorted and unique")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if len(self.ids) > self.budget:
            raise ValueError("constraint holds more ids than its budget")


class TopB:
    """Streaming top-``B`` selector with smallest-index tie-breaking.

    Keeps a min-heap of ``(score, -index)`` pairs so the weakest kept entry
    is at the root; on a score tie the larger index is evicted first.
    """

    def __init__(self, budget: int):
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self.budget = budget
        self._heap: list[tuple[float, int]] = []

    def offer(self, score: float, index: int) -> None:
        item = (float(score), -int(index))
        if len(self._heap) < self.budget:
            heapq.heappush(self._heap, item)
        elif item > self._heap[0]:
            heapq.heapreplace(self._heap, item)

    def threshold(self) -> float:
        """Smallest kept score, or -inf while the heap is not full."""
        if len(self._heap) < self.budget:
            return -np.inf
        return self._heap[0][0]

    def full(self) -> bool:
        return len(self._heap) >= self.budget

    def ids(self) -> np.ndarray:
        return np.sort([-neg for _, neg in self._heap]).astype(np.intp)


def _check_alpha(alpha: np.ndarray, n: int) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (n,):
        raise ValueError("alpha length must match the number of instances")
    if np.any(alpha < 0):
        raise ValueError("alpha entries must be non-negative")
    return alpha


def _omega(alpha: np.ndarray, data: SparseDataset) -> np.ndarray:
    """Weighted label-signed column sums ``omega = X' (alpha .* y)``."""
    return data.X.T @ (alpha * data.y)


def score_features(alpha: np.ndarray, data: SparseDataset, lam: np.ndarray) -> np.ndarray:
    """Per-feature scores ``lambda_j^2 * omega_j^2``, shape ``(m,)``."""
    alpha = _check_alpha(alpha, data.n)
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (data.m,):
        raise ValueError("lambda length must match the feature dimension")
    omega = _omega(alpha, data)
    return (lam * omega) ** 2


def select_top_b(scores: np.ndarray, budget: int) -> Constraint:
    """Ids of the ``B`` largest scores; ties go to the smallest index.

    Returns all ids when fewer than ``B`` candidates exist.  Zero scores
    are selectable, so the result always has ``min(B, p)`` ids.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores must be a non-empty vector")
    top = TopB(budget)
    for j, s in enumerate(scores):
        top.offer(s, j)
    return Constraint(tuple(top.ids()), budget)


def score_groups(alpha: np.ndarray, data: SparseDataset, groups: GroupStructure,
                 lam: np.ndarray) -> np.ndarray:
    """Per-group scores ``lambda_j^2 * ||omega_{G_j}||^2``."""
    alpha = _check_alpha(alpha, data.n)
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (groups.n_groups,):
        raise ValueError("lambda length must match the number of groups")
    cov = groups.covered()
    if cov.size and cov[-1] >= data.m:
        raise ValueError("group feature index out of range")
    omega_sq = _omega(alpha, data) ** 2
    return np.asarray([lam[j] ** 2 * omega_sq[g].sum() for j, g in enumerate(groups.groups)])


def score_tree_pruned(alpha: np.ndarray, data: SparseDataset, tree: TreeStructure,
                      budget: int) -> Constraint:
    """Top-``B`` tree nodes by ``lambda_h^2 ||omega_{G_h}||^2`` with pruning.

    Identical to exhaustively scoring every node: a subtree below node
    ``g`` is only skipped when ``max-lambda^2 * ||omega_{G_g}||^2`` is
    strictly below the current B-th best score (descendant index sets are
    contained in ``G_g``, so their norms cannot exceed ``||omega_{G_g}||``,
    and the precomputed subtree lambda-max bounds their scales).  Strict
    comparison keeps smallest-index tie-breaking exact.
    """
    alpha = _check_alpha(alpha, data.n)
    cov = tree.covered()
    if cov.size and cov[-1] >= data.m:
        raise ValueError("tree feature index out of range")
    omega_sq = _omega(alpha, data) ** 2
    top = TopB(budget)
    stack = sorted(tree.roots, reverse=True)
    while stack:
        node = stack.pop()
        energy = float(omega_sq[tree.sets[node]].sum())
        top.offer(tree.lambdas[node] ** 2 * energy, node)
        if tree.children[node]:
            bound = tree.subtree_lambda_max[node] ** 2 * energy
            if not (top.full() and bound < top.threshold()):
                stack.extend(sorted(tree.children[node], reverse=True))
    return Constraint(tuple(top.ids()), budget)


# ---------------------------------------------------------------------------
# degree-2 polynomial interaction features


def poly_dim(m: int) -> int:
    """Number of degree-2 virtual features: ``(m + 2)(m + 1) / 2``."""
    if m < 1:
        raise ValueError("need m >= 1")
    return (m + 2) * (m + 1) // 2


def poly_variant(flat: int, m: int) -> tuple:
    """Decode a flat virtual-feature id.

    Enumeration order: ``("const",)``, then ``("linear", a)`` for
    ``a = 0..m-1``, then ``("square", a)``, then ``("cross", a, b)`` for
    pairs ``a < b`` in lexicographic order.
    """
    total = poly_dim(m)
    if not 0 <= flat < total:
        raise ValueError(f"flat id {flat} outside [0, {total})")
    if flat == 0:
        return ("const",)
    flat -= 1
    if flat < m:
        return ("linear", flat)
    flat -= m
    if flat < m:
        return ("square", flat)
    flat -= m
    # lexicographic pair (a, b), a < b
    a = 0
    row = m - 1
    while flat >= row:
        flat -= row
        row -= 1
        a += 1
    return ("cross", a, a + 1 + flat)


def poly_flat(variant: tuple, m: int) -> int:
    """Inverse of :func:`poly_variant`."""
    kind = variant[0]
    if kind == "const":
        return 0
    if kind == "linear":
        a = variant[1]
        if not 0 <= a < m:
            raise ValueError("linear index out of range")
        return 1 + a
    if kind == "square":
        a = variant[1]
        if not 0 <= a < m:
            raise ValueError("square index out of range")
        return 1 + m + a
    if kind == "cross":
        a, b = variant[1], variant[2]
        if not 0 <= a < b < m:
            raise ValueError("cross pair must satisfy 0 <= a < b < m")
        return 1 + 2 * m + (a * (2 * m - a - 1)) // 2 + (b - a - 1)
    raise ValueError(f"unknown variant {variant!r}")


def poly_columns(data: SparseDataset, flat_ids: np.ndarray, gamma: float, r: float) -> np.ndarray:
    """Materialize virtual-feature columns for the given flat ids.

    The degree-2 map of ``k(x, z) = (gamma x'z + r)^2`` sends ``x`` to
    ``[r, sqrt(2 gamma r) x_a, gamma x_a^2, sqrt(2) gamma x_a x_b]``.
    """
    if gamma <= 0 or r < 0:
        raise ValueError("need gamma > 0 and r >= 0")
    flat_ids = np.asarray(flat_ids, dtype=np.intp)
    n, m = data.n, data.m
    out = np.zeros((n, flat_ids.size))
    dense_cols: dict[int, np.ndarray] = {}

    def col(a: int) -> np.ndarray:
        if a not in dense_cols:
            dense_cols[a] = np.asarray(data.X[:, [a]].todense()).ravel()
        return dense_cols[a]

    for pos, flat in enumerate(flat_ids):
        variant = poly_variant(int(flat), m)
        if variant[0] == "const":
            out[:, pos] = r
        elif variant[0] == "linear":
            out[:, pos] = np.sqrt(2.0 * gamma * r) * col(variant[1])
        elif variant[0] == "square":
            out[:, pos] = gamma * col(variant[1]) ** 2
        else:
            out[:, pos] = np.sqrt(2.0) * gamma * col(variant[1]) * col(variant[2])
    return out


def score_polynomial_streamed(alpha: np.ndarray, data: SparseDataset, gamma: float,
                              r: float, budget: int, block: int = 64) -> Constraint:
    """Top-``B`` degree-2 virtual features without materializing the expansion.

    Scores every virtual feature ``k`` by ``omega_k^2`` with
    ``omega_k = sum_i alpha_i y_i phi_k(x_i)``.  Interaction terms are
    scanned blockwise over the anchor feature: for a block of anchors
    ``A``, one dense product gives all ``sum_i z_i x_ia x_ib`` values, so
    peak memory besides the data is ``O(B + block * m)``.  The result is
    identical to scoring the materialized expansion, including the
    smallest-flat-id tie rule.
    """
    if gamma <= 0 or r < 0:
        raise ValueError("need gamma > 0 and r >= 0")
    if block < 1:
        raise ValueError("block must be >= 1")
    alpha = _check_alpha(alpha, data.n)
    z = alpha * data.y
    m = data.m
    top = TopB(budget)

    omega_const = r * float(z.sum())
    top.offer(omega_const ** 2, 0)

    lin = np.sqrt(2.0 * gamma * r) * (data.X.T @ z)          # (m,)
    sq = gamma * (data.X.multiply(data.X).T @ z)             # (m,)
    root2_gamma = np.sqrt(2.0) * gamma
    for start in range(0, m, block):
        anchors = np.arange(start, min(start + block, m))
        Xa = np.asarray(data.X[:, anchors].todense())        # (n, block)
        G = data.X.T @ (Xa * z[:, None])                     # (m, block)
        G = np.asarray(G)
        for j, a in enumerate(anchors):
            a = int(a)
            top.offer(float(lin[a]) ** 2, 1 + a)
            top.offer(float(sq[a]) ** 2, 1 + m + a)
            if a + 1 < m:
                cross = root2_gamma * G[a + 1:, j]
                base = 1 + 2 * m + (a * (2 * m - a - 1)) // 2
                for off, val in enumerate(cross):
                    top.offer(float(val) ** 2, base + off)
    return Constraint(tuple(top.ids()), budget)


def score_hik(alpha: np.ndarray, data: SparseDataset, beta: float = 1.0) -> np.ndarray:
    """Histogram-intersection scores, one per feature.

    ``c_k = sum_i sum_j alpha_i alpha_j y_i y_j min(|x_ik|^beta, |x_jk|^beta)``.
    The pairwise-minimum kernel is positive semidefinite, so every score is
    non-negative.  Cost is ``O(n^2 m)``; intended for small-n studies.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    alpha = _check_alpha(alpha, data.n)
    z = alpha * data.y
    X = np.abs(np.asarray(data.X.todense())) ** beta
    scores = np.empty(data.m)
    for k in range(data.m):
        M = np.minimum.outer(X[:, k], X[:, k])
        scores[k] = float(z @ M @ z)
    return scores
