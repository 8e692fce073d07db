"""Reference dense classifiers: l1-regularized, l2-regularized, and refits.

These baselines share the loss definitions with the selection engine but
optimize over all features at once:

* :func:`l1_prox_train` minimizes ``reg * ||w||_1 + loss`` by accelerated
  proximal gradient with a soft-threshold prox (same line-search contract
  as the subproblem solver), producing exact zeros;
* :func:`l2_full_train` minimizes ``0.5 ||w||^2 + loss``;
* :func:`retrain_unbiased` refits an l2 classifier on a fixed support with
  a large loss weight, removing the shrinkage bias of a sparse fit;
* :func:`sweep_to_support` walks a warm-started regularization path to hit
  requested support sizes within a tolerance, for matched-sparsity
  comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Model, ModelEntry
from .dataset import SparseDataset
from .loss import LossKind, _instance_weights, loss_from_margins, margins_from_scores
from .subsolver import NumericalError

_DENSIFY_THRESHOLD = 0.25


@dataclass
class DenseWeights:
    """Dense weight vector with the objective values of its solve."""

    w: np.ndarray
    objectives: list[float]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.w)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.w))


def _design(data: SparseDataset):
    """Dense matrix when the data is mostly dense, CSR otherwise."""
    density = data.X.nnz / max(1, data.n * data.m)
    if density >= _DENSIFY_THRESHOLD:
        return np.asarray(data.X.todense())
    return data.X


def _loss_and_coef(M, w: np.ndarray, y: np.ndarray, kind: LossKind):
    xi = margins_from_scores(M @ w, y, kind)
    return loss_from_margins(xi, kind), _instance_weights(xi, y, kind)


def _soft_threshold(g: np.ndarray, t: float) -> np.ndarray:
    return np.sign(g) * np.maximum(np.abs(g) - t, 0.0)


def l1_prox_train(data: SparseDataset, kind: LossKind, reg: float,
                  eps: float = 1e-7, max_iter: int = 2000,
                  warm: np.ndarray | None = None) -> DenseWeights:
    """Minimize ``reg * ||w||_1 + loss`` over all features.

    Accelerated proximal gradient with backtracking: each iteration first
    tries a more optimistic step, grows the denominator only while the
    sufficient-decrease test fails (ceiling doubled if hit repeatedly),
    and resets extrapolation whenever the objective would rise, so the
    recorded objective sequence is non-increasing.  Zeros are exact
    because the soft-threshold prox produces them.
    """
    if reg < 0:
        raise ValueError("reg must be non-negative")
    M = _design(data)
    y = data.y.astype(float)
    w = np.zeros(data.m) if warm is None else np.asarray(warm, dtype=float).copy()
    if w.shape != (data.m,):
        raise ValueError("warm start has the wrong dimension")
    w_prev = w.copy()
    rho_prev = rho = 1.0
    tau_acc = 0.1 * data.n * kind.C
    cap = max(tau_acc, 1e3 * tau_acc)

    def objective(x: np.ndarray) -> float:
        val, _ = _loss_and_coef(M, x, y, kind)
        return reg * float(np.abs(x).sum()) + val

    f_curr = objective(w)
    objectives = [f_curr]
    for k in range(max_iter):
        restarted = False
        while True:
            momentum = (rho_prev - 1.0) / rho
            v = w + momentum * (w - w_prev)
            p_v, coef = _loss_and_coef(M, v, y, kind)
            grad = -(M.T @ coef)
            grad = np.asarray(grad).ravel()

            tau = 0.8 * tau_acc
            cap_hits = 0
            trials = 0
            while True:
                trials += 1
                if trials > 500:
                    raise NumericalError("line search failed to terminate", iteration=k)
                w_new = _soft_threshold(v - grad / tau, reg / tau)
                p_new, _ = _loss_and_coef(M, w_new, y, kind)
                pen_new = reg * float(np.abs(w_new).sum())
                f_new = p_new + pen_new
                diff = w_new - v
                q_val = p_v + float(grad @ diff) + pen_new + 0.5 * tau * float(diff @ diff)
                if not np.isfinite(f_new):
                    raise NumericalError("non-finite objective during line search", iteration=k)
                if f_new <= q_val + 1e-12:
                    break
                if tau >= cap:
                    cap_hits += 1
                    if cap_hits >= 2:
                        cap *= 2.0
                        cap_hits = 0
                else:
                    cap_hits = 0
                tau = min(tau / 0.8, cap)
            tau_acc = tau
            if f_new > f_curr + 1e-12 and momentum > 0 and not restarted:
                rho_prev = rho = 1.0
                w_prev = w.copy()
                restarted = True
                continue
            break
        w_prev, w = w, w_new
        rho_prev, rho = rho, 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * rho * rho))
        f_prev, f_curr = f_curr, f_new
        objectives.append(f_curr)
        if abs(f_prev - f_curr) / max(abs(f_prev), 1e-12) <= eps:
            break
    return DenseWeights(w, objectives)


def _l2_solve(M, y: np.ndarray, dim: int, kind: LossKind, eps: float,
              max_iter: int, warm: np.ndarray | None = None) -> DenseWeights:
    """Minimize ``0.5 ||w||^2 + loss`` for a given design matrix."""
    w = np.zeros(dim) if warm is None else np.asarray(warm, dtype=float).copy()
    w_prev = w.copy()
    rho_prev = rho = 1.0
    n = y.size
    tau_acc = 0.1 * n * kind.C
    cap = max(tau_acc, 1e3 * tau_acc)

    def full_objective(x: np.ndarray) -> float:
        val, _ = _loss_and_coef(M, x, y, kind)
        return 0.5 * float(x @ x) + val

    f_curr = full_objective(w)
    objectives = [f_curr]
    for k in range(max_iter):
        restarted = False
        while True:
            momentum = (rho_prev - 1.0) / rho
            v = w + momentum * (w - w_prev)
            p_v, coef = _loss_and_coef(M, v, y, kind)
            f_v = 0.5 * float(v @ v) + p_v
            grad = v - np.asarray(M.T @ coef).ravel()

            tau = 0.8 * tau_acc
            cap_hits = 0
            trials = 0
            while True:
                trials += 1
                if trials > 500:
                    raise NumericalError("line search failed to terminate", iteration=k)
                w_new = v - grad / tau
                f_new = full_objective(w_new)
                diff = w_new - v
                q_val = f_v + float(grad @ diff) + 0.5 * tau * float(diff @ diff)
                if not np.isfinite(f_new):
                    raise NumericalError("non-finite objective during line search", iteration=k)
                if f_new <= q_val + 1e-12:
                    break
                if tau >= cap:
                    cap_hits += 1
                    if cap_hits >= 2:
                        cap *= 2.0
                        cap_hits = 0
                else:
                    cap_hits = 0
                tau = min(tau / 0.8, cap)
            tau_acc = tau
            if f_new > f_curr + 1e-12 and momentum > 0 and not restarted:
                rho_prev = rho = 1.0
                w_prev = w.copy()
                restarted = True
                continue
            break
        w_prev, w = w, w_new
        rho_prev, rho = rho, 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * rho * rho))
        f_prev, f_curr = f_curr, f_new
        objectives.append(f_curr)
        _, coef = _loss_and_coef(M, w, y, kind)
        grad_norm = float(np.linalg.norm(w - np.asarray(M.T @ coef).ravel()))
        if grad_norm <= eps * (1.0 + float(np.linalg.norm(w))):
            break
        if abs(f_prev - f_curr) / max(abs(f_prev), 1e-12) <= 1e-14:
            break
    return DenseWeights(w, objectives)


def l2_full_train(data: SparseDataset, kind: LossKind, eps: float = 1e-6,
                  max_iter: int = 1000, warm: np.ndarray | None = None) -> DenseWeights:
    """Minimize ``0.5 ||w||^2 + loss`` over all features.

    Stops when the gradient norm falls to ``eps * (1 + ||w||)``.
    """
    return _l2_solve(_design(data), data.y.astype(float), data.m, kind, eps, max_iter, warm)


def retrain_unbiased(data: SparseDataset, support, kind: LossKind | None = None,
                     eps: float = 1e-6, max_iter: int = 1000) -> Model:
    """l2 refit on a fixed support with a large loss weight (default C=20).

    Returns a plain-feature model whose entries cover exactly ``support``;
    features outside it keep weight zero.  Used to remove the shrinkage
    bias of a sparse fit before measuring accuracy.
    """
    support = np.unique(np.asarray(list(support), dtype=np.intp))
    if support.size == 0:
        raise ValueError("support must be non-empty")
    if support[0] < 0 or support[-1] >= data.m:
        raise ValueError("support index out of range")
    if kind is None:
        kind = LossKind("squared_hinge", 20.0)
    M = data.dense_columns(support)
    sol = _l2_solve(M, data.y.astype(float), support.size, kind, eps, max_iter)
    entries = [ModelEntry(int(j), float(sol.w[i]), 1.0) for i, j in enumerate(support)]
    return Model(
        mode="plain", budget=support.size, n_outer=1, stop_reason="retrain",
        loss=kind, lambda_policy="ones", m=data.m,
        units=tuple(int(j) for j in support), entries=entries,
        config={"C": kind.C, "loss": kind.kind, "support_size": int(support.size)},
        mkl_weights=[1.0],
    )


@dataclass
class SweepResult:
    """One matched-sparsity solution from a regularization path."""

    reg: float
    weights: DenseWeights
    support_size: int


def sweep_to_support(data: SparseDataset, kind: LossKind, targets,
                     tol: float = 0.05, decay: float = 0.8, eps: float = 1e-7,
                     max_iter: int = 2000, max_points: int = 120) -> dict[int, SweepResult]:
    """Find l1 weights whose support sizes match the targets within ``tol``.

    Walks ``reg`` down a geometric grid from the smallest value that zeroes
    every feature, warm-starting each solve, then bisects between
    bracketing grid points for any target still outside its window.
    Returns the closest solution found per target (within ``tol`` whenever
    the path crosses the window).
    """
    targets = sorted(set(int(t) for t in targets))
    if not targets or targets[0] < 1:
        raise ValueError("targets must be positive integers")
    M = _design(data)
    y = data.y.astype(float)
    _, coef0 = _loss_and_coef(M, np.zeros(data.m), y, kind)
    reg_max = float(np.max(np.abs(np.asarray(M.T @ coef0).ravel())))
    if reg_max == 0:
        raise ValueError("zero gradient at the origin; nothing to sweep")

    path: list[tuple[float, DenseWeights]] = []
    reg = reg_max
    warm = None
    top = max(targets)
    for _ in range(max_points):
        reg *= decay
        sol = l1_prox_train(data, kind, reg, eps=eps, max_iter=max_iter, warm=warm)
        warm = sol.w
        path.append((reg, sol))
        if sol.support_size >= top * (1.0 + tol):
            break

    def closest(t: int) -> tuple[float, DenseWeights]:
        return min(path, key=lambda p: (abs(p[1].support_size - t), p[0]))

    out: dict[int, SweepResult] = {}
    for t in targets:
        reg_best, sol_best = closest(t)
        lo, hi = t * (1.0 - tol), t * (1.0 + tol)
        if not lo <= sol_best.support_size <= hi:
            # bracket the target between neighboring path points and bisect
            above = [p for p in path if p[1].support_size > t]
            below = [p for p in path if p[1].support_size < t]
            if above and below:
                # support shrinks as reg grows: overshooting points sit at
                # smaller regs than undershooting ones
                reg_lo = max(p[0] for p in above)
                reg_hi = min(p[0] for p in below)
                for _ in range(20):
                    mid = float(np.sqrt(reg_lo * reg_hi))
                    sol = l1_prox_train(data, kind, mid, eps=eps, max_iter=max_iter,
                                        warm=sol_best.w)
                    path.append((mid, sol))
                    if abs(sol.support_size - t) < abs(sol_best.support_size - t):
                        reg_best, sol_best = mid, sol
                    if lo <= sol.support_size <= hi:
                        break
                    if sol.support_size > t:
                        reg_lo = mid
                    else:
                        reg_hi = mid
        out[t] = SweepResult(reg_best, sol_best, sol_best.support_size)
    return out


def dense_to_model(sol: DenseWeights, data: SparseDataset, kind: LossKind,
                   method: str = "l1") -> Model:
    """Wrap a dense baseline solution in the shared model container."""
    support = sol.support
    entries = [ModelEntry(int(j), float(sol.w[j]), 1.0) for j in support]
    return Model(
        mode="plain", budget=max(1, support.size), n_outer=1, stop_reason=method,
        loss=kind, lambda_policy="ones", m=data.m,
        units=tuple(int(j) for j in support), entries=entries,
        config={"C": kind.C, "loss": kind.kind, "method": method},
        mkl_weights=[1.0],
    )
