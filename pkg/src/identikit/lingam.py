"""Linear non-Gaussian acyclic SEM estimation via ICA.

An acyclic linear SEM x = Bx + e with independent non-Gaussian disturbances is
an ICA model with mixing (I - B)^{-1}, so estimation reduces to ICA plus two
combinatorial steps that undo ICA's row-permutation and scaling indeterminacy:
pick the row order that keeps the unmixing diagonal away from zero (the wrong
order would park a structural zero on the diagonal, impossible after
rescaling to unit diagonal), then pick the variable order that makes the
coefficient matrix closest to strictly lower triangular.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import DataError, Dataset, ShapeError, _as_matrix
from .linear_ica import estimate_ica

__all__ = [
    "SemModel",
    "CyclicGraphError",
    "NearSingularDiagonalError",
    "NoValidAssignmentError",
    "estimate_lingam",
    "row_permutation_for_diagonal",
    "causal_order",
]

EXHAUSTIVE_LIMIT = 8


class CyclicGraphError(DataError):
    """No variable order makes the coefficient matrix triangular."""


class NearSingularDiagonalError(DataError):
    """Best row assignment still leaves a near-zero diagonal entry
    (Gaussian-like or degenerate data)."""


class NoValidAssignmentError(DataError):
    """Every row assignment has a zero diagonal product."""


@dataclass(frozen=True)
class SemModel:
    """Linear SEM coefficients b[i, j] = effect of x_j on x_i.

    `causal_order[k]` is the variable at causal position k.  When `pruned`,
    b permuted by the causal order is strictly lower triangular.
    """

    b: np.ndarray
    causal_order: tuple
    disturbance_kurtosis: Optional[tuple] = None
    pruned: bool = False
    diagnostics: dict = None

    def __post_init__(self):
        b = _as_matrix(self.b)
        n = b.shape[0]
        if b.shape != (n, n):
            raise ShapeError(f"coefficient matrix must be square, got {b.shape}")
        if np.any(np.diag(b) != 0):
            raise DataError("coefficient matrix must have a zero diagonal")
        if sorted(self.causal_order) != list(range(n)):
            raise DataError(f"causal_order must be a permutation of 0..{n - 1}")
        if self.pruned:
            perm = list(self.causal_order)
            permuted = b[np.ix_(perm, perm)]
            if np.any(np.triu(permuted) != 0):
                raise DataError("pruned model must be strictly lower triangular in causal order")
        b.flags.writeable = False
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "causal_order", tuple(int(v) for v in self.causal_order))

    @property
    def n_vars(self) -> int:
        return self.b.shape[0]

    def edges(self) -> list:
        """(cause, effect, coefficient) triples for nonzero entries."""
        out = []
        for i in range(self.n_vars):
            for j in range(self.n_vars):
                if self.b[i, j] != 0:
                    out.append((j, i, float(self.b[i, j])))
        return out


def row_permutation_for_diagonal(w) -> tuple:
    """Row order of W maximizing the product of |diagonal| entries.

    Exhaustive for n <= 8; the assignment problem on -log|W| above.  Raises
    `NoValidAssignmentError` when every assignment includes a zero.
    """
    w = _as_matrix(w)
    n = w.shape[0]
    if w.shape != (n, n):
        raise ShapeError(f"need a square matrix, got {w.shape}")
    absw = np.abs(w)
    if n <= EXHAUSTIVE_LIMIT:
        best, best_perm = -np.inf, None
        for perm in itertools.permutations(range(n)):
            diag = absw[list(perm), range(n)]
            if np.any(diag == 0):
                continue
            score = np.log(diag).sum()
            if score > best:
                best, best_perm = score, perm
        if best_perm is None:
            raise NoValidAssignmentError("every row assignment has a zero diagonal entry")
        return tuple(best_perm)
    with np.errstate(divide="ignore"):
        cost = -np.log(absw)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(n, dtype=int)
    perm[cols] = rows
    if np.any(absw[perm, range(n)] == 0):
        raise NoValidAssignmentError("every row assignment has a zero diagonal entry")
    return tuple(int(p) for p in perm)


def causal_order(b, tol: float = 1e-9) -> tuple:
    """Variable order making b strictly lower triangular (above-diagonal
    entries all below tol in absolute value), lexicographically smallest
    among valid orders.  Raises `CyclicGraphError` if none exists.
    """
    b = _as_matrix(b)
    n = b.shape[0]
    if b.shape != (n, n):
        raise ShapeError(f"need a square matrix, got {b.shape}")
    if np.any(np.abs(np.diag(b)) >= tol):
        raise DataError("coefficient matrix must have a (near-)zero diagonal")
    # effect of x_j on x_i sits at b[i, j]: j is a parent of i.  A valid next
    # variable has no remaining parents; picking the smallest index each step
    # yields the lexicographically smallest topological order.
    remaining = list(range(n))
    order = []
    absb = np.abs(b)
    while remaining:
        eligible = [
            i for i in remaining if all(absb[i, j] < tol for j in remaining if j != i)
        ]
        if not eligible:
            raise CyclicGraphError(f"no causal order exists (cycle among {remaining})")
        nxt = min(eligible)
        order.append(nxt)
        remaining.remove(nxt)
    return tuple(order)


def _best_triangular_order(b: np.ndarray) -> tuple:
    """Variable order minimizing the squared mass above the diagonal."""
    n = b.shape[0]
    sq = b**2
    if n <= EXHAUSTIVE_LIMIT:
        best, best_perm = np.inf, None
        for perm in itertools.permutations(range(n)):
            p = list(perm)
            cost = np.triu(sq[np.ix_(p, p)], k=1).sum()
            if cost < best:
                best, best_perm = cost, perm
        return tuple(best_perm)
    # greedy: repeatedly emit the variable with the smallest squared incoming
    # mass from the not-yet-emitted set (smallest-row-norm-first)
    remaining = list(range(n))
    order = []
    while remaining:
        costs = [(sq[i, [j for j in remaining if j != i]].sum(), i) for i in remaining]
        _, nxt = min(costs)
        order.append(nxt)
        remaining.remove(nxt)
    return tuple(order)


def estimate_lingam(
    data: Dataset,
    ica_config: Optional[dict] = None,
    prune_threshold: float = 0.05,
) -> SemModel:
    """Estimate an acyclic linear non-Gaussian SEM.

    Pipeline: ICA unmixing -> diagonal-maximizing row permutation -> unit
    diagonal rescale -> B = I - W -> triangularity-maximizing variable order
    -> prune entries below `prune_threshold`.
    """
    n, d = data.values.shape
    if n < 50 * d:
        raise DataError(f"need at least {50 * d} rows for {d} variables, got {n}")
    cfg = dict(ica_config or {})
    ica = estimate_ica(data, **cfg)
    w = ica.unmixing

    row_perm = row_permutation_for_diagonal(w)
    w_ord = w[list(row_perm)]
    diag = np.diag(w_ord).copy()
    if np.any(np.abs(diag) < 1e-8):
        raise NearSingularDiagonalError(
            f"near-zero unmixing diagonal after best row order (min |w_ii| = {np.abs(diag).min():.3g})"
        )
    w_unit = w_ord / diag[:, None]
    b = np.eye(d) - w_unit
    np.fill_diagonal(b, 0.0)

    order = _best_triangular_order(b)
    b_pruned = np.where(np.abs(b) >= prune_threshold, b, 0.0)
    permuted = b_pruned[np.ix_(list(order), list(order))]
    is_triangular = not np.any(np.triu(permuted) != 0)

    resid = data.values - data.values.mean(axis=0)
    disturbances = resid @ (np.eye(d) - b_pruned).T
    disturbances = disturbances - disturbances.mean(axis=0)
    second = (disturbances**2).mean(axis=0)
    fourth = (disturbances**4).mean(axis=0)
    dk = tuple(float(k) for k in fourth / second**2 - 3.0)
    return SemModel(
        b=b_pruned,
        causal_order=order,
        disturbance_kurtosis=dk,
        pruned=is_triangular,
        diagnostics={
            "ica_converged": ica.converged,
            "ica_iterations": ica.iterations,
            "row_permutation": row_perm,
            "unpruned_b": b,
        },
    )
