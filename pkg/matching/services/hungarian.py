"""
Optimal vertex pairing by the Hungarian method.

SciPy's shortest-augmenting-path solver finds one optimal permutation; row
and column potentials are then recovered from it and the zero-reduced-cost
subgraph is walked to return the lexicographically smallest optimal
permutation, so ties resolve the same way on every run.
"""

from collections import deque
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

# reduced costs below this (relative to the largest entry) count as tight
TIGHT_TOL = 1e-9
# cost slack allowed when re-routing among tight edges
COST_TOL = 1e-12


def as_points(contour) -> np.ndarray:
    pts = getattr(contour, "points", contour)
    return np.asarray(pts, dtype=np.float64).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """N×N squared Euclidean distances between predicted and target vertices."""
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class Assignment:
    """Permutation pairing predicted vertex i with target vertex cols[i]."""
    cols: np.ndarray
    total_cost: float

    @property
    def pairs(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((i, int(j)) for i, j in enumerate(self.cols))


def cost_matrix(pred, target) -> CostMatrix:
    """M_ij = ||pred_i - target_j||²."""
    p, t = as_points(pred), as_points(target)
    if len(p) != len(t):
        raise ValueError(f"Contour lengths differ: {len(p)} predicted vs {len(t)} target vertices")
    diff = p[:, None, :] - t[None, :, :]
    return CostMatrix(np.einsum("ijk,ijk->ij", diff, diff))


def hungarian(m) -> Assignment:
    """
    Minimum-cost perfect matching of a square cost matrix.

    Args:
        m: CostMatrix or square array-like of finite costs

    Returns:
        Assignment; among equal-cost optima the lexicographically smallest
        (cols[0], cols[1], ...) is chosen

    Raises:
        ValueError: non-square input, NaN or infinite entries
    """
    a = np.asarray(m.values if isinstance(m, CostMatrix) else m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"Cost matrix must be square, got shape {a.shape}")
    if np.isnan(a).any():
        raise ValueError("Cost matrix contains NaN entries")
    if not np.isfinite(a).all():
        raise ValueError("Cost matrix contains infinite entries")
    n = a.shape[0]
    if n == 0:
        return Assignment(np.zeros(0, dtype=np.int64), 0.0)

    _, col_of_row = linear_sum_assignment(a)
    col_of_row = col_of_row.astype(np.int64)
    u, v = _dual_potentials(a, col_of_row)
    col_of_row = _lexicographic_optimum(a, u, v, col_of_row)
    total = float(a[np.arange(n), col_of_row].sum())
    return Assignment(col_of_row, total)


def _dual_potentials(a: np.ndarray, col_of_row: np.ndarray):
    """
    Feasible potentials (u, v) for an optimal assignment.

    v is the shortest-path distance to each column in the residual graph
    (edge col_of_row[i] -> j weighs a[i, j] - a[i, col_of_row[i]]), relaxed
    Bellman-Ford style; u then makes every assigned edge tight.
    """
    n = a.shape[0]
    rows = np.arange(n)
    assigned = a[rows, col_of_row]
    w = a - assigned[:, None]
    v = np.zeros(n)
    for _ in range(n):
        relaxed = np.minimum(v, (v[col_of_row][:, None] + w).min(axis=0))
        if np.array_equal(relaxed, v):
            break
        v = relaxed
    u = assigned - v[col_of_row]
    return u, v


def _lexicographic_optimum(a, u, v, col_of_row):
    """Re-route the optimum among tight edges toward the smallest column sequence."""
    n = len(col_of_row)
    scale = max(1.0, float(np.abs(a).max()))
    tight = (a - u[:, None] - v[None, :]) <= TIGHT_TOL * scale
    row_of_col = np.empty(n, dtype=np.int64)
    row_of_col[col_of_row] = np.arange(n)
    fixed = np.zeros(n, dtype=bool)
    rows = np.arange(n)
    current_cost = a[rows, col_of_row].sum()

    for i in range(n):
        for j in np.flatnonzero(tight[i]):
            if j >= col_of_row[i]:
                break
            owner = row_of_col[j]
            if fixed[owner]:
                continue
            moves = _alternating_path(tight, owner, j, col_of_row[i], i, fixed, row_of_col)
            if moves is None:
                continue
            candidate = col_of_row.copy()
            candidate[i] = j
            for row, col in moves:
                candidate[row] = col
            cost = a[rows, candidate].sum()
            if cost > current_cost + COST_TOL * scale * n:
                continue
            col_of_row = candidate
            row_of_col[col_of_row] = rows
            current_cost = cost
            break
        fixed[i] = True
    return col_of_row


def _alternating_path(tight, start_row, claimed_col, release_col, claimant, fixed, row_of_col) -> Optional[list]:
    """
    Breadth-first search for rows that can shift along tight edges so that
    start_row gives up claimed_col and the chain ends on release_col.

    Returns:
        list of (row, new_col) moves, or None when no such chain exists
    """
    parent = {start_row: None}
    via = {}
    queue = deque([start_row])
    while queue:
        row = queue.popleft()
        for col in np.flatnonzero(tight[row]):
            if col == claimed_col:
                continue
            if col == release_col:
                moves = [(row, int(col))]
                back = row
                while parent[back] is not None:
                    prev = parent[back]
                    moves.append((prev, via[back]))
                    back = prev
                return moves
            nxt = int(row_of_col[col])
            if nxt == claimant or fixed[nxt] or nxt in parent:
                continue
            parent[nxt] = row
            via[nxt] = int(col)
            queue.append(nxt)
    return None
