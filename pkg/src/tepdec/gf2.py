"""Dense GF(2) linear algebra on uint8 numpy arrays."""
from __future__ import annotations

import numpy as np


def rref(a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of a over GF(2).

    Returns (reduced copy, pivot column list); rank = len(pivots).
    """
    a = (np.asarray(a) & 1).astype(np.uint8, copy=True)
    m, n = a.shape
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        hits = np.nonzero(a[row:, col])[0]
        if hits.size == 0:
            continue
        p = row + int(hits[0])
        if p != row:
            a[[row, p]] = a[[p, row]]
        others = np.nonzero(a[:, col])[0]
        others = others[others != row]
        if others.size:
            a[others] ^= a[row]
        pivots.append(col)
        row += 1
    return a, pivots


def rank(a: np.ndarray) -> int:
    return len(rref(a)[1])


def solve_unique(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Solve a @ x = b over GF(2) when the solution is unique.

    Returns the solution vector, or None when a is column-rank deficient
    (solution not unique) or the system is inconsistent.
    """
    a = (np.asarray(a) & 1).astype(np.uint8)
    b = (np.asarray(b).reshape(-1, 1) & 1).astype(np.uint8)
    m, n = a.shape
    aug = np.concatenate([a, b], axis=1)
    red, pivots = rref(aug)
    if n in pivots:
        return None  # inconsistent: pivot in the constant column
    if len(pivots) < n:
        return None  # free columns: many solutions
    x = np.zeros(n, dtype=np.uint8)
    for r, c in enumerate(pivots):
        x[c] = red[r, n]
    return x
