"""One-class K-nearest-neighbor membership rule.

An element belongs to the target class when at least ``K`` training
items lie within dissimilarity ``phi`` of it.  Membership is monotone:
growing ``phi`` or shrinking ``K`` can only add members.
"""

from __future__ import annotations

from typing import Callable, Sequence, Tuple

import numpy as np

__all__ = ["OneClassKnn", "ocknn_classify", "ocknn_calibrate"]


class OneClassKnn:
    """Membership classifier over a positive-only training set."""

    def __init__(self, train: Sequence, dissimilarity: Callable, phi: float,
                 k: int):
        if phi < 0:
            raise ValueError("phi must be >= 0")
        if not 1 <= k <= len(train):
            raise ValueError("need 1 <= k <= len(train)")
        self.train = list(train)
        self.dissimilarity = dissimilarity
        self.phi = float(phi)
        self.k = int(k)

    def classify(self, x) -> int:
        return ocknn_classify(x, self.train, self.dissimilarity, self.phi,
                              self.k)

    def min_score(self, x) -> float:
        """Smallest phi at which x would be accepted with the current k."""
        d = sorted(self.dissimilarity(y, x) for y in self.train)
        return float(d[self.k - 1])


def ocknn_classify(x, train: Sequence, dissimilarity: Callable, phi: float,
                   k: int) -> int:
    """1 iff at least ``k`` training items are within ``phi`` of ``x``."""
    hits = 0
    for y in train:
        if dissimilarity(y, x) <= phi:
            hits += 1
            if hits >= k:
                return 1
    return 0


def ocknn_calibrate(train: Sequence, dissimilarity: Callable,
                    phi_grid=None, k_grid=None
                    ) -> Tuple[float, int, np.ndarray]:
    """Select (phi*, K*) by leave-one-out performance.

    ``M(phi, K)`` is the leave-one-out acceptance rate over the training
    set.  ``phi*`` is the smallest threshold attaining the best
    phi-marginal performance, ``K*`` the largest neighbor count with
    nonzero K-marginal performance.  Default grids: 50 linear steps from
    the minimum to the maximum pairwise dissimilarity, and K from 1 to
    the training size.

    Returns ``(phi_star, k_star, m_table)`` with ``m_table[i, j]``
    indexed by (phi, K).
    """
    n = len(train)
    if n < 2:
        raise ValueError("need at least 2 training items")
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = dissimilarity(train[i], train[j])
    off = d[~np.eye(n, dtype=bool)]
    if phi_grid is None:
        phi_grid = np.linspace(float(off.min()), float(off.max()), 50)
    else:
        phi_grid = np.asarray(phi_grid, dtype=float)
    if k_grid is None:
        k_grid = np.arange(1, n + 1)
    else:
        k_grid = np.asarray(k_grid, dtype=int)

    # leave-one-out: row i ranks distances to the other n-1 items
    others = np.sort(
        np.stack([np.delete(d[i], i) for i in range(n)]), axis=1
    )
    # counts[i, p] = how many training items are within phi_grid[p] of i
    counts = (others[:, :, None] <= phi_grid[None, None, :]).sum(axis=1)
    # m_table[p, q] = fraction of items accepted at (phi_p, K_q)
    m_table = (counts[:, :, None] >= k_grid[None, None, :]).mean(axis=0)

    p_of_phi = m_table.sum(axis=1)
    q_of_k = m_table.sum(axis=0)
    best = p_of_phi.max()
    phi_star = float(phi_grid[np.argmax(p_of_phi >= best - 1e-12)])
    nz = np.where(q_of_k > 0)[0]
    k_star = int(k_grid[nz[-1]]) if nz.size else int(k_grid[0])
    return phi_star, k_star, m_table
