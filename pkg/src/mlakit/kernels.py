"""Interval-tree and convolution kernels over signal decompositions.

A signal's interval representation becomes a rooted ordered tree by
nesting: the root is the domain, each interval hangs under the interval
one level below that contains it.  The tree kernel counts matching
nested fragments in the style of subtree-convolution kernels, with node
equality relaxed to an interval-length tolerance.  The convolution
kernel correlates per-level binary membership vectors through a sliding
window of levels, which makes it an explicit (finite) feature map and
therefore positive semi-definite by construction.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .signals import as_signal, normalize_unit
from .transform import IntervalRepresentation, horizontal_sampling

__all__ = [
    "TreeNode",
    "TreeKernelParams",
    "ConvKernelParams",
    "GramMatrix",
    "signal_to_tree",
    "tree_kernel",
    "signal_tree_kernel",
    "level_membership",
    "conv_kernel",
    "gram_matrix",
    "induced_distance",
    "distance_optimality",
]


@dataclass
class TreeNode:
    """Node of the interval tree; the root spans the whole domain."""

    start: float
    end: float
    level: int
    children: List["TreeNode"] = field(default_factory=list)

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def depth(self) -> int:
        return 1 + (max(c.depth() for c in self.children) if self.children else 0)

    def nodes(self):
        yield self
        for c in self.children:
            yield from c.nodes()

    def to_json_dict(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "level": self.level,
            "children": [c.to_json_dict() for c in self.children],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TreeNode":
        return cls(
            float(d["start"]),
            float(d["end"]),
            int(d["level"]),
            [cls.from_json_dict(c) for c in d["children"]],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "TreeNode":
        return cls.from_json_dict(json.loads(text))


def signal_to_tree(rep: IntervalRepresentation,
                   domain: Optional[Tuple[float, float]] = None) -> TreeNode:
    """Nest the representation's intervals under a full-domain root.

    Children are ordered by interval start; each interval at level k+1
    attaches to the level-k interval containing it.
    """
    a, b = domain if domain is not None else rep.domain
    root = TreeNode(float(a), float(b), 0)
    prev = [root]
    for lvl_intervals in rep.levels:
        cur = []
        pi = 0
        for iv in lvl_intervals:
            node = TreeNode(iv.start, iv.end, iv.level)
            mid = iv.mid
            while pi < len(prev) and prev[pi].end + 1e-9 < mid:
                pi += 1
            if pi == len(prev):
                raise ValueError("interval has no parent; malformed representation")
            prev[pi].children.append(node)
            cur.append(node)
        if cur:
            prev = cur
    return root


@dataclass
class TreeKernelParams:
    """Length tolerance, fragment decay, and normalization switch."""

    delta: float = 0.0
    decay: float = 1.0
    normalize: bool = False

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")


def _tree_kernel_raw(t1: TreeNode, t2: TreeNode, delta: float,
                     decay: float) -> float:
    n1 = list(t1.nodes())
    n2 = list(t2.nodes())
    memo: dict[Tuple[int, int], float] = {}

    def c(i: int, j: int) -> float:
        key = (i, j)
        hit = memo.get(key)
        if hit is not None:
            return hit
        a, b = n1[i], n2[j]
        val = 0.0
        if abs(a.length - b.length) <= delta:
            if a.is_leaf and b.is_leaf:
                val = decay
            elif not a.is_leaf and not b.is_leaf and len(a.children) == len(
                b.children
            ):
                val = decay
                for ca, cb in zip(a.children, b.children):
                    val *= 1.0 + c(idx1[id(ca)], idx2[id(cb)])
        memo[key] = val
        return val

    idx1 = {id(n): i for i, n in enumerate(n1)}
    idx2 = {id(n): i for i, n in enumerate(n2)}
    return float(sum(c(i, j) for i in range(len(n1)) for j in range(len(n2))))


def tree_kernel(t1: TreeNode, t2: TreeNode, params: TreeKernelParams) -> float:
    """Sum of matching-fragment counts over all node pairs.

    Nodes compare equal when their interval lengths differ by at most
    ``delta``; internal pairs additionally need equal child counts and
    multiply over child pairs.  ``decay`` in (0, 1] downweights large
    fragments.  With ``normalize`` the value is divided by the geometric
    mean of the self-kernels.
    """
    raw = _tree_kernel_raw(t1, t2, params.delta, params.decay)
    if not params.normalize:
        return raw
    s1 = _tree_kernel_raw(t1, t1, params.delta, params.decay)
    s2 = _tree_kernel_raw(t2, t2, params.delta, params.decay)
    if s1 <= 0 or s2 <= 0:
        return 0.0
    return raw / math.sqrt(s1 * s2)


def signal_tree_kernel(x, y, k: int, params: TreeKernelParams) -> float:
    """Tree kernel between two signals: normalize, decompose, nest, compare."""
    tx = signal_to_tree(horizontal_sampling(normalize_unit(x), k))
    ty = signal_to_tree(horizontal_sampling(normalize_unit(y), k))
    return tree_kernel(tx, ty, params)


@dataclass
class ConvKernelParams:
    """Window fraction for the level-sliding convolution kernel."""

    gamma: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")

    def window(self, k: int) -> Tuple[int, int]:
        """(np, hnp): window size forced even so hnp is integral."""
        np_ = max(2, 2 * round(self.gamma * k / 2.0))
        return np_, np_ // 2


def level_membership(rep: IntervalRepresentation, length: int) -> np.ndarray:
    """(K, length) binary matrix: row k marks samples 1..length covered
    by some level-(k+1) interval."""
    out = np.zeros((rep.k, length), dtype=np.int64)
    for lvl, ivs in enumerate(rep.levels):
        for iv in ivs:
            lo = max(1, math.ceil(iv.start - 1e-9))
            hi = min(length, math.floor(iv.end + 1e-9))
            if hi >= lo:
                out[lvl, lo - 1 : hi] = 1
    return out


def conv_kernel(x, y, k: int, gamma: float = 0.5) -> float:
    """Level-window correlation of two equal-length signals.

    For each admissible window center the per-level membership vectors
    inside the window are summed and the two sums combined by inner
    product, scaled by 1/np.  Signals are normalized and decomposed
    internally with ``k`` thresholds.
    """
    x = as_signal(x)
    y = as_signal(y)
    if len(x) != len(y):
        raise ValueError("signals must have equal length")
    if k < 2:
        raise ValueError("k must be >= 2")
    params = ConvKernelParams(gamma)
    bx = level_membership(horizontal_sampling(normalize_unit(x), k), len(x))
    by = level_membership(horizontal_sampling(normalize_unit(y), k), len(y))
    return _conv_from_membership(bx, by, k, params)


def _conv_from_membership(bx, by, k, params: ConvKernelParams) -> float:
    np_, hnp = params.window(k)
    total = 0.0
    for center in range(1 + hnp, k - hnp + 2):
        lo = center - hnp + 1
        hi = center + hnp - 1
        wx = bx[lo - 1 : hi].sum(axis=0)
        wy = by[lo - 1 : hi].sum(axis=0)
        total += float(np.dot(wx, wy)) / np_
    return total


class GramMatrix:
    """Pairwise kernel values with item identifiers and a PSD check."""

    def __init__(self, matrix, ids=None):
        self.matrix = np.asarray(matrix, dtype=float)
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n):
            raise ValueError("gram matrix must be square")
        if not np.allclose(self.matrix, self.matrix.T, atol=1e-9):
            raise ValueError("gram matrix must be symmetric")
        self.ids = list(ids) if ids is not None else [str(i) for i in range(n)]
        if len(self.ids) != n:
            raise ValueError("ids length must match matrix size")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def psd_report(self) -> dict:
        eig = np.linalg.eigvalsh(self.matrix)
        lo, hi = float(eig[0]), float(eig[-1])
        return {
            "min_eigenvalue": lo,
            "max_eigenvalue": hi,
            "psd_ok": bool(lo >= -1e-8 * max(hi, 1e-30)),
        }

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("," + ",".join(self.ids) + "\n")
            for i, row in enumerate(self.matrix):
                fh.write(
                    self.ids[i]
                    + ","
                    + ",".join(repr(float(v)) for v in row)
                    + "\n"
                )

    @classmethod
    def from_csv(cls, path) -> "GramMatrix":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")[1:]
            rows = []
            for line in fh:
                parts = line.strip().split(",")
                rows.append([float(v) for v in parts[1:]])
        return cls(np.array(rows), header)


def gram_matrix(items: Sequence, kernel: Callable, ids=None,
                threads: int = 1) -> GramMatrix:
    """Symmetric matrix of kernel values over a list of items.

    The kernel must be symmetric; only the upper triangle is computed.
    ``threads`` parallelizes upper-triangle entries; assembly order is
    fixed, so results do not depend on it.
    """
    n = len(items)
    mat = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(
                pool.map(lambda p: kernel(items[p[0]], items[p[1]]), pairs)
            )
    else:
        values = [kernel(items[i], items[j]) for i, j in pairs]
    for (i, j), v in zip(pairs, values):
        mat[i, j] = v
        mat[j, i] = v
    return GramMatrix(mat, ids)


def induced_distance(g: GramMatrix) -> np.ndarray:
    """Distance matrix ``sqrt(k_ii + k_jj - 2 k_ij)``.

    Radicands in [-1e-9 * scale, 0) clamp to zero; anything more
    negative means the kernel is not positive semi-definite on this set
    and raises.
    """
    k = g.matrix
    d = np.diag(k)
    sq = d[:, None] + d[None, :] - 2.0 * k
    tol = 1e-9 * max(1.0, float(np.abs(d).max()))
    if sq.min() < -tol:
        raise ValueError("kernel not PSD on this set: negative squared distance")
    return np.sqrt(np.clip(sq, 0.0, None))


def distance_optimality(d: np.ndarray, literal: bool = False) -> float:
    """Average displacement of each item's nearest neighbor from
    temporal adjacency; 0 when every nearest neighbor is adjacent.

    The default form averages ``(|i - j| - 1) / (n - 2)`` over rows with
    ``j`` the off-diagonal argmin (ties to the smaller index).  With
    ``literal=True`` the printed source form ``sum |i - j - 1| / (n-2)``
    is used instead, which is direction-asymmetric and unnormalized; it
    is kept for comparison only.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if d.shape != (n, n) or n < 3:
        raise ValueError("need a square distance matrix with n >= 3")
    masked = d.copy()
    np.fill_diagonal(masked, np.inf)
    nearest = np.argmin(masked, axis=1)
    i = np.arange(n)
    if literal:
        return float(np.sum(np.abs(i - nearest - 1)) / (n - 2))
    return float(np.mean((np.abs(i - nearest) - 1.0) / (n - 2)))
