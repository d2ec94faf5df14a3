"""Signal container and elementary 1-D signal operations.

Signals live on an integer sample grid ``start .. start + len - 1``
(1-based by default).  All functions here are pure.
"""

from __future__ import annotations

import math
from typing import Iterable, Union

import numpy as np

__all__ = [
    "Signal",
    "as_signal",
    "normalize_unit",
    "disambiguate",
    "smooth3",
    "correlation",
    "CORRELATION_METHODS",
    "min_lossless_thresholds",
    "read_signal_csv",
    "write_signal_csv",
]

CORRELATION_METHODS = ("pearson", "spearman", "kendall")

ArrayLike = Union["Signal", np.ndarray, Iterable[float]]


class Signal:
    """A finite real-valued sequence on an integer sample grid.

    Parameters
    ----------
    values : array_like
        Sample values.  Must be finite (no NaN or infinity).
    start : int
        Coordinate of the first sample (default 1).
    """

    __slots__ = ("values", "start")

    def __init__(self, values, start: int = 1):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1:
            v = v.reshape(-1)
        if v.size == 0:
            raise ValueError("signal must contain at least one sample")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal contains non-finite samples")
        self.values = v
        self.start = int(start)

    @property
    def end(self) -> int:
        return self.start + len(self.values) - 1

    @property
    def coords(self) -> np.ndarray:
        return np.arange(self.start, self.end + 1)

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Signal(len={len(self)}, start={self.start})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Signal)
            and self.start == other.start
            and np.array_equal(self.values, other.values)
        )


def as_signal(s: ArrayLike) -> Signal:
    """Coerce an array-like to a :class:`Signal` starting at coordinate 1."""
    if isinstance(s, Signal):
        return s
    return Signal(s)


def normalize_unit(s: ArrayLike) -> Signal:
    """Affinely map a signal onto [0, 1].

    Constant signals map to all zeros.
    """
    s = as_signal(s)
    lo = float(s.values.min())
    hi = float(s.values.max())
    if hi == lo:
        return Signal(np.zeros_like(s.values), s.start)
    return Signal((s.values - lo) / (hi - lo), s.start)


def disambiguate(s: ArrayLike) -> Signal:
    """Pad a signal with its minimum so both ends sit at the minimum.

    A sample equal to ``min(s)`` is prepended when the first sample
    differs from the minimum and appended when the last one does.
    Idempotent.
    """
    s = as_signal(s)
    lo = float(s.values.min())
    v = s.values
    start = s.start
    if v[0] != lo:
        v = np.concatenate(([lo], v))
        start -= 1
    if v[-1] != lo:
        v = np.concatenate((v, [lo]))
    return Signal(v, start)


def smooth3(s: ArrayLike) -> Signal:
    """Convolve with the 3-tap window [1/4, 1/2, 1/4].

    Boundary samples use the truncated window with renormalized
    weights, so constant signals are fixed points and the output stays
    within the input range.
    """
    s = as_signal(s)
    v = s.values
    if len(v) < 3:
        if len(v) == 2:
            out = np.array(
                [(2 * v[0] + v[1]) / 3.0, (v[0] + 2 * v[1]) / 3.0]
            )
            return Signal(out, s.start)
        return Signal(v.copy(), s.start)
    out = np.empty_like(v)
    out[1:-1] = 0.25 * v[:-2] + 0.5 * v[1:-1] + 0.25 * v[2:]
    out[0] = (2 * v[0] + v[1]) / 3.0
    out[-1] = (v[-2] + 2 * v[-1]) / 3.0
    return Signal(out, s.start)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.dot(xc, xc))
    sy = float(np.dot(yc, yc))
    if sx == 0.0 or sy == 0.0:
        # Undefined for constant sequences: identical constants count as
        # perfectly correlated, anything else as uncorrelated.
        if sx == 0.0 and sy == 0.0 and np.array_equal(x, y):
            return 1.0
        return 0.0
    r = float(np.dot(xc, yc) / (math.sqrt(sx) * math.sqrt(sy)))
    return min(1.0, max(-1.0, r))


def _midranks(x: np.ndarray) -> np.ndarray:
    from scipy.stats import rankdata

    return rankdata(x, method="average")


def _kendall_tau_a(x: np.ndarray, y: np.ndarray) -> float:
    n = len(x)
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    prod = dx * dy
    iu = np.triu_indices(n, k=1)
    s = float(prod[iu].sum())
    return s / (0.5 * n * (n - 1))


def correlation(x: ArrayLike, y: ArrayLike, method: str = "pearson") -> float:
    """Correlation index between two equal-length signals.

    ``pearson`` is the standard product-moment coefficient, ``spearman``
    applies it to midranks, ``kendall`` is the tau-a count
    ``(n_c - n_d) / (n (n - 1) / 2)`` where ties count as neither
    concordant nor discordant.
    """
    xv = as_signal(x).values
    yv = as_signal(y).values
    if len(xv) != len(yv):
        raise ValueError(f"length mismatch: {len(xv)} vs {len(yv)}")
    if len(xv) < 2:
        raise ValueError("correlation needs at least 2 samples")
    if method == "pearson":
        return _pearson(xv, yv)
    if method == "spearman":
        return _pearson(_midranks(xv), _midranks(yv))
    if method == "kendall":
        return _kendall_tau_a(xv, yv)
    raise ValueError(f"unknown correlation method: {method!r}")


def min_lossless_thresholds(s: ArrayLike, eps_min: float) -> int:
    """Threshold-count estimate for a lossless equally spaced decomposition.

    Computes ``(1/g) * sum(round(d_n / eps_min))`` over adjacent-sample
    absolute differences ``d_n``, with ``g`` the GCD of the nonzero
    rounded terms.  Zero terms are excluded from the GCD; the result is
    clamped to the minimum admissible threshold count 2.

    Note: on monotone staircase signals quantized with step ``eps_min``
    this equals the number of distinct levels minus one, i.e. it excludes
    the conventional zero-level operation; the exact-reconstruction
    sweep in the test suite documents the observed offset.
    """
    if eps_min <= 0:
        raise ValueError("eps_min must be positive")
    v = as_signal(s).values
    d = np.abs(np.diff(v))
    terms = np.rint(d / eps_min).astype(int)
    nz = terms[terms > 0]
    if nz.size == 0:
        return 2
    g = int(np.gcd.reduce(nz))
    k = int(terms.sum()) // g
    return max(k, 2)


def sample_at(s: Signal, xs: np.ndarray) -> np.ndarray:
    """Linear interpolation at fractional coordinates, clamped to the
    domain.  Exploits the uniform integer grid, so it costs O(len(xs))."""
    v = s.values
    pos = np.clip(np.asarray(xs, dtype=float) - s.start, 0.0, len(v) - 1.0)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(v) - 1)
    frac = pos - lo
    return v[lo] * (1.0 - frac) + v[hi] * frac


def read_signal_csv(path) -> Signal:
    """Read a signal from CSV: one value per line, optional ``value`` header."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if lineno == 1 and line.lower() == "value":
                continue
            try:
                x = float(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from exc
            if not math.isfinite(x):
                raise ValueError(f"{path}:{lineno}: non-finite entry {line!r}")
            values.append(x)
    if not values:
        raise ValueError(f"{path}: no samples found")
    return Signal(values)


def write_signal_csv(path, s: ArrayLike, header: bool = True) -> None:
    s = as_signal(s)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write("value\n")
        for x in s.values:
            fh.write(f"{float(x)!r}\n")
