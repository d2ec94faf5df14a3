"""Horizontal sampling: multi-threshold interval decomposition of signals.

The decomposition slices a [0, 1]-normalized signal at ``K`` equally
spaced thresholds ``phi_k = (k - 1) / (K - 1)`` and records, per level,
the maximal intervals where the signal meets the threshold from above.
Level 1 (``phi = 0``) is by convention the single full-domain interval.

Interval extraction at levels >= 2 works on the piecewise-linear
interpolant of the (disambiguated) samples and distinguishes three
features per threshold ``phi``:

* closures of connected components of ``{x : f(x) > phi}``, with
  fractional endpoints located by linear interpolation;
* sample runs where ``f == phi`` pinched between two such components
  (the components stay split there, sharing the touch coordinate);
* sample runs where ``f == phi`` not covered by any component closure,
  kept as their own (possibly degenerate) intervals.

The touch-run rule is what makes the representation invertible on
quantized signals: a plateau sitting exactly at a threshold and a dip
below it produce different interval sets, so reconstruction can tell
them apart.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .signals import Signal, as_signal, correlation, disambiguate, normalize_unit

__all__ = [
    "Interval",
    "IntervalRepresentation",
    "horizontal_sampling",
    "reconstruct",
    "interval_count_bound",
    "calibrate_k",
    "CalibrationRow",
]

_EQ_TOL = 1e-12


class Interval:
    """A threshold-level interval in fractional sample coordinates."""

    __slots__ = ("start", "end", "level", "threshold")

    def __init__(self, start: float, end: float, level: int, threshold: float):
        self.start = start
        self.end = end
        self.level = level
        self.threshold = threshold

    @property
    def width(self) -> float:
        return self.end - self.start

    @property
    def mid(self) -> float:
        return 0.5 * (self.start + self.end)

    def contains(self, x: float) -> bool:
        return self.start - 1e-9 <= x <= self.end + 1e-9

    def __repr__(self) -> str:  # pragma: no cover
        return (
            f"Interval({self.start:g}, {self.end:g}, "
            f"level={self.level}, threshold={self.threshold:g})"
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Interval)
            and (self.start, self.end, self.level, self.threshold)
            == (other.start, other.end, other.level, other.threshold)
        )

    def __hash__(self) -> int:
        return hash((self.start, self.end, self.level, self.threshold))


class IntervalRepresentation:
    """Per-threshold interval lists of a signal.

    Attributes
    ----------
    k : int
        Number of threshold operations (>= 2).
    thresholds : ndarray
        The K equally spaced threshold values.
    levels : list of list of Interval
        ``levels[0]`` holds the single full-domain interval.
    domain : (int, int)
        Integer coordinates of the disambiguated domain.
    """

    def __init__(self, k, thresholds, levels, domain):
        self.k = int(k)
        self.thresholds = np.asarray(thresholds, dtype=float)
        self.levels: List[List[Interval]] = levels
        self.domain = (int(domain[0]), int(domain[1]))

    @property
    def source_length(self) -> int:
        return self.domain[1] - self.domain[0] + 1

    def total_intervals(self) -> int:
        return sum(len(lv) for lv in self.levels)

    def all_intervals(self):
        for lv in self.levels:
            yield from lv

    def to_json_dict(self) -> dict:
        return {
            "K": self.k,
            "thresholds": [float(t) for t in self.thresholds],
            "levels": [
                [{"start": iv.start, "end": iv.end} for iv in lv]
                for lv in self.levels
            ],
            "source_length": self.source_length,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "IntervalRepresentation":
        k = int(d["K"])
        thr = [float(t) for t in d["thresholds"]]
        # level 1 is the full disambiguated domain, so it carries the grid
        a = int(round(d["levels"][0][0]["start"]))
        b = a + int(d["source_length"]) - 1
        levels = []
        for lvl, ivs in enumerate(d["levels"], start=1):
            levels.append(
                [
                    Interval(float(iv["start"]), float(iv["end"]), lvl, thr[lvl - 1])
                    for iv in ivs
                ]
            )
        return cls(k, thr, levels, (a, b))

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "IntervalRepresentation":
        return cls.from_json_dict(json.loads(text))


def _above_components(coords, v, phi) -> List[Tuple[float, float]]:
    """Closures of the connected components of {f > phi}.

    Components are split at interior samples (or sample runs) where the
    signal equals ``phi`` exactly; split pieces share that coordinate.
    """
    n = len(v)
    above = v > phi + _EQ_TOL
    if not above.any():
        return []
    eq = np.abs(v - phi) <= _EQ_TOL
    pad = np.concatenate(([False], above, [False]))
    entries = np.where(above & ~pad[:-2])[0]
    exits = np.where(above & ~pad[2:])[0]

    prev = np.maximum(entries - 1, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_in = (phi - v[prev]) / (v[entries] - v[prev])
    starts = np.where(
        entries == 0,
        float(coords[0]),
        np.where(eq[prev], coords[prev], coords[prev] + t_in),
    )
    nxt = np.minimum(exits + 1, n - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_out = (phi - v[exits]) / (v[nxt] - v[exits])
    ends = np.where(
        exits == n - 1,
        float(coords[n - 1]),
        np.where(eq[nxt], coords[nxt], coords[exits] + t_out),
    )
    return list(zip(starts.tolist(), ends.tolist()))


def _touch_runs(coords, v, phi, comps) -> List[Tuple[float, float]]:
    """Maximal {f == phi} sample runs carrying information the component
    closures miss.

    A run is kept only if some of its samples lies in no component
    closure; runs whose every sample doubles as a closure endpoint are
    redundant (and counting them would overshoot the worst-case interval
    bound)."""
    eq = np.abs(v - phi) <= _EQ_TOL
    if not eq.any():
        return []
    pad = np.concatenate(([False], eq, [False]))
    run_starts = np.where(eq & ~pad[:-2])[0]
    run_ends = np.where(eq & ~pad[2:])[0]
    if comps:
        cs = np.array([c[0] for c in comps])
        ce = np.array([c[1] for c in comps])
    out = []
    for i, j in zip(run_starts, run_ends):
        if comps:
            xs = coords[i : j + 1]
            k = np.searchsorted(cs, xs + _EQ_TOL) - 1
            covered = (k >= 0) & (xs <= ce[np.maximum(k, 0)] + _EQ_TOL)
            needed = not covered.all()
        else:
            needed = True
        if needed:
            out.append((float(coords[i]), float(coords[j])))
    return out


def horizontal_sampling(s, k: int) -> IntervalRepresentation:
    """Decompose a normalized signal into K threshold-level interval lists.

    Parameters
    ----------
    s : Signal or array_like
        Input with values in [0, 1] attaining 0 somewhere (apply
        :func:`normalize_unit` first).  The signal is disambiguated
        internally.
    k : int
        Number of equally spaced thresholds, at least 2.

    Returns
    -------
    IntervalRepresentation
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    s = as_signal(s)
    v = s.values
    if v.min() < -1e-9 or v.max() > 1 + 1e-9:
        raise ValueError("signal must be normalized to [0, 1]")
    if v.min() > 1e-9:
        raise ValueError("signal must attain 0; apply normalize_unit first")
    sd = disambiguate(s)
    coords = sd.coords
    vd = sd.values
    thr = np.arange(k) / (k - 1)
    levels: List[List[Interval]] = [
        [Interval(float(sd.start), float(sd.end), 1, 0.0)]
    ]
    for lvl in range(2, k + 1):
        phi = float(thr[lvl - 1])
        comps = _above_components(coords, vd, phi)
        touches = _touch_runs(coords, vd, phi, comps)
        ivs = [Interval(a, b, lvl, phi) for a, b in comps]
        ivs.extend(Interval(a, b, lvl, phi) for a, b in touches)
        ivs.sort(key=lambda iv: (iv.start, iv.end))
        levels.append(ivs)
    return IntervalRepresentation(k, thr, levels, (sd.start, sd.end))


def reconstruct(rep: IntervalRepresentation, length: int | None = None) -> Signal:
    """Rebuild a signal from its interval representation.

    Collects every interval endpoint as a point ``(x, phi_level)``,
    dedupes by coordinate keeping the highest threshold, adds zero
    anchors at integer positions covered by no level >= 2 interval, and
    linearly interpolates at the integer sample grid of the
    (disambiguated) domain.
    """
    if not rep.levels or not rep.levels[0]:
        raise ValueError("empty interval representation")
    if length is not None and length != rep.source_length:
        raise ValueError(
            f"length {length} does not match representation source_length "
            f"{rep.source_length}"
        )
    a, b = rep.domain
    pts: dict[float, float] = {}
    for iv in rep.all_intervals():
        y = iv.threshold
        for x in (iv.start, iv.end):
            if pts.get(x, -1.0) < y:
                pts[x] = y
    grid = np.arange(a, b + 1)
    covered = np.zeros(len(grid), dtype=bool)
    for lv in rep.levels[1:]:
        for iv in lv:
            lo = max(a, math.ceil(iv.start - 1e-9))
            hi = min(b, math.floor(iv.end + 1e-9))
            if hi >= lo:
                covered[lo - a : hi - a + 1] = True
    for x, cov in zip(grid, covered):
        if not cov and float(x) not in pts:
            pts[float(x)] = 0.0
    xs = np.array(sorted(pts))
    ys = np.array([pts[x] for x in xs])
    out = np.interp(grid, xs, ys)
    return Signal(np.clip(out, 0.0, 1.0), a)


def interval_count_bound(length: int, k: int) -> Tuple[int, int]:
    """Worst-case interval count and endpoint-number count.

    Returns ``(i_max, n_max)`` where ``i_max = ceil(L/2) * (K-1) + 1``
    and ``n_max = 2 * i_max``.
    """
    if length < 3:
        raise ValueError("length must be >= 3")
    if k < 2:
        raise ValueError("k must be >= 2")
    half = (length + 1) // 2
    i_max = half * (k - 1) + 1
    return i_max, 2 * i_max


@dataclass
class CalibrationRow:
    k: int
    rho_bar: float
    ms_bar: float
    score: float


def _missing_probes(rep: IntervalRepresentation, start: int, end: int) -> int:
    """Count integer sample coordinates in [start, end] that coincide
    with no interval endpoint at any level."""
    hit = set()
    for iv in rep.all_intervals():
        for x in (iv.start, iv.end):
            r = round(x)
            if abs(x - r) <= 1e-9 and start <= r <= end:
                hit.add(int(r))
    return (end - start + 1) - len(hit)


def calibrate_k(fragments: Sequence, k_max: int):
    """Sweep the threshold count and score reconstruction fidelity.

    For each ``k`` in ``2..k_max`` every fragment is normalized,
    decomposed and reconstructed.  ``rho_bar`` is the average of
    ``(1 + rho^2) / 2`` with ``rho`` the Pearson correlation between the
    disambiguated original and its reconstruction (note the square makes
    the score sign-blind; an anticorrelated reconstruction rates just as
    high).  ``ms_bar`` is the average number of original sample indices
    contributing no interval endpoint.  The suggested ``k`` maximizes
    ``rho_bar(k) - ms_bar(k) / mean_length``, smallest ``k`` on ties.

    Returns
    -------
    (rows, suggested_k) : (list of CalibrationRow, int)
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    frags = [normalize_unit(f) for f in fragments]
    if not frags:
        raise ValueError("no fragments given")
    mean_len = float(np.mean([len(f) for f in frags]))
    rows = []
    for k in range(2, k_max + 1):
        rhos = []
        mss = []
        for f in frags:
            rep = horizontal_sampling(f, k)
            rec = reconstruct(rep)
            orig = disambiguate(f)
            rho = correlation(orig.values, rec.values, "pearson")
            rhos.append((1.0 + rho * rho) / 2.0)
            mss.append(_missing_probes(rep, f.start, f.end))
        rho_bar = float(np.mean(rhos))
        ms_bar = float(np.mean(mss))
        rows.append(CalibrationRow(k, rho_bar, ms_bar, rho_bar - ms_bar / mean_len))
    best = max(rows, key=lambda r: (r.score, -r.k))
    return rows, best.k
