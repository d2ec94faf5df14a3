"""Gaussian-emission hidden Markov model with the nucleosome topology.

States emit real values through per-state Gaussians; all recursions run
in log space, so sequences thousands of probes long neither underflow
nor need rescaling.  The nucleosome topology wires one linker state with
a self loop, an 8-state well-positioned chain that can exit back to the
linker after 6, 7 or 8 steps, and a 9-state delocalized chain whose last
state loops.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .signals import as_signal

__all__ = [
    "Hmm",
    "HmmPosteriors",
    "build_nucleosome_topology",
    "forward_backward",
    "viterbi",
    "baum_welch",
    "NucleosomeHmm",
]

_LOG_EPS = -1e300
_VAR_FLOOR = 1e-6


def _logsumexp(a, axis=None):
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out)
    return np.squeeze(out, axis=axis)


@dataclass
class Hmm:
    """Model tuple: transition matrix, initial distribution, Gaussian
    emissions, and state labels."""

    labels: List[str]
    trans: np.ndarray
    start: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.trans = np.asarray(self.trans, dtype=float)
        self.start = np.asarray(self.start, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.variances = np.asarray(self.variances, dtype=float)
        n = len(self.labels)
        if self.trans.shape != (n, n):
            raise ValueError("transition matrix shape mismatch")
        if not np.allclose(self.trans.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("transition rows must sum to 1")
        if not np.isclose(self.start.sum(), 1.0, atol=1e-9):
            raise ValueError("initial distribution must sum to 1")
        if np.any(self.variances <= 0):
            raise ValueError("variances must be positive")

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def log_emission(self, obs: np.ndarray) -> np.ndarray:
        """(T, N) log densities."""
        x = obs[:, None]
        var = self.variances[None, :]
        return -0.5 * (np.log(2 * np.pi * var) + (x - self.means[None, :]) ** 2 / var)

    def to_json_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "A": self.trans.tolist(),
            "pi": self.start.tolist(),
            "emissions": [
                {"mu": float(m), "sigma2": float(v)}
                for m, v in zip(self.means, self.variances)
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Hmm":
        return cls(
            labels=list(d["labels"]),
            trans=np.array(d["A"], dtype=float),
            start=np.array(d["pi"], dtype=float),
            means=np.array([e["mu"] for e in d["emissions"]]),
            variances=np.array([e["sigma2"] for e in d["emissions"]]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "Hmm":
        return cls.from_json_dict(json.loads(text))


@dataclass
class HmmPosteriors:
    log_likelihood: float
    log_alpha: np.ndarray
    log_beta: np.ndarray
    gamma: np.ndarray
    log_xi: Optional[np.ndarray] = field(default=None, repr=False)


def build_nucleosome_topology(init_stats: dict) -> Hmm:
    """18-state model: L, N1..N8, DN1..DN9.

    Allowed transitions: L loops or enters N1/DN1; the N chain advances
    and exits to L from N6, N7 or N8 (dwell 6 to 8); the DN chain
    advances, DN9 loops and exits to L (dwell >= 9).  The start
    distribution is concentrated on L.

    ``init_stats`` provides ``linker_mean``, ``linker_var``,
    ``nucleosome_mean``, ``nucleosome_var`` for the initial emissions.
    """
    labels = ["L"] + [f"N{i}" for i in range(1, 9)] + [f"DN{i}" for i in range(1, 10)]
    idx = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    a = np.zeros((n, n))
    a[idx["L"], idx["L"]] = 0.8
    a[idx["L"], idx["N1"]] = 0.1
    a[idx["L"], idx["DN1"]] = 0.1
    for i in range(1, 6):
        a[idx[f"N{i}"], idx[f"N{i + 1}"]] = 1.0
    a[idx["N6"], idx["N7"]] = 0.5
    a[idx["N6"], idx["L"]] = 0.5
    a[idx["N7"], idx["N8"]] = 0.5
    a[idx["N7"], idx["L"]] = 0.5
    a[idx["N8"], idx["L"]] = 1.0
    for i in range(1, 9):
        a[idx[f"DN{i}"], idx[f"DN{i + 1}"]] = 1.0
    a[idx["DN9"], idx["DN9"]] = 0.5
    a[idx["DN9"], idx["L"]] = 0.5
    start = np.zeros(n)
    start[idx["L"]] = 1.0
    means = np.full(n, float(init_stats["nucleosome_mean"]))
    means[idx["L"]] = float(init_stats["linker_mean"])
    variances = np.full(n, float(init_stats["nucleosome_var"]))
    variances[idx["L"]] = float(init_stats["linker_var"])
    return Hmm(labels, a, start, means, np.maximum(variances, _VAR_FLOOR))


def _log_clean(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), -np.inf)


def forward_backward(hmm: Hmm, obs, want_xi: bool = False) -> HmmPosteriors:
    """Log-space forward and backward recursions.

    Impossible sequences report ``log_likelihood = -inf`` without
    raising.
    """
    x = as_signal(obs).values
    t_len = len(x)
    log_b = hmm.log_emission(x)
    log_a = _log_clean(hmm.trans)
    log_pi = _log_clean(hmm.start)
    n = hmm.n_states

    log_alpha = np.empty((t_len, n))
    log_alpha[0] = log_pi + log_b[0]
    for t in range(1, t_len):
        log_alpha[t] = (
            _logsumexp(log_alpha[t - 1][:, None] + log_a, axis=0) + log_b[t]
        )
    loglik = _logsumexp(log_alpha[-1])

    log_beta = np.empty((t_len, n))
    log_beta[-1] = 0.0
    for t in range(t_len - 2, -1, -1):
        log_beta[t] = _logsumexp(
            log_a + (log_b[t + 1] + log_beta[t + 1])[None, :], axis=1
        )

    if np.isfinite(loglik):
        gamma = np.exp(log_alpha + log_beta - loglik)
    else:
        gamma = np.full((t_len, n), np.nan)

    log_xi = None
    if want_xi and t_len > 1 and np.isfinite(loglik):
        log_xi = (
            log_alpha[:-1, :, None]
            + log_a[None, :, :]
            + (log_b[1:] + log_beta[1:])[:, None, :]
            - loglik
        )
    return HmmPosteriors(float(loglik), log_alpha, log_beta, gamma, log_xi)


def viterbi(hmm: Hmm, obs):
    """Most likely state path and its binary region labels.

    Returns ``(path, labels, log_prob)`` where labels mark linker states
    as 0 and every nucleosome state as 1.  Ties break toward the lower
    state index.
    """
    x = as_signal(obs).values
    t_len = len(x)
    log_b = hmm.log_emission(x)
    log_a = _log_clean(hmm.trans)
    log_pi = _log_clean(hmm.start)
    n = hmm.n_states

    delta = log_pi + log_b[0]
    back = np.zeros((t_len, n), dtype=int)
    for t in range(1, t_len):
        cand = delta[:, None] + log_a
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(n)] + log_b[t]
    last = int(np.argmax(delta))
    log_prob = float(delta[last])
    path = np.empty(t_len, dtype=int)
    path[-1] = last
    for t in range(t_len - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    labels = np.array(
        [0 if hmm.labels[s] == "L" else 1 for s in path], dtype=np.uint8
    )
    return path, labels, log_prob


def baum_welch(hmm: Hmm, obs_list: Sequence, max_iters: int = 20,
               tol: float = 1e-4):
    """Expectation-maximization re-estimation over one or more sequences.

    Structural zeros in the transition matrix and start distribution are
    preserved.  Per-state Gaussians are refit from posterior-weighted
    moments with the variance floored at 1e-6.  Returns
    ``(trained, trace)`` with the total log-likelihood per iteration;
    the trace is non-decreasing up to numerical slack.
    """
    if not obs_list:
        raise ValueError("need at least one observation sequence")
    seqs = [as_signal(o).values for o in obs_list]
    cur = Hmm(
        hmm.labels,
        hmm.trans.copy(),
        hmm.start.copy(),
        hmm.means.copy(),
        hmm.variances.copy(),
    )
    n = cur.n_states
    trace = []
    for _ in range(max_iters):
        total_ll = 0.0
        trans_num = np.zeros((n, n))
        trans_den = np.zeros(n)
        start_acc = np.zeros(n)
        w_sum = np.zeros(n)
        wx_sum = np.zeros(n)
        wxx_sum = np.zeros(n)
        for x in seqs:
            post = forward_backward(cur, x, want_xi=True)
            if not np.isfinite(post.log_likelihood):
                raise ValueError("observation sequence impossible under model")
            total_ll += post.log_likelihood
            g = post.gamma
            start_acc += g[0]
            if post.log_xi is not None:
                trans_num += np.exp(_logsumexp(post.log_xi, axis=0))
                trans_den += g[:-1].sum(axis=0)
            w_sum += g.sum(axis=0)
            wx_sum += g.T @ x
            wxx_sum += g.T @ (x * x)
        trace.append(total_ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            break

        new_trans = cur.trans.copy()
        rows = trans_den > 0
        new_trans[rows] = trans_num[rows] / trans_den[rows, None]
        # keep rows stochastic even where a state was never visited
        norm = new_trans.sum(axis=1, keepdims=True)
        np.divide(new_trans, norm, out=new_trans, where=norm > 0)

        new_start = start_acc / len(seqs)
        s = new_start.sum()
        if s > 0:
            new_start = new_start / s

        new_means = cur.means.copy()
        new_vars = cur.variances.copy()
        seen = w_sum > 1e-12
        new_means[seen] = wx_sum[seen] / w_sum[seen]
        second = np.zeros(n)
        second[seen] = wxx_sum[seen] / w_sum[seen] - new_means[seen] ** 2
        if np.any(second[seen & (w_sum > 1.0)] < _VAR_FLOOR):
            warnings.warn("variance floor engaged during re-estimation")
        new_vars[seen] = np.maximum(second[seen], _VAR_FLOOR)

        cur = Hmm(cur.labels, new_trans, new_start, new_means, new_vars)
    return cur, trace


class NucleosomeHmm:
    """Trainable nucleosome-topology model with a fit/decode surface.

    Initial emissions are seeded from observation quantiles (linker low,
    nucleosome high) and refined by expectation maximization.
    """

    def __init__(self, max_iters: int = 15, tol: float = 1e-3):
        self.max_iters = max_iters
        self.tol = tol

    def fit(self, X):
        seqs = [as_signal(x).values for x in (X if isinstance(X, (list, tuple)) else [X])]
        allx = np.concatenate(seqs)
        var = float(np.var(allx))
        var = max(var, _VAR_FLOOR)
        init = {
            "linker_mean": float(np.percentile(allx, 20)),
            "linker_var": var,
            "nucleosome_mean": float(np.percentile(allx, 80)),
            "nucleosome_var": var,
        }
        model = build_nucleosome_topology(init)
        self.model_, self.trace_ = baum_welch(
            model, seqs, max_iters=self.max_iters, tol=self.tol
        )
        return self

    def predict(self, x):
        _, labels, _ = viterbi(self.model_, x)
        return labels

    def score(self, x) -> float:
        return forward_backward(self.model_, x).log_likelihood
