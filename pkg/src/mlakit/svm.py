"""Kernel SVM trained by sequential minimal optimization on a
precomputed Gram matrix.

The dual is solved pairwise: each step picks the maximal-violating pair
under the KKT conditions, solves the two-variable subproblem in closed
form, clips to the box, and updates the gradient incrementally.
Multiclass goes one-vs-rest with argmax over decision values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

__all__ = ["BinarySvm", "SvmModel", "svm_train", "svm_predict", "KernelSvm"]

_SV_EPS = 1e-10


@dataclass
class BinarySvm:
    """One trained binary machine over the training Gram."""

    coef: np.ndarray  # alpha_i * y_i over all training points
    bias: float
    support: np.ndarray  # indices with alpha > 0
    alphas: np.ndarray
    objective: List[float] = field(default_factory=list, repr=False)

    def decision(self, kernel_row: np.ndarray) -> float:
        return float(np.dot(self.coef, kernel_row) + self.bias)


def _smo(kernel: np.ndarray, y: np.ndarray, c: float, tol: float,
         max_steps: int | None = None):
    """Maximal-violating-pair dual ascent.

    Minimizes ``0.5 a'Qa - 1'a`` with ``Q = yy' * K`` subject to the box
    and ``y'a = 0``.  Returns ``(alphas, bias, objective_trace)`` where
    the trace records the dual objective (the maximization form) after
    every pair update; each closed-form step increases it.
    """
    n = len(y)
    if max_steps is None:
        max_steps = max(2000, 200 * n)
    alphas = np.zeros(n)
    grad = -np.ones(n)  # gradient of the minimization objective
    objective = 0.0
    trace = [objective]
    for _ in range(max_steps):
        yg = -y * grad
        up = ((y > 0) & (alphas < c - 1e-12)) | ((y < 0) & (alphas > 1e-12))
        low = ((y > 0) & (alphas > 1e-12)) | ((y < 0) & (alphas < c - 1e-12))
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        j = int(np.argmin(np.where(low, yg, np.inf)))
        violation = yg[i] - yg[j]
        if violation < tol or i == j:
            break
        quad = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        quad = max(quad, 1e-12)
        step = violation / quad
        # box limits for the move alpha_i += y_i t, alpha_j -= y_j t
        lim_i = c - alphas[i] if y[i] > 0 else alphas[i]
        lim_j = alphas[j] if y[j] > 0 else c - alphas[j]
        step = min(step, lim_i, lim_j)
        if step <= 0:
            break
        alphas[i] += y[i] * step
        alphas[j] -= y[j] * step
        grad += step * y * (kernel[:, i] - kernel[:, j])
        objective += step * violation - 0.5 * step * step * quad
        trace.append(objective)
    yg = -y * grad
    free = (alphas > 1e-9) & (alphas < c - 1e-9)
    if free.any():
        bias = float(np.mean(yg[free]))
    else:
        up = ((y > 0) & (alphas < c - 1e-12)) | ((y < 0) & (alphas > 1e-12))
        low = ((y > 0) & (alphas > 1e-12)) | ((y < 0) & (alphas < c - 1e-12))
        hi = float(yg[up].max()) if up.any() else 0.0
        lo = float(yg[low].min()) if low.any() else 0.0
        bias = 0.5 * (hi + lo)
    return alphas, bias, trace


def train_binary(gram: np.ndarray, y: np.ndarray, c: float = 1.0,
                 tol: float = 1e-3) -> BinarySvm:
    """Train one binary machine; labels must be +-1."""
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise ValueError("binary labels must be +-1")
    alphas, bias, trace = _smo(np.asarray(gram, dtype=float), y, c, tol)
    support = np.where(alphas > _SV_EPS)[0]
    return BinarySvm(
        coef=alphas * y,
        bias=bias,
        support=support,
        alphas=alphas,
        objective=trace,
    )


@dataclass
class SvmModel:
    """One-vs-rest ensemble sharing one training Gram."""

    classes: List
    machines: List[BinarySvm]
    c: float
    tol: float
    n_train: int

    def decision_values(self, kernel_row: np.ndarray) -> np.ndarray:
        kernel_row = np.asarray(kernel_row, dtype=float)
        if kernel_row.shape != (self.n_train,):
            raise ValueError(
                f"kernel row must have length {self.n_train}, "
                f"got {kernel_row.shape}"
            )
        return np.array([m.decision(kernel_row) for m in self.machines])

    def to_json_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "C": self.c,
            "tol": self.tol,
            "n_train": self.n_train,
            "machines": [
                {
                    "support": m.support.tolist(),
                    "coef": m.coef[m.support].tolist(),
                    "bias": m.bias,
                }
                for m in self.machines
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())


def svm_train(gram, labels, c: float = 1.0, tol: float = 1e-3) -> SvmModel:
    """One-vs-rest SMO training on a precomputed symmetric Gram matrix."""
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError("gram must be square")
    if not np.allclose(gram, gram.T, atol=1e-8):
        raise ValueError("gram must be symmetric")
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    machines = []
    for cls in classes:
        y = np.where(labels == cls, 1.0, -1.0)
        machines.append(train_binary(gram, y, c, tol))
    return SvmModel(classes, machines, c, tol, gram.shape[0])


def svm_predict(model: SvmModel, kernel_row) -> object:
    """Label for one item given its kernel values against the training
    set; multiclass ties resolve toward the lower class index."""
    values = model.decision_values(kernel_row)
    if len(model.classes) == 2:
        # one-vs-rest on two classes reduces to the first machine's sign
        return model.classes[0] if values[0] >= 0 else model.classes[1]
    return model.classes[int(np.argmax(values))]


class KernelSvm(BaseEstimator, ClassifierMixin):
    """Estimator facade over the SMO trainer for precomputed kernels.

    ``fit`` takes the training Gram matrix, ``predict`` rows of kernel
    values against the training set (shape ``(n_items, n_train)``).
    """

    def __init__(self, C=1.0, tol=1e-3):
        self.C = C
        self.tol = tol

    def fit(self, X, y):
        self.model_ = svm_train(X, y, c=self.C, tol=self.tol)
        self.classes_ = np.asarray(self.model_.classes)
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return np.array([svm_predict(self.model_, row) for row in X])

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return np.stack([self.model_.decision_values(row) for row in X])
