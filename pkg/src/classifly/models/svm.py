"""One-vs-all soft-margin SVM trained with simplified SMO.

The kernel is cubic polynomial, ``K(u, v) = (u.v/d + 1)^3`` on standardized
inputs; dividing the inner product by the feature dimension keeps SMO
stable on high-dimensional vectors. Each binary subproblem runs Platt-style
SMO with an error cache: sweep all samples, pick a random partner for every
KKT violator, and stop after ``max_passes`` consecutive sweeps without an
update. Hitting ``max_sweeps`` first returns the best-so-far solution with
``converged=False`` recorded on the model.

Per-class confidence scores are a softmax over the decision values. That
is a ranking convention, not calibrated probabilities.
"""

from __future__ import annotations

import logging

import numpy as np

from ..errors import DegenerateLabels, TooFewSamples
from .base import Dataset, Standardizer

logger = logging.getLogger(__name__)

CUBIC_DEGREE = 3
DEFAULT_C = 4.795


def _cubic_gram(A, B, d):
    return (A @ B.T / d + 1.0) ** CUBIC_DEGREE


def _smo_binary(G, y, C, tol, max_passes, max_sweeps, rng):
    """Simplified SMO on a precomputed Gram matrix; returns (alpha, b, converged).

    The partner for a KKT violator is chosen by the largest |E_i - E_j|
    (Platt's second-choice heuristic) with one random retry, which avoids
    the slow oscillating tail of purely random pairing. Multipliers within
    1e-12 of a bound are snapped onto it so numerical dust never counts as
    a violation.
    """
    n = y.size
    alpha = np.zeros(n)
    b = 0.0
    f = np.zeros(n)  # cache of sum_j alpha_j y_j K_ij

    def take_step(i, j, E_i):
        nonlocal b, f
        if i == j:
            return False
        E_j = f[j] + b - y[j]
        a_i, a_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            low, high = max(0.0, a_j - a_i), min(C, C + a_j - a_i)
        else:
            low, high = max(0.0, a_i + a_j - C), min(C, a_i + a_j)
        if low == high:
            return False
        eta = 2.0 * G[i, j] - G[i, i] - G[j, j]
        if eta >= 0:
            return False
        a_j_new = float(np.clip(a_j - y[j] * (E_i - E_j) / eta, low, high))
        if a_j_new < 1e-12:
            a_j_new = 0.0
        elif a_j_new > C - 1e-12:
            a_j_new = C
        if abs(a_j_new - a_j) < 1e-5:
            return False
        a_i_new = a_i + y[i] * y[j] * (a_j - a_j_new)
        if a_i_new < 1e-12:
            a_i_new = 0.0
        elif a_i_new > C - 1e-12:
            a_i_new = C
        b1 = b - E_i - y[i] * (a_i_new - a_i) * G[i, i] - y[j] * (a_j_new - a_j) * G[i, j]
        b2 = b - E_j - y[i] * (a_i_new - a_i) * G[i, j] - y[j] * (a_j_new - a_j) * G[j, j]
        alpha[i], alpha[j] = a_i_new, a_j_new
        f += (a_i_new - a_i) * y[i] * G[:, i] + (a_j_new - a_j) * y[j] * G[:, j]
        if 0.0 < a_i_new < C:
            b = b1
        elif 0.0 < a_j_new < C:
            b = b2
        else:
            b = (b1 + b2) / 2.0
        return True

    quiet_passes = 0
    for _ in range(max_sweeps):
        changed = 0
        for i in range(n):
            E_i = f[i] + b - y[i]
            r = y[i] * E_i
            if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0)):
                continue
            j = int(np.argmax(np.abs((f + b - y) - E_i)))
            if take_step(i, j, E_i):
                changed += 1
                continue
            # Platt's fallback: rotate through every partner from a random start.
            start = int(rng.integers(n))
            for offset in range(n):
                if take_step(i, (start + offset) % n, E_i):
                    changed += 1
                    break
        if changed == 0:
            quiet_passes += 1
            if quiet_passes >= max_passes:
                return alpha, b, True
        else:
            quiet_passes = 0
    return alpha, b, False


class SvmModel:
    variant = "svm"

    def __init__(self, standardizer, sv_x, sv_coef, bias, converged, class_names, C, kernel_dim):
        self.standardizer = standardizer
        self.kernel_dim = int(kernel_dim)
        self.sv_x = [np.asarray(x, dtype=float).reshape(-1, self.kernel_dim) for x in sv_x]
        self.sv_coef = [np.asarray(c, dtype=float) for c in sv_coef]
        self.bias = [float(b) for b in bias]
        self.converged = [bool(c) for c in converged]
        self.class_names = list(class_names)
        self.C = float(C)
        # Transient diagnostics (full dual vectors); populated by svm_train,
        # not serialized, used by KKT checks in tests.
        self.training_alphas: list[np.ndarray] | None = None

    @property
    def all_converged(self):
        return all(self.converged)

    def decision_batch(self, X):
        Xs = self.standardizer.transform(X)
        columns = []
        for sv, coef, b in zip(self.sv_x, self.sv_coef, self.bias):
            if sv.size:
                columns.append(_cubic_gram(Xs, sv, self.kernel_dim) @ coef + b)
            else:
                columns.append(np.full(Xs.shape[0], b))
        return np.stack(columns, axis=1)

    def predict_batch(self, X):
        decisions = self.decision_batch(X)
        shifted = decisions - decisions.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        scores = expd / expd.sum(axis=1, keepdims=True)
        return np.argmax(decisions, axis=1), scores

    def predict(self, x):
        labels, scores = self.predict_batch(np.asarray(x, dtype=float)[None, :])
        return int(labels[0]), scores[0]

    def to_dict(self):
        return {
            "variant": self.variant,
            "class_names": self.class_names,
            "C": self.C,
            "kernel": {"type": "cubic", "degree": CUBIC_DEGREE, "dim": self.kernel_dim},
            "standardizer": self.standardizer.to_dict(),
            "classes": [
                {
                    "sv_x": [[float(v) for v in row] for row in sv],
                    "sv_coef": [float(v) for v in coef],
                    "bias": b,
                    "converged": conv,
                }
                for sv, coef, b, conv in zip(self.sv_x, self.sv_coef, self.bias, self.converged)
            ],
        }

    @classmethod
    def from_dict(cls, payload):
        classes = payload["classes"]
        return cls(
            standardizer=Standardizer.from_dict(payload["standardizer"]),
            sv_x=[c["sv_x"] for c in classes],
            sv_coef=[c["sv_coef"] for c in classes],
            bias=[c["bias"] for c in classes],
            converged=[c["converged"] for c in classes],
            class_names=payload["class_names"],
            C=payload["C"],
            kernel_dim=payload["kernel"]["dim"],
        )


def svm_train(data: Dataset, C=DEFAULT_C, kernel="cubic", tol=1e-3, max_passes=10,
              max_sweeps=2000, seed=0):
    """Fit one binary SMO subproblem per class on standardized inputs.

    Every subproblem draws partner indices from a fresh ``default_rng(seed)``
    so symmetric problems stay exact mirror images of each other.
    """
    if kernel != "cubic":
        raise ValueError(f"unsupported kernel {kernel!r}")
    if data.n < 2:
        raise TooFewSamples("SVM training needs at least two samples")
    if np.unique(data.y).size < 2:
        raise DegenerateLabels("SVM training needs at least two distinct labels")
    standardizer = Standardizer.fit(data.X)
    Xs = standardizer.transform(data.X)
    G = _cubic_gram(Xs, Xs, data.d)
    sv_x, sv_coef, bias, converged, all_alphas = [], [], [], [], []
    for class_index in range(len(data.class_names)):
        y_bin = np.where(data.y == class_index, 1.0, -1.0)
        rng = np.random.default_rng(seed)
        alpha, b, ok = _smo_binary(G, y_bin, C, tol, max_passes, max_sweeps, rng)
        if not ok:
            logger.warning("SMO did not converge for class %s within %d sweeps",
                           data.class_names[class_index], max_sweeps)
        keep = alpha > 1e-12
        sv_x.append(Xs[keep])
        sv_coef.append((alpha * y_bin)[keep])
        bias.append(b)
        converged.append(ok)
        all_alphas.append(alpha)
    model = SvmModel(standardizer, sv_x, sv_coef, bias, converged, data.class_names, C, data.d)
    model.training_alphas = all_alphas
    return model


def svm_predict(model: SvmModel, x):
    return model.predict(x)
