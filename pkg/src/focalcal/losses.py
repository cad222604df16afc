"""Loss functions over predicted distributions: cross-entropy, focal,
Brier, and label-smoothed cross-entropy, with exact analytic gradients
with respect to logits.

Targets are full distributions; a one-hot vector is the classification
special case. The focal loss follows the general-target form
``-sum_y (1 - p_y)^gamma * q_y * log(p_y)``, which collapses to
cross-entropy at gamma = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import PROB_FLOOR, check_prob_vector, softmax

LOSS_KINDS = ("ce", "focal", "brier", "ls")


@dataclass(frozen=True)
class LossGradient:
    """A loss value bundled with its gradient with respect to the logits."""

    value: float
    grad_logits: np.ndarray


def _check_pair(p, q):
    p = check_prob_vector(p, "predicted distribution")
    q = check_prob_vector(q, "target distribution")
    if p.shape != q.shape:
        raise ValueError("dimension mismatch between prediction and target")
    return p, q


def cross_entropy(p, q) -> float:
    """-sum(q * log(p)) with the probability floor; reduces to -log(p_y)
    for a one-hot target."""
    p, q = _check_pair(p, q)
    return float(-np.sum(q * np.log(np.maximum(p, PROB_FLOOR))))


def focal_loss(p, q, gamma: float) -> float:
    """General-target focal loss -sum((1-p)^gamma * q * log(p)).

    Equals cross_entropy at gamma = 0 and never exceeds it for gamma >= 0,
    since (1-p)^gamma <= 1.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    p, q = _check_pair(p, q)
    mod = (1.0 - p) ** gamma
    return float(-np.sum(mod * q * np.log(np.maximum(p, PROB_FLOOR))))


def brier_loss(p, q) -> float:
    """Squared error sum((p - q)^2) between prediction and target."""
    p, q = _check_pair(p, q)
    return float(np.sum((p - q) ** 2))


def label_smooth(q, alpha: float) -> np.ndarray:
    """Smooth a one-hot target: s_i = (1-alpha) q_i + alpha (1-q_i)/(K-1).

    The result is a valid distribution with minimum entry alpha/(K-1).
    """
    if not (0.0 <= alpha < 1.0):
        raise ValueError("alpha must lie in [0, 1)")
    q = check_prob_vector(q, "target distribution")
    if not (np.all((q == 0.0) | (q == 1.0)) and np.sum(q == 1.0) == 1):
        raise ValueError("target must be one-hot")
    k = q.size
    return (1.0 - alpha) * q + alpha * (1.0 - q) / (k - 1)


def grad_ratio(p, gamma: float):
    """Ratio of the focal to the cross-entropy derivative with respect to
    the true-class probability: (1-p)^gamma - gamma p (1-p)^(gamma-1) log p.

    Accepts a scalar or array of probabilities in (0, 1]. Equals 1
    identically at gamma = 0; the removable singularity at p = 1 with
    gamma < 1 is defined by its limit, 0.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr > 1.0):
        raise ValueError("p must lie in (0, 1]")
    if gamma == 0:
        out = np.ones_like(arr)
        return float(out) if np.ndim(p) == 0 else out
    omp = 1.0 - arr
    omp_safe = np.where(omp == 0.0, 1.0, omp)
    core = omp_safe ** gamma - gamma * arr * omp_safe ** (gamma - 1.0) * np.log(arr)
    out = np.where(omp == 0.0, 0.0, core)
    return float(out) if np.ndim(p) == 0 else out


def focal_dloss_dp(p, gamma: float):
    """Derivative of the per-class focal term -(1-p)^gamma log(p) in p.

    Written out directly (not via grad_ratio) so the gradient-ratio
    identity can be checked across two independent code paths. At p = 1
    with gamma > 0 the limit is 0; at gamma = 0 this is the cross-entropy
    derivative -1/p.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr > 1.0):
        raise ValueError("p must lie in (0, 1]")
    if gamma == 0:
        out = -1.0 / arr
        return float(out) if np.ndim(p) == 0 else out
    omp = 1.0 - arr
    omp_safe = np.where(omp == 0.0, 1.0, omp)
    core = gamma * omp_safe ** (gamma - 1.0) * np.log(arr) - omp_safe ** gamma / arr
    out = np.where(omp == 0.0, 0.0, core)
    return float(out) if np.ndim(p) == 0 else out


def _grad_through_softmax(p: np.ndarray, dldp: np.ndarray) -> np.ndarray:
    # dL/dz_k = p_k * (u_k - sum_y u_y p_y) for u = dL/dp.
    return p * (dldp - float(np.dot(dldp, p)))


def loss_with_grad(logits, q, kind: str, gamma: float | None = None,
                   alpha: float | None = None) -> LossGradient:
    """Evaluate a loss at softmax(logits) and its exact logit gradient.

    Args:
        logits: finite logit vector of length K.
        q: target distribution over the K classes.
        kind: one of "ce", "focal", "brier", "ls".
        gamma: focusing parameter, required for kind "focal".
        alpha: smoothing factor, required for kind "ls".

    Returns:
        LossGradient with the scalar loss and dL/dlogits.
    """
    z = np.asarray(logits, dtype=float)
    if z.ndim != 1 or not np.all(np.isfinite(z)):
        raise ValueError("logits must be a finite 1-D vector")
    q = check_prob_vector(q, "target distribution")
    if z.shape != q.shape:
        raise ValueError("dimension mismatch between logits and target")
    p = softmax(z)
    if kind == "ce":
        return LossGradient(cross_entropy(p, q), p - q)
    if kind == "focal":
        if gamma is None:
            raise ValueError("focal loss requires gamma")
        value = focal_loss(p, q, gamma)
        pc = np.maximum(p, PROB_FLOOR)
        dldp = q * focal_dloss_dp(np.minimum(pc, 1.0), gamma)
        return LossGradient(value, _grad_through_softmax(p, dldp))
    if kind == "brier":
        value = brier_loss(p, q)
        return LossGradient(value, _grad_through_softmax(p, 2.0 * (p - q)))
    if kind == "ls":
        if alpha is None:
            raise ValueError("label smoothing requires alpha")
        s = label_smooth(q, alpha)
        return LossGradient(cross_entropy(p, s), p - s)
    raise ValueError(f"unknown loss kind {kind!r}")


def batch_loss_grad(probs: np.ndarray, labels: np.ndarray, kind: str,
                    gammas: np.ndarray | None = None,
                    alpha: float = 0.0) -> tuple[float, np.ndarray]:
    """Mean loss over rows and d(mean loss)/dlogits for integer labels.

    Vectorized counterpart of loss_with_grad for one-hot targets; used by
    the trainer. ``gammas`` supplies a per-sample focusing parameter for
    the focal kind.
    """
    probs = np.asarray(probs, dtype=float)
    n, k = probs.shape
    rows = np.arange(n)
    onehot = np.zeros((n, k))
    onehot[rows, labels] = 1.0
    pc = np.maximum(probs, PROB_FLOOR)
    if kind == "ce":
        value = float(np.mean(-np.log(pc[rows, labels])))
        return value, (probs - onehot) / n
    if kind == "focal":
        if gammas is None:
            raise ValueError("focal loss requires per-sample gammas")
        gammas = np.asarray(gammas, dtype=float)
        p_true = pc[rows, labels]
        omp = 1.0 - probs[rows, labels]
        value = float(np.mean(omp ** gammas * -np.log(p_true)))
        # dL/dp at the true class; other classes carry no direct term.
        omp_safe = np.where(omp == 0.0, 1.0, omp)
        core = (gammas * omp_safe ** (gammas - 1.0) * np.log(p_true)
                - omp_safe ** gammas / p_true)
        u_true = np.where((omp == 0.0) & (gammas > 0.0), 0.0, core)
        s = u_true * probs[rows, labels]
        grad = -probs * s[:, None]
        grad[rows, labels] += u_true * probs[rows, labels]
        return value, grad / n
    if kind == "brier":
        diff = probs - onehot
        value = float(np.mean(np.sum(diff ** 2, axis=1)))
        u = 2.0 * diff
        s = np.sum(u * probs, axis=1)
        grad = probs * (u - s[:, None])
        return value, grad / n
    if kind == "ls":
        smooth = (1.0 - alpha) * onehot + alpha * (1.0 - onehot) / (k - 1)
        value = float(np.mean(-np.sum(smooth * np.log(pc), axis=1)))
        return value, (probs - smooth) / n
    raise ValueError(f"unknown loss kind {kind!r}")


def binary_focal_optimum(q: float, gamma: float, tol: float = 1e-9) -> float:
    """Minimizer of the two-class focal objective
    -(1-x)^gamma q log(x) - x^gamma (1-q) log(1-x) over x in [eps, 1-eps].

    At gamma = 0 this is the cross-entropy objective whose minimizer is q;
    at q = 0.5 symmetry pins the optimum at 0.5 for every gamma. Larger
    gamma pulls the optimum toward 0.5 (a more entropic solution).
    """
    if not (0.0 <= q <= 1.0):
        raise ValueError("q must lie in [0, 1]")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    from .numerics import minimize_1d

    eps = PROB_FLOOR

    def objective(x: float) -> float:
        return (-((1.0 - x) ** gamma) * q * np.log(max(x, eps))
                - x ** gamma * (1.0 - q) * np.log(max(1.0 - x, eps)))

    return minimize_1d(objective, eps, 1.0 - eps, tol)
