"""Shared numerical primitives: stable log-sum-exp / softmax, entropy,
real-branch Lambert-W, golden-section minimization, and seeded randomness.

All logarithms are natural; entropies are reported in nats. Probabilities
are floored at ``PROB_FLOOR`` before any log so losses stay finite on
degenerate inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Floor applied to probabilities before taking logs.
PROB_FLOOR = 1e-12

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0

_BRANCH_POINT = -1.0 / math.e


def log_sum_exp(values) -> float:
    """log(sum(exp(values))) computed with a max shift.

    Exact for a single element; safe for large magnitudes (no overflow).
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite input")
    m = float(np.max(v))
    if v.size == 1:
        return m
    return m + math.log(float(np.sum(np.exp(v - m))))


def softmax(logits, t: float = 1.0, axis: int = -1) -> np.ndarray:
    """Temperature-scaled softmax along ``axis``.

    Args:
        logits: array of finite logits (any shape).
        t: temperature, must be > 0. Entries are divided by ``t`` before
            exponentiation, so larger ``t`` flattens the distribution.
        axis: axis holding the class dimension.

    Returns:
        Array of the same shape with rows summing to 1. The argmax along
        ``axis`` always equals the argmax of the raw logits.
    """
    if t <= 0:
        raise ValueError("non-positive temperature")
    z = np.asarray(logits, dtype=float) / t
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite logits")
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def entropy(p, axis: int = -1):
    """Shannon entropy in nats, with the 0*log(0) = 0 convention.

    Output lies in [0, log K] for a valid probability vector of length K.
    """
    p = np.asarray(p, dtype=float)
    logs = np.log(np.maximum(p, PROB_FLOOR))
    h = -np.sum(p * logs, axis=axis)
    h = np.maximum(h, 0.0)
    return float(h) if np.ndim(h) == 0 else h


def check_prob_vector(p, name: str = "probability vector") -> np.ndarray:
    """Validate the probability-vector contract: entries in [0,1], sum 1
    within 1e-9, at least two classes. Returns the array as float64."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError(f"{name} must be 1-D with at least 2 entries")
    if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if abs(float(np.sum(p)) - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1")
    return p


def _halley_refine(w: float, x: float) -> float:
    """Halley iterations for w*exp(w) = x from a nearby initializer."""
    if x == 0.0:
        return 0.0
    tol = 1e-13 * max(abs(x), 1e-300)
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol:
            return w
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 1e-16 * max(1.0, abs(w)):
            if abs(w * math.exp(w) - x) <= tol:
                return w
    raise ArithmeticError("Lambert-W did not converge within 50 iterations")


def lambert_w(branch: str, x: float) -> float:
    """Real Lambert-W on the principal or negative branch.

    Initializers: branch-point series in sqrt(2*(e*x + 1)) near -1/e,
    log-based asymptotes elsewhere, followed by Halley refinement to a
    residual of ~1e-13 * max(1, |x|).

    Args:
        branch: "principal" (x >= -1/e) or "negative" (-1/e <= x < 0,
            result <= -1).
        x: argument.

    Returns:
        w satisfying w * exp(w) = x on the requested branch.
    """
    x = float(x)
    if branch == "principal":
        if x < _BRANCH_POINT:
            raise ValueError("Lambert-W domain")
        if x == 0.0:
            return 0.0
        r = max(2.0 * (math.e * x + 1.0), 0.0)
        if r == 0.0:
            return -1.0
        if x < -0.2:
            p = math.sqrt(r)
            w = -1.0 + p - p * p / 3.0 + (11.0 / 72.0) * p ** 3
        elif x < 2.0:
            w = math.log1p(x)
        else:
            lx = math.log(x)
            w = lx - math.log(lx)
        w = _halley_refine(w, x)
        if w < -1.0 - 1e-9:
            raise ArithmeticError("left the principal branch")
        return w
    if branch == "negative":
        if not (_BRANCH_POINT <= x < 0.0):
            raise ValueError("Lambert-W domain")
        r = max(2.0 * (math.e * x + 1.0), 0.0)
        if r == 0.0:
            return -1.0
        if x < -0.3:
            p = math.sqrt(r)
            w = -1.0 - p - p * p / 3.0 - (11.0 / 72.0) * p ** 3
        else:
            l1 = math.log(-x)
            l2 = math.log(-l1)
            w = l1 - l2 + l2 / l1
        w = _halley_refine(w, x)
        if w > -1.0 + 1e-9:
            raise ArithmeticError("left the negative branch")
        return min(w, -1.0)
    raise ValueError(f"unknown branch {branch!r}")


def minimize_1d(f, lo: float, hi: float, tol: float = 1e-8) -> float:
    """Golden-section search for the minimizer of a unimodal function.

    Returns a point within ``tol`` of the argmin of ``f`` on [lo, hi].
    """
    if lo >= hi:
        raise ValueError("lo must be < hi")
    a, b = float(lo), float(hi)
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    # Two extra shrinks leave the bracket below 0.62 * tol, so the
    # returned midpoint is within tol of the argmin.
    n = int(math.ceil(math.log(tol / h) / math.log(_INV_PHI))) + 2
    c = a + _INV_PHI_SQ * h
    d = a + _INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(n - 1):
        if yc < yd:
            b, d, yd = d, c, yc
            h *= _INV_PHI
            c = a + _INV_PHI_SQ * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= _INV_PHI
            d = a + _INV_PHI * h
            yd = f(d)
    return 0.5 * (a + d) if yc < yd else 0.5 * (c + b)


@dataclass(frozen=True)
class RandomStream:
    """Deterministic random source with parallel substreams.

    Backed by the Philox counter-based bit generator keyed by
    ``SeedSequence(seed, spawn_key=(stream,))``, so identical
    (seed, stream) pairs reproduce identical draws on every platform.
    Distinct stream indices give statistically independent sequences;
    use one stream per thread or per bootstrap replicate.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(seq))

    def spawn(self, index: int) -> np.random.Generator:
        """Generator for substream ``index`` of this stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream, index))
        return np.random.Generator(np.random.Philox(seq))


def gaussian(gen: np.random.Generator, shape) -> np.ndarray:
    """Standard normal variates via Box-Muller on uniform draws.

    Draws ceil(n/2) uniform pairs, emits the cosine block followed by the
    sine block, truncated to ``shape``. Fixed construction keeps runs
    bit-reproducible for a given generator state.
    """
    n = int(np.prod(shape)) if not np.isscalar(shape) else int(shape)
    m = (n + 1) // 2
    u1 = 1.0 - gen.random(m)  # in (0, 1]: log stays finite
    u2 = gen.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.concatenate([r * np.cos(2.0 * np.pi * u2),
                          r * np.sin(2.0 * np.pi * u2)])[:n]
    return out.reshape(shape) if not np.isscalar(shape) else out
