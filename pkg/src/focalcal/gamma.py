"""Focusing-parameter policies: the closed-form threshold gamma, plus
fixed, sample-dependent, and epoch-scheduled lookup rules.

``gamma_star(p0)`` returns the smallest gamma for which the focal/CE
gradient ratio stays at or below 1 for every true-class probability at or
above ``p0``; it is computed in closed form through the negative real
branch of the Lambert-W function. The shipped policies (FLSD-53,
FLSD-532, and the 5,3,2 / 5,3,1 epoch schedules) use the conventional
integer gammas; ``derive_threshold_policy`` builds full-precision ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .losses import grad_ratio
from .numerics import lambert_w

_BRANCH_POINT = -1.0 / math.e

POLICY_KINDS = ("fixed", "sample", "epoch")


@dataclass(frozen=True)
class GammaPolicy:
    """Immutable rule mapping (true-class probability, epoch) -> gamma.

    kind "fixed": entries = ((bound, gamma),) with the bound ignored.
    kind "sample": entries are (upper bound, gamma) pairs with strictly
        increasing bounds ending at 1.0; intervals are [lower, upper) with
        the final interval closed at 1.
    kind "epoch": entries are (last epoch, gamma) pairs with strictly
        increasing boundaries; epochs past the last boundary keep the
        final gamma.
    """

    kind: str
    entries: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not self.entries:
            raise ValueError("policy needs at least one entry")
        if any(g < 0 for _, g in self.entries):
            raise ValueError("gamma values must be >= 0")
        bounds = [b for b, _ in self.entries]
        if self.kind == "sample":
            if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
                raise ValueError("sample thresholds must be strictly increasing")
            if bounds[-1] != 1.0:
                raise ValueError("final sample threshold must be 1.0")
        if self.kind == "epoch":
            if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
                raise ValueError("epoch boundaries must be strictly increasing")

    def to_json(self) -> dict:
        return {"kind": self.kind,
                "entries": [[float(b), float(g)] for b, g in self.entries]}

    @staticmethod
    def from_json(obj: dict) -> "GammaPolicy":
        return GammaPolicy(obj["kind"],
                           tuple((float(b), float(g)) for b, g in obj["entries"]))


def fixed_gamma(g: float) -> GammaPolicy:
    return GammaPolicy("fixed", ((1.0, float(g)),))


def sample_thresholds(pairs) -> GammaPolicy:
    return GammaPolicy("sample", tuple((float(b), float(g)) for b, g in pairs))


def epoch_schedule(pairs) -> GammaPolicy:
    return GammaPolicy("epoch", tuple((float(b), float(g)) for b, g in pairs))


# Built-in policies with the conventional integer gammas.
FLSD_53 = sample_thresholds([(0.2, 5.0), (1.0, 3.0)])
FLSD_532 = sample_thresholds([(0.2, 5.0), (0.5, 3.0), (1.0, 2.0)])
FLSC_532 = epoch_schedule([(100, 5.0), (250, 3.0), (350, 2.0)])
FLSC_531 = epoch_schedule([(100, 5.0), (250, 3.0), (350, 1.0)])


def gamma_star(p0: float) -> float:
    """Closed-form threshold gamma for probability threshold ``p0``.

    With a = 1 - p0 and b = p0 log(p0):

        gamma* = a/b + W_-1(-(a^(1 - a/b) / b) * log(a)) / log(a)

    The Lambert-W argument reaches the branch point -1/e at p0 = 0.5,
    where the two terms cancel and gamma* = 0; arguments within 1e-12 of
    the branch point are clamped onto it. For p0 above 0.5 the closed
    form turns negative and the result is clamped to 0 (the gradient
    ratio is identically 1 at gamma = 0, so 0 is the valid answer there).

    The returned value is post-verified: the gradient ratio at p0 equals
    1 within 1e-6 and, when gamma* is nonzero, stays strictly below 1 on
    a grid over (p0, 1].
    """
    if not (0.0 < p0 < 1.0):
        raise ValueError("p0 must lie in (0, 1)")
    a = 1.0 - p0
    b = p0 * math.log(p0)
    log_a = math.log(a)
    x = -(a ** (1.0 - a / b) / b) * log_a
    if x < _BRANCH_POINT:
        if x < _BRANCH_POINT - 1e-12:
            raise ValueError("outside branch domain")
        x = _BRANCH_POINT
    g = a / b + lambert_w("negative", x) / log_a
    g = max(g, 0.0)
    if abs(grad_ratio(p0, g) - 1.0) > 1e-6:
        raise ArithmeticError("gradient ratio at p0 missed 1")
    if g > 1e-9:
        ps = np.linspace(p0, 1.0, 1001)[1:]
        if float(np.max(grad_ratio(ps, g))) >= 1.0:
            raise ArithmeticError("gradient ratio not dominated above p0")
    return g


def gamma_for_sample(policy: GammaPolicy, p_hat: float, epoch: int) -> float:
    """Look up the gamma a policy assigns to one sample.

    Fixed policies ignore both arguments, sample policies ignore the
    epoch, epoch policies ignore the probability.
    """
    if policy.kind == "fixed":
        return policy.entries[0][1]
    if policy.kind == "sample":
        for bound, g in policy.entries:
            if p_hat < bound:
                return g
        return policy.entries[-1][1]  # p_hat == 1.0: final interval is closed
    for bound, g in policy.entries:
        if epoch <= bound:
            return g
    return policy.entries[-1][1]


def gammas_for_batch(policy: GammaPolicy, p_hat: np.ndarray,
                     epoch: int) -> np.ndarray:
    """Vectorized gamma_for_sample over a probability vector."""
    p_hat = np.asarray(p_hat, dtype=float)
    if policy.kind == "fixed":
        return np.full(p_hat.shape, policy.entries[0][1])
    if policy.kind == "epoch":
        return np.full(p_hat.shape, gamma_for_sample(policy, 0.0, epoch))
    bounds = [b for b, _ in policy.entries]
    gammas = [g for _, g in policy.entries]
    conds = [p_hat < b for b in bounds]
    return np.select(conds, gammas, default=gammas[-1])


def derive_threshold_policy(cut_points) -> GammaPolicy:
    """Build a sample policy whose gammas are gamma_star of given thresholds.

    ``cut_points`` is a list of (upper bound, p0) pairs with increasing
    bounds, the last equal to 1.0. Gammas keep full precision.
    """
    cut_points = list(cut_points)
    if not cut_points:
        raise ValueError("cut_points must be nonempty")
    return sample_thresholds([(bound, gamma_star(p0)) for bound, p0 in cut_points])


def parse_policy_spec(text: str) -> GammaPolicy:
    """Parse the command-line policy grammar.

    ``fixed:3``, ``sample:0.2=5,1.0=3``, ``epoch:100=5,250=3,350=2``.
    """
    kind, _, body = text.partition(":")
    kind = kind.strip()
    if not body:
        raise ValueError(f"bad policy spec {text!r}")
    try:
        if kind == "fixed":
            return fixed_gamma(float(body))
        pairs = []
        for item in body.split(","):
            bound, _, g = item.partition("=")
            if not g:
                raise ValueError
            pairs.append((float(bound), float(g)))
        if kind == "sample":
            return sample_thresholds(pairs)
        if kind == "epoch":
            return epoch_schedule(pairs)
    except ValueError as exc:
        raise ValueError(f"bad policy spec {text!r}") from exc
    raise ValueError(f"bad policy spec {text!r}")
