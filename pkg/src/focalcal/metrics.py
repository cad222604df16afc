"""Calibration and accuracy metrics over sets of predicted distributions.

Binned metrics use either equal-width bins ((i-1)/M, i/M] or equal-mass
bins holding (near) equal sample counts. Empty bins contribute zero to
the weighted sums, and the maximum-gap metric maximizes over nonempty
bins only. The default bin count is 15.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import PROB_FLOOR, RandomStream, entropy, softmax

DEFAULT_BINS = 15


@dataclass
class LogitSet:
    """Raw N x K logits with integer labels; the universal ingestion unit."""

    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.logits.ndim != 2 or self.logits.shape[1] < 2:
            raise ValueError("logits must be N x K with K >= 2")
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("logits must be finite")
        n, k = self.logits.shape
        if self.labels.shape != (n,):
            raise ValueError("labels must be a length-N vector")
        if np.any(self.labels < 0) or np.any(self.labels >= k):
            raise ValueError("labels must lie in [0, K)")

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    @property
    def k(self) -> int:
        return self.logits.shape[1]


@dataclass
class EvalSet:
    """Row-stochastic N x K probabilities with integer labels."""

    probs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.probs.ndim != 2 or self.probs.shape[1] < 2:
            raise ValueError("probs must be N x K with K >= 2")
        n, k = self.probs.shape
        if n < 1:
            raise ValueError("need at least one sample")
        if np.any(self.probs < -1e-12) or np.any(self.probs > 1.0 + 1e-12):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(np.abs(self.probs.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("rows must sum to 1")
        if self.labels.shape != (n,):
            raise ValueError("labels must be a length-N vector")
        if np.any(self.labels < 0) or np.any(self.labels >= k):
            raise ValueError("labels must lie in [0, K)")

    @staticmethod
    def from_logits(logit_set: LogitSet, t: float = 1.0) -> "EvalSet":
        return EvalSet(softmax(logit_set.logits, t=t, axis=1), logit_set.labels)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def k(self) -> int:
        return self.probs.shape[1]

    def confidences(self) -> np.ndarray:
        return self.probs.max(axis=1)

    def predictions(self) -> np.ndarray:
        return self.probs.argmax(axis=1)

    def correct(self) -> np.ndarray:
        return self.predictions() == self.labels


@dataclass
class BinStats:
    """Per-bin summary: count, accuracy, mean confidence, boundary, members.

    Empty bins report accuracy = confidence = 0 by convention.
    """

    index: int
    lo: float
    hi: float
    count: int
    accuracy: float
    confidence: float
    members: np.ndarray = field(repr=False)


def _build_bins(conf, groups, edges, correct) -> list[BinStats]:
    bins = []
    for i, members in enumerate(groups):
        count = members.size
        if count:
            mean_conf = float(np.mean(conf[members]))
            acc = float(np.mean(correct[members])) if correct is not None else 0.0
        else:
            mean_conf = 0.0
            acc = 0.0
        bins.append(BinStats(index=i + 1, lo=edges[i], hi=edges[i + 1],
                             count=int(count), accuracy=acc,
                             confidence=mean_conf, members=members))
    return bins


def bin_equal_width(conf, m: int, correct=None) -> list[BinStats]:
    """Assign confidences to M equal-width bins ((i-1)/M, i/M].

    A confidence of exactly 0 goes to the first bin so every sample lands
    in exactly one bin. ``correct`` (optional boolean array) fills the
    per-bin accuracy.
    """
    if m <= 0:
        raise ValueError("bin count must be positive")
    conf = np.asarray(conf, dtype=float)
    edges = np.array([i / m for i in range(m + 1)])
    idx = np.digitize(conf, edges, right=True)
    idx = np.clip(idx, 1, m)
    groups = [np.flatnonzero(idx == i + 1) for i in range(m)]
    return _build_bins(conf, groups, edges, correct)


def bin_equal_mass(conf, m: int, correct=None) -> list[BinStats]:
    """Split confidences (sorted ascending, stable) into M contiguous bins
    of near-equal size: base floor(N/M) with the remainder going to the
    lowest-confidence bins. Sizes differ by at most one and are exactly
    equal when M divides N."""
    conf = np.asarray(conf, dtype=float)
    n = conf.size
    if m <= 0:
        raise ValueError("bin count must be positive")
    if m > n:
        raise ValueError("more bins than samples")
    order = np.argsort(conf, kind="stable")
    base, rem = divmod(n, m)
    sizes = [base + 1 if i < rem else base for i in range(m)]
    groups = []
    edges = [0.0]
    start = 0
    for size in sizes:
        members = order[start:start + size]
        groups.append(members)
        edges.append(float(conf[members].max()) if size else edges[-1])
        start += size
    edges[-1] = 1.0
    return _build_bins(conf, groups, np.array(edges), correct)


def _weighted_gap(bins: list[BinStats], n: int) -> float:
    return float(sum(b.count / n * abs(b.accuracy - b.confidence) for b in bins))


def ece(eval_set: EvalSet, m: int = DEFAULT_BINS) -> float:
    """Count-weighted mean |accuracy - confidence| over equal-width bins."""
    bins = bin_equal_width(eval_set.confidences(), m, eval_set.correct())
    return _weighted_gap(bins, eval_set.n)


def adaece(eval_set: EvalSet, m: int = DEFAULT_BINS) -> float:
    """Count-weighted mean |accuracy - confidence| over equal-mass bins."""
    bins = bin_equal_mass(eval_set.confidences(), m, eval_set.correct())
    return _weighted_gap(bins, eval_set.n)


def mce(eval_set: EvalSet, m: int = DEFAULT_BINS) -> float:
    """Maximum |accuracy - confidence| over nonempty equal-width bins."""
    bins = bin_equal_width(eval_set.confidences(), m, eval_set.correct())
    gaps = [abs(b.accuracy - b.confidence) for b in bins if b.count]
    return float(max(gaps)) if gaps else 0.0


def classwise_ece(eval_set: EvalSet, m: int = DEFAULT_BINS) -> float:
    """Classwise extension: every class's probability column is binned
    (equal width), the per-bin gap compares the fraction of members truly
    in that class against the mean class probability, and the weighted
    sums are averaged over classes."""
    total = 0.0
    n, k = eval_set.n, eval_set.k
    for j in range(k):
        bins = bin_equal_width(eval_set.probs[:, j], m, eval_set.labels == j)
        total += _weighted_gap(bins, n)
    return total / k


def nll(eval_set: EvalSet) -> float:
    """Mean negative log-likelihood of the true labels."""
    p_true = eval_set.probs[np.arange(eval_set.n), eval_set.labels]
    return float(np.mean(-np.log(np.maximum(p_true, PROB_FLOOR))))


def brier_score(eval_set: EvalSet) -> float:
    """Mean over samples of the squared error against the one-hot target."""
    onehot = np.zeros_like(eval_set.probs)
    onehot[np.arange(eval_set.n), eval_set.labels] = 1.0
    return float(np.mean(np.sum((eval_set.probs - onehot) ** 2, axis=1)))


def top_k_accuracy(eval_set: EvalSet, k: int) -> float:
    """Fraction of samples whose true label ranks among the k largest
    probabilities, ties broken toward the lowest class index."""
    if not (1 <= k <= eval_set.k):
        raise ValueError("k out of range")
    order = np.argsort(-eval_set.probs, axis=1, kind="stable")
    hits = (order[:, :k] == eval_set.labels[:, None]).any(axis=1)
    return float(np.mean(hits))


def reliability_data(eval_set: EvalSet,
                     m: int = DEFAULT_BINS) -> tuple[list[BinStats], np.ndarray]:
    """Full bin table for reliability plotting plus per-bin sample shares."""
    bins = bin_equal_width(eval_set.confidences(), m, eval_set.correct())
    pct = np.array([b.count / eval_set.n for b in bins])
    return bins, pct


def reliability_csv(eval_set: EvalSet, m: int = DEFAULT_BINS) -> str:
    """Reliability table as CSV text with a fixed header."""
    bins, pct = reliability_data(eval_set, m)
    lines = ["bin_lo,bin_hi,count,accuracy,confidence,pct_samples"]
    for b, share in zip(bins, pct):
        lines.append(f"{b.lo!r},{b.hi!r},{b.count},{b.accuracy!r},"
                     f"{b.confidence!r},{share!r}")
    return "\n".join(lines) + "\n"


METRIC_FUNCS = {
    "ece": ece,
    "adaece": adaece,
    "classwise_ece": classwise_ece,
    "mce": mce,
    "nll": lambda ev, m: nll(ev),
    "brier": lambda ev, m: brier_score(ev),
    "top1_error": lambda ev, m: 1.0 - top_k_accuracy(ev, 1),
}


def bootstrap_ci(eval_set: EvalSet, metric: str, m: int = DEFAULT_BINS,
                 replicates: int = 1000, level: float = 0.9,
                 stream: RandomStream = RandomStream(0)) -> tuple[float, float, float]:
    """Percentile bootstrap interval for a named metric.

    Rows (probabilities and label together) are resampled with
    replacement; replicate r draws its indices from substream r of
    ``stream``, so results do not depend on evaluation order. The
    interval takes the ((1-level)/2, 1-(1-level)/2) empirical quantiles
    with linear interpolation between order statistics.

    Returns:
        (lo, hi, point estimate).
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    func = METRIC_FUNCS[metric]
    point = float(func(eval_set, m))
    n = eval_set.n
    values = np.empty(replicates)
    for r in range(replicates):
        idx = stream.spawn(r).integers(0, n, size=n)
        sub = EvalSet(eval_set.probs[idx], eval_set.labels[idx])
        values[r] = func(sub, m)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [alpha, 1.0 - alpha], method="linear")
    return float(lo), float(hi), point


@dataclass
class CalibrationReport:
    """All headline metrics for one evaluation set, as fractions."""

    n: int
    k: int
    bins: int
    ece: float
    adaece: float
    classwise_ece: float
    mce: float
    nll: float
    brier: float
    top1_error: float
    top5_error: float | None
    temperature: dict | None = None
    intervals: dict | None = None

    def metrics_dict(self) -> dict:
        return {"ece": self.ece, "adaece": self.adaece,
                "classwise_ece": self.classwise_ece, "mce": self.mce,
                "nll": self.nll, "brier": self.brier,
                "top1_error": self.top1_error, "top5_error": self.top5_error}

    def as_dict(self) -> dict:
        out = {"n": self.n, "k": self.k, "bins": self.bins,
               "metrics": self.metrics_dict()}
        if self.temperature is not None:
            out["temperature"] = self.temperature
        if self.intervals is not None:
            out["intervals"] = self.intervals
        return out


def compute_report(eval_set: EvalSet, m: int = DEFAULT_BINS) -> CalibrationReport:
    """Evaluate the full metric suite on one set.

    top5_error is None when the set has fewer than five classes.
    """
    top5 = 1.0 - top_k_accuracy(eval_set, 5) if eval_set.k >= 5 else None
    return CalibrationReport(
        n=eval_set.n, k=eval_set.k, bins=m,
        ece=ece(eval_set, m), adaece=adaece(eval_set, m),
        classwise_ece=classwise_ece(eval_set, m), mce=mce(eval_set, m),
        nll=nll(eval_set), brier=brier_score(eval_set),
        top1_error=1.0 - top_k_accuracy(eval_set, 1), top5_error=top5)


def entropy_rows(eval_set: EvalSet) -> np.ndarray:
    """Per-row entropy of the predicted distributions, in nats."""
    return entropy(eval_set.probs, axis=1)
