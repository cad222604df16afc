import math

import numpy as np
import pytest

from focalcal.metrics import (EvalSet, LogitSet, adaece, bin_equal_mass,
                              bin_equal_width, bootstrap_ci, brier_score,
                              classwise_ece, compute_report, ece, mce, nll,
                              reliability_csv, reliability_data,
                              top_k_accuracy)
from focalcal.numerics import RandomStream

# ---------------------------------------------------------------------------
# Naive per-sample loop oracles, independent of the vectorized binning path.


def naive_width_bins(conf, m):
    edges = [i / m for i in range(m + 1)]
    groups = [[] for _ in range(m)]
    for i, c in enumerate(conf):
        b = 0
        for j in range(m):
            if edges[j] < c <= edges[j + 1]:
                b = j
                break
        else:
            b = 0 if c <= 0 else m - 1
        groups[b].append(i)
    return groups


def naive_gap_sum(groups, conf, correct):
    n = len(conf)
    total = 0.0
    for members in groups:
        if not members:
            continue
        acc = sum(correct[i] for i in members) / len(members)
        avg = sum(conf[i] for i in members) / len(members)
        total += len(members) / n * abs(acc - avg)
    return total


def naive_ece(ev, m):
    conf = [max(row) for row in ev.probs.tolist()]
    pred = [row.index(max(row)) for row in ev.probs.tolist()]
    correct = [p == y for p, y in zip(pred, ev.labels.tolist())]
    return naive_gap_sum(naive_width_bins(conf, m), conf, correct)


def naive_mce(ev, m):
    conf = [max(row) for row in ev.probs.tolist()]
    pred = [row.index(max(row)) for row in ev.probs.tolist()]
    correct = [p == y for p, y in zip(pred, ev.labels.tolist())]
    best = 0.0
    for members in naive_width_bins(conf, m):
        if not members:
            continue
        acc = sum(correct[i] for i in members) / len(members)
        avg = sum(conf[i] for i in members) / len(members)
        best = max(best, abs(acc - avg))
    return best


def naive_adaece(ev, m):
    conf = [max(row) for row in ev.probs.tolist()]
    pred = [row.index(max(row)) for row in ev.probs.tolist()]
    correct = [p == y for p, y in zip(pred, ev.labels.tolist())]
    n = len(conf)
    order = sorted(range(n), key=lambda i: conf[i])  # stable
    base, rem = divmod(n, m)
    groups, start = [], 0
    for i in range(m):
        size = base + 1 if i < rem else base
        groups.append(order[start:start + size])
        start += size
    return naive_gap_sum(groups, conf, correct)


def naive_classwise_ece(ev, m):
    n, k = ev.probs.shape
    total = 0.0
    for j in range(k):
        conf = [row[j] for row in ev.probs.tolist()]
        correct = [y == j for y in ev.labels.tolist()]
        total += naive_gap_sum(naive_width_bins(conf, m), conf, correct)
    return total / k


def random_eval_set(gen, n=None, k=None):
    n = n or int(gen.integers(1, 200))
    k = k or int(gen.integers(2, 10))
    probs = gen.dirichlet(np.ones(k), size=n)
    labels = gen.integers(0, k, size=n)
    return EvalSet(probs, labels)


# The worked four-sample instance: confidences 0.9/0.8/0.7/0.4 with
# correctness yes/no/yes/no.
WORKED = EvalSet(
    np.array([[0.9, 0.05, 0.05],
              [0.8, 0.1, 0.1],
              [0.7, 0.2, 0.1],
              [0.4, 0.3, 0.3]]),
    np.array([0, 1, 0, 2]))


class TestBinning:
    def test_equal_width_worked_assignment(self):
        bins = bin_equal_width([0.9, 0.8, 0.7, 0.4], 2)
        assert bins[0].members.tolist() == [3]
        assert sorted(bins[1].members.tolist()) == [0, 1, 2]

    def test_all_ones_land_in_top_bin(self):
        bins = bin_equal_width(np.ones(7), 15)
        assert bins[-1].count == 7
        assert sum(b.count for b in bins) == 7

    def test_half_boundary_belongs_to_lower_bin(self):
        bins = bin_equal_width([0.5], 2)
        assert bins[0].count == 1 and bins[1].count == 0

    def test_zero_confidence_goes_to_first_bin(self):
        bins = bin_equal_width([0.0], 4)
        assert bins[0].count == 1

    def test_counts_conserved(self):
        gen = RandomStream(21).generator()
        for _ in range(50):
            conf = gen.random(int(gen.integers(1, 300)))
            for m in (1, 7, 15):
                bins = bin_equal_width(conf, m)
                assert sum(b.count for b in bins) == conf.size

    def test_equal_mass_sorted_halves(self):
        bins = bin_equal_mass([0.4, 0.7, 0.8, 0.9], 2)
        assert sorted(bins[0].members.tolist()) == [0, 1]
        assert sorted(bins[1].members.tolist()) == [2, 3]

    def test_equal_mass_single_bin(self):
        bins = bin_equal_mass([0.3, 0.9, 0.5], 1)
        assert bins[0].count == 3

    def test_equal_mass_remainder_to_low_bins(self):
        bins = bin_equal_mass([0.1, 0.2, 0.3, 0.4, 0.5], 2)
        assert [b.count for b in bins] == [3, 2]

    def test_equal_mass_sizes_differ_at_most_one(self):
        gen = RandomStream(22).generator()
        for _ in range(50):
            n = int(gen.integers(5, 200))
            m = int(gen.integers(1, n + 1))
            sizes = [b.count for b in bin_equal_mass(gen.random(n), m)]
            assert sum(sizes) == n
            assert max(sizes) - min(sizes) <= 1
            if n % m == 0:
                assert len(set(sizes)) == 1

    def test_more_bins_than_samples_rejected(self):
        with pytest.raises(ValueError, match="more bins"):
            bin_equal_mass([0.5], 2)

    def test_nonpositive_bin_count_rejected(self):
        with pytest.raises(ValueError):
            bin_equal_width([0.5], 0)


class TestWorkedInstance:
    def test_ece(self):
        assert ece(WORKED, 2) == pytest.approx(0.2, abs=1e-12)

    def test_adaece(self):
        assert adaece(WORKED, 2) == pytest.approx(0.2, abs=1e-12)

    def test_mce(self):
        assert mce(WORKED, 2) == pytest.approx(0.4, abs=1e-12)


class TestMetricBasics:
    def test_perfect_predictor_zero_everywhere(self):
        probs = np.eye(4)[[0, 1, 2, 3, 1]]
        ev = EvalSet(probs, np.array([0, 1, 2, 3, 1]))
        assert ece(ev, 15) == 0.0
        assert adaece(ev, 5) == 0.0
        assert mce(ev, 15) == 0.0
        assert classwise_ece(ev, 15) == 0.0
        assert nll(ev) == 0.0

    def test_single_bin_collapse(self):
        gen = RandomStream(23).generator()
        ev = random_eval_set(gen, n=50)
        acc = float(np.mean(ev.correct()))
        conf = float(np.mean(ev.confidences()))
        assert ece(ev, 1) == pytest.approx(abs(acc - conf), abs=1e-12)
        assert adaece(ev, 1) == pytest.approx(ece(ev, 1), abs=1e-12)
        assert mce(ev, 1) == pytest.approx(ece(ev, 1), abs=1e-12)

    def test_nll_uniform_and_mixed(self):
        ev = EvalSet(np.full((3, 10), 0.1), np.array([0, 4, 9]))
        assert nll(ev) == pytest.approx(math.log(10), abs=1e-12)
        mixed = EvalSet(np.array([[1.0, 0.0], [0.5, 0.5]]), np.array([0, 0]))
        assert nll(mixed) == pytest.approx(math.log(2) / 2, abs=1e-12)

    def test_classwise_three_sample_oracle(self):
        ev = EvalSet(np.array([[0.8, 0.2], [0.6, 0.4], [0.3, 0.7]]),
                     np.array([0, 1, 1]))
        assert classwise_ece(ev, 1) == pytest.approx(naive_classwise_ece(ev, 1),
                                                     abs=1e-12)
        # Hand value: both classes contribute |1/3 - 0.56667| = 7/30.
        assert classwise_ece(ev, 1) == pytest.approx(7.0 / 30.0, abs=1e-12)

    def test_brier_score_mean_over_samples(self):
        ev = EvalSet(np.array([[1.0, 0.0], [0.5, 0.5]]), np.array([0, 1]))
        assert brier_score(ev) == pytest.approx((0.0 + 0.5) / 2, abs=1e-12)


class TestOracleEquivalence:
    def test_thousand_random_sets(self):
        gen = RandomStream(24).generator()
        for _ in range(300):
            ev = random_eval_set(gen)
            for m in (1, 10, 15):
                if m <= ev.n:
                    assert ece(ev, m) == pytest.approx(naive_ece(ev, m),
                                                       abs=1e-12)
                    assert adaece(ev, m) == pytest.approx(naive_adaece(ev, m),
                                                          abs=1e-12)
                    assert mce(ev, m) == pytest.approx(naive_mce(ev, m),
                                                       abs=1e-12)
                    assert classwise_ece(ev, m) == pytest.approx(
                        naive_classwise_ece(ev, m), abs=1e-12)

    def test_ece_at_most_mce(self):
        gen = RandomStream(25).generator()
        for _ in range(100):
            ev = random_eval_set(gen)
            assert ece(ev, 15) <= mce(ev, 15) + 1e-12

    def test_row_permutation_invariance(self):
        gen = RandomStream(26).generator()
        ev = random_eval_set(gen, n=80)
        perm = gen.permutation(80)
        shuffled = EvalSet(ev.probs[perm], ev.labels[perm])
        for f in (lambda e: ece(e, 15), lambda e: adaece(e, 10),
                  lambda e: classwise_ece(e, 15), lambda e: mce(e, 15),
                  nll, brier_score, lambda e: top_k_accuracy(e, 2)):
            assert f(ev) == pytest.approx(f(shuffled), abs=1e-12)


class TestTopK:
    def test_k_equals_classes_is_one(self):
        gen = RandomStream(27).generator()
        ev = random_eval_set(gen, n=30, k=6)
        assert top_k_accuracy(ev, 6) == 1.0

    def test_k1_complements_error(self):
        gen = RandomStream(28).generator()
        ev = random_eval_set(gen, n=60)
        assert top_k_accuracy(ev, 1) == pytest.approx(
            float(np.mean(ev.correct())))

    def test_second_ranked_label_counts_for_k2(self):
        ev = EvalSet(np.array([[0.5, 0.3, 0.2], [0.6, 0.1, 0.3]]),
                     np.array([1, 2]))
        assert top_k_accuracy(ev, 1) == 0.0
        assert top_k_accuracy(ev, 2) == 1.0

    def test_tie_broken_toward_lowest_index(self):
        ev = EvalSet(np.array([[0.4, 0.4, 0.2]]), np.array([1]))
        # Classes 0 and 1 tie; k=1 keeps only class 0.
        assert top_k_accuracy(ev, 1) == 0.0
        assert top_k_accuracy(ev, 2) == 1.0

    def test_out_of_range_rejected(self):
        gen = RandomStream(29).generator()
        ev = random_eval_set(gen, n=10, k=4)
        for k in (0, 5):
            with pytest.raises(ValueError):
                top_k_accuracy(ev, k)


class TestReliability:
    def test_perfect_predictor_diagonal(self):
        probs = np.eye(3)[[0, 1, 2]]
        ev = EvalSet(probs, np.array([0, 1, 2]))
        bins, pct = reliability_data(ev, 4)
        assert bins[-1].accuracy == 1.0
        assert bins[-1].confidence == 1.0
        assert pct[-1] == 1.0

    def test_worked_instance_rows(self):
        bins, pct = reliability_data(WORKED, 2)
        assert [b.count for b in bins] == [1, 3]
        assert bins[0].accuracy == 0.0
        assert bins[1].accuracy == pytest.approx(2 / 3)
        assert pct.tolist() == [0.25, 0.75]

    def test_sparse_bins_counted(self):
        bins, _ = reliability_data(WORKED, 25)
        assert sum(b.count for b in bins) == 4
        assert sum(1 for b in bins if b.count == 0) == 23

    def test_csv_header_and_rows(self):
        text = reliability_csv(WORKED, 2)
        lines = text.strip().split("\n")
        assert lines[0] == "bin_lo,bin_hi,count,accuracy,confidence,pct_samples"
        assert len(lines) == 3


class TestBootstrap:
    def test_constant_dataset_degenerate_interval(self):
        ev = EvalSet(np.tile([0.7, 0.3], (40, 1)), np.zeros(40, dtype=int))
        lo, hi, point = bootstrap_ci(ev, "ece", 15, 200, 0.9, RandomStream(1))
        assert lo == hi == pytest.approx(point, abs=1e-12)

    def test_single_replicate_degenerate(self):
        gen = RandomStream(30).generator()
        ev = random_eval_set(gen, n=50)
        lo, hi, _ = bootstrap_ci(ev, "ece", 15, 1, 0.9, RandomStream(2))
        assert lo == hi

    def test_deterministic_under_fixed_stream(self):
        gen = RandomStream(31).generator()
        ev = random_eval_set(gen, n=80)
        a = bootstrap_ci(ev, "adaece", 10, 100, 0.9, RandomStream(3))
        b = bootstrap_ci(ev, "adaece", 10, 100, 0.9, RandomStream(3))
        assert a == b

    def test_second_implementation_oracle(self):
        # Same substream draws, independently re-implemented resampling
        # and quantile interpolation.
        gen = RandomStream(32).generator()
        ev = random_eval_set(gen, n=200, k=4)
        stream = RandomStream(55)
        reps, level, m = 1000, 0.9, 15
        lo, hi, point = bootstrap_ci(ev, "ece", m, reps, level, stream)
        values = []
        for r in range(reps):
            seq = np.random.SeedSequence(55, spawn_key=(0, r))
            idx = np.random.Generator(np.random.Philox(seq)).integers(
                0, ev.n, size=ev.n)
            values.append(naive_ece(EvalSet(ev.probs[idx], ev.labels[idx]), m))
        values.sort()

        def quantile(sorted_vals, q):
            pos = q * (len(sorted_vals) - 1)
            lo_i = int(math.floor(pos))
            hi_i = min(lo_i + 1, len(sorted_vals) - 1)
            frac = pos - lo_i
            return sorted_vals[lo_i] * (1 - frac) + sorted_vals[hi_i] * frac

        assert lo == pytest.approx(quantile(values, 0.05), abs=1e-12)
        assert hi == pytest.approx(quantile(values, 0.95), abs=1e-12)
        assert lo <= point <= hi

    def test_bad_arguments_rejected(self):
        gen = RandomStream(33).generator()
        ev = random_eval_set(gen, n=10)
        with pytest.raises(ValueError):
            bootstrap_ci(ev, "ece", 15, 0, 0.9, RandomStream(0))
        with pytest.raises(ValueError):
            bootstrap_ci(ev, "ece", 15, 10, 1.5, RandomStream(0))


class TestContainers:
    def test_eval_set_validation(self):
        with pytest.raises(ValueError):
            EvalSet(np.array([[0.7, 0.6]]), np.array([0]))  # bad row sum
        with pytest.raises(ValueError):
            EvalSet(np.array([[0.5, 0.5]]), np.array([2]))  # label range
        with pytest.raises(ValueError):
            EvalSet(np.array([[1.0]]), np.array([0]))  # K < 2

    def test_logit_set_validation(self):
        with pytest.raises(ValueError):
            LogitSet(np.array([[1.0, np.inf]]), np.array([0]))
        with pytest.raises(ValueError):
            LogitSet(np.array([[1.0, 2.0]]), np.array([5]))

    def test_report_fields(self):
        gen = RandomStream(34).generator()
        ev = random_eval_set(gen, n=40, k=6)
        report = compute_report(ev, 15)
        d = report.as_dict()
        assert set(d["metrics"]) == {"ece", "adaece", "classwise_ece", "mce",
                                     "nll", "brier", "top1_error",
                                     "top5_error"}
        assert d["n"] == 40 and d["k"] == 6 and d["bins"] == 15
        small = compute_report(random_eval_set(gen, n=10, k=3), 5)
        assert small.top5_error is None
