"""Command-line surface: ingest logit CSVs, compute calibration reports,
fit temperatures, score OoD detection, run the toy experiments, and query
the closed-form gamma.

Logit files are UTF-8 CSVs with header ``label,logit_0,...,logit_{K-1}``,
one sample per row. Reports are JSON on stdout; values are fractions
unless ``--percent`` is given. Exit codes: 0 success, 2 usage or input
error, 1 internal numeric failure. Commands are pure functions of their
inputs and flags, and no partial files are left behind on failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import gamma as gamma_mod
from . import trainer as trainer_mod
from .metrics import (DEFAULT_BINS, EvalSet, LogitSet, bootstrap_ci,
                      compute_report)
from .numerics import RandomStream
from .ood import ScoredPopulations, auroc, entropy_scores, roc_csv
from .temperature import (apply_temperature, fit_temperature_ece,
                          fit_temperature_nll)

SEED_ENV_VAR = "FOCALCAL_SEED"

BOOTSTRAP_METRICS = ("ece", "adaece", "classwise_ece")


class UsageError(Exception):
    """Bad input or flags: exits with status 2."""


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")


def read_logit_csv(path: str) -> LogitSet:
    """Parse a logit file, reporting the offending line on bad input."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"{path}: empty file")
        expected = ["label"] + [f"logit_{i}" for i in range(len(header) - 1)]
        if header != expected:
            raise UsageError(f"{path}: line 1: bad header {header!r}")
        k = len(header) - 1
        if k < 2:
            raise UsageError(f"{path}: need at least 2 logit columns")
        labels, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != k + 1:
                raise UsageError(f"{path}: line {lineno}: expected {k + 1} "
                                 f"fields, got {len(row)}")
            try:
                label = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise UsageError(f"{path}: line {lineno}: malformed number")
            if not all(np.isfinite(values)):
                raise UsageError(f"{path}: line {lineno}: non-finite logit")
            if not (0 <= label < k):
                raise UsageError(f"{path}: line {lineno}: label {label} "
                                 f"outside [0, {k})")
            labels.append(label)
            rows.append(values)
    if not rows:
        raise UsageError(f"{path}: no data rows")
    return LogitSet(np.array(rows), np.array(labels))


def write_logit_csv(path: str, logit_set: LogitSet) -> None:
    """Write a logit file with shortest-roundtrip decimal formatting."""
    lines = ["label," + ",".join(f"logit_{i}" for i in range(logit_set.k))]
    for label, row in zip(logit_set.labels, logit_set.logits):
        lines.append(str(int(label)) + "," + ",".join(repr(float(v))
                                                      for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _scaled(obj, percent: bool):
    """Multiply metric values by 100 for display when requested."""
    if not percent:
        return obj
    if isinstance(obj, dict):
        return {k: _scaled(v, percent) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_scaled(v, percent) for v in obj]
    if isinstance(obj, float):
        return 100.0 * obj
    return obj


def _emit_json(obj: dict) -> None:
    print(json.dumps(obj, indent=2))


def cmd_metrics(args) -> int:
    logit_set = read_logit_csv(args.logits)
    eval_set = EvalSet.from_logits(logit_set)
    report = compute_report(eval_set, args.bins)
    out = report.as_dict()
    if args.bootstrap > 0:
        stream = RandomStream(args.seed)
        intervals = {}
        for name in BOOTSTRAP_METRICS:
            lo, hi, _ = bootstrap_ci(eval_set, name, args.bins,
                                     args.bootstrap, args.level, stream)
            intervals[name] = [lo, hi, args.level]
        out["intervals"] = intervals
    if args.percent:
        out["metrics"] = _scaled(out["metrics"], True)
        if "intervals" in out:
            out["intervals"] = {k: [100.0 * v[0], 100.0 * v[1], v[2]]
                                for k, v in out["intervals"].items()}
    _emit_json(out)
    return 0


def cmd_temp_scale(args) -> int:
    val = read_logit_csv(args.val)
    test = read_logit_csv(args.test)
    if val.k != test.k:
        raise UsageError("validation and test sets disagree on class count")
    if args.criterion == "ece":
        fit = fit_temperature_ece(val, args.bins)
    else:
        fit = fit_temperature_nll(val)
    pre = compute_report(apply_temperature(test, 1.0), args.bins)
    post = compute_report(apply_temperature(test, fit.temperature), args.bins)
    out = {"n": test.n, "k": test.k, "bins": args.bins,
           "temperature": fit.to_json(),
           "metrics_pre_t": _scaled(pre.metrics_dict(), args.percent),
           "metrics_post_t": _scaled(post.metrics_dict(), args.percent)}
    _emit_json(out)
    return 0


def cmd_ood(args) -> int:
    in_set = read_logit_csv(args.in_path)
    out_set = read_logit_csv(args.out_path)
    if in_set.k != out_set.k:
        raise UsageError("in- and out-of-distribution sets disagree on "
                         "class count")
    if args.temperature <= 0:
        raise UsageError("temperature must be positive")
    pops = ScoredPopulations(
        entropy_scores(apply_temperature(in_set, args.temperature)),
        entropy_scores(apply_temperature(out_set, args.temperature)))
    value = auroc(pops)
    curve_text = roc_csv(pops)
    if args.roc_csv:
        Path(args.roc_csv).write_text(curve_text, encoding="utf-8")
    out = {"auroc": 100.0 * value if args.percent else value,
           "n_in": in_set.n, "n_out": out_set.n,
           "temperature": args.temperature}
    _emit_json(out)
    return 0


def _model_json(model) -> dict:
    if model.kind == "linear":
        return {"kind": "linear", "weights": model.w.tolist()}
    return {"kind": "mlp", "w1": model.w1.tolist(), "b1": model.b1.tolist(),
            "w2": model.w2.tolist(), "b2": model.b2.tolist()}


def cmd_train_toy(args) -> int:
    out_dir = Path(args.out)
    if out_dir.exists() and not out_dir.is_dir():
        raise UsageError(f"{args.out} is not a directory")
    try:
        policy = gamma_mod.parse_policy_spec(args.gamma_policy)
    except ValueError as exc:
        raise UsageError(str(exc))
    spec = trainer_mod.SyntheticSpec(seed=args.seed)
    data = trainer_mod.generate_two_cluster(spec)
    if args.experiment == "appendix-c":
        model = trainer_mod.LinearModel(n_features=2)
        cfg = trainer_mod.appendix_config(args.loss, policy,
                                          alpha=args.alpha, seed=args.seed)
    else:
        model = trainer_mod.MLPModel(2, 2, hidden=32,
                                     stream=RandomStream(args.seed, stream=1))
        cfg = trainer_mod.mlp_config(args.loss, policy, alpha=args.alpha,
                                     seed=args.seed)
    model, logs = trainer_mod.train(model, data, cfg)
    counts, edges = trainer_mod.misclassification_confidence_histogram(
        model, data.x_test, data.y_test)
    hist_lines = ["bin_lo,bin_hi,count"]
    hist_lines.extend(f"{edges[i]!r},{edges[i + 1]!r},{int(c)}"
                      for i, c in enumerate(counts))
    # All artifacts are rendered before anything is written.
    log_text = trainer_mod.epoch_logs_to_csv(logs)
    model_text = json.dumps(_model_json(model), indent=2)
    hist_text = "\n".join(hist_lines) + "\n"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "epoch_log.csv").write_text(log_text, encoding="utf-8")
    (out_dir / "model.json").write_text(model_text, encoding="utf-8")
    (out_dir / "confidence_histogram.csv").write_text(hist_text,
                                                      encoding="utf-8")
    print(f"wrote epoch_log.csv, model.json, confidence_histogram.csv "
          f"to {out_dir}")
    return 0


def _parse_cuts(text: str) -> list[tuple[float, float]]:
    cuts = []
    for item in text.split(","):
        bound, _, p0 = item.partition("=")
        if not p0:
            raise UsageError(f"bad cut-point list {text!r}")
        try:
            cuts.append((float(bound), float(p0)))
        except ValueError:
            raise UsageError(f"bad cut-point list {text!r}")
    return cuts


def cmd_gamma_star(args) -> int:
    if (args.p0 is None) == (args.policy_from is None):
        raise UsageError("give exactly one of --p0 or --policy-from")
    if args.p0 is not None:
        if not (0.0 < args.p0 < 1.0):
            raise UsageError("--p0 must lie in (0, 1)")
        print(f"{gamma_mod.gamma_star(args.p0):.6f}")
        return 0
    cuts = _parse_cuts(args.policy_from)
    for _, p0 in cuts:
        if not (0.0 < p0 < 1.0):
            raise UsageError("cut-point thresholds must lie in (0, 1)")
    try:
        policy = gamma_mod.derive_threshold_policy(cuts)
    except ValueError as exc:
        raise UsageError(str(exc))
    _emit_json(policy.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="focalcal",
        description="Calibration toolkit: metrics, temperature scaling, "
                    "OoD scoring, toy training, and gamma policies.")
    sub = parser.add_subparsers(dest="command", required=True)
    seed = default_seed

    p = sub.add_parser("metrics", help="full metric report for a logit file")
    p.add_argument("--logits", required=True, help="logit CSV path")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--bootstrap", type=int, default=0, metavar="R",
                   help="bootstrap replicates (0 disables intervals)")
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--percent", action="store_true",
                   help="display metrics scaled by 100")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("temp-scale",
                       help="fit a temperature on --val, report --test "
                            "metrics before and after scaling")
    p.add_argument("--val", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--criterion", choices=("ece", "nll"), default="ece")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--percent", action="store_true")
    p.set_defaults(func=cmd_temp_scale)

    p = sub.add_parser("ood", help="entropy-score AUROC between two logit "
                                   "files")
    p.add_argument("--in", dest="in_path", required=True,
                   help="in-distribution logit CSV")
    p.add_argument("--out", dest="out_path", required=True,
                   help="out-of-distribution logit CSV")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--roc-csv", default=None,
                   help="optional path for the fpr,tpr curve")
    p.add_argument("--percent", action="store_true")
    p.set_defaults(func=cmd_ood)

    p = sub.add_parser("train-toy", help="run a deterministic toy "
                                         "experiment and export artifacts")
    p.add_argument("--experiment", choices=("appendix-c", "mlp"),
                   default="appendix-c")
    p.add_argument("--loss", choices=("ce", "focal", "brier", "ls"),
                   default="ce")
    p.add_argument("--gamma-policy", default="fixed:0",
                   help="fixed:G | sample:B=G,... | epoch:E=G,...")
    p.add_argument("--alpha", type=float, default=0.05,
                   help="label smoothing factor for --loss ls")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("gamma-star", help="closed-form gamma for a "
                                          "probability threshold")
    p.add_argument("--p0", type=float, default=None)
    p.add_argument("--policy-from", default=None, metavar="CUTS",
                   help="bound=p0 pairs, e.g. 0.2=0.2,1.0=0.25")
    p.set_defaults(func=cmd_gamma_star)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        if getattr(args, "seed", None) is None and hasattr(args, "seed"):
            args.seed = default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
