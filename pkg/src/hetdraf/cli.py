"""Command-line front end: ``hetdraf train | predict | bench | report``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys

from . import forest as fm
from .bench import load_spec, run_bench
from .data import DataError, load_csv, read_feature_csv
from .report import build_report
from .tree import GrowthConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _mtry(value: str):
    if value == "sqrt":
        return None
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("mtry must be 'sqrt' or a positive integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("mtry must be positive")
    return v


def _variant(value: str) -> fm.Variant:
    try:
        return fm.Variant.parse(value)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args) -> int:
    variant = _variant(args.variant)
    ds = load_csv(args.data, has_header=not args.no_header)
    try:
        cfg = GrowthConfig(minleaf=args.minleaf, mtry=args.mtry, ridge_lambda=args.ridge_lambda,
                           svm_c=args.svm_c, lssvm_c=args.lssvm_c, delta=args.mpsvm_delta, top_m=args.topm)
        cfg = fm.variant_config(variant, cfg)
        cfg.resolve_mtry(ds.feature_count)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model = fm.train_forest(ds, variant, cfg, args.ntree, args.seed, normalize=not args.no_normalize,
                            n_jobs=args.jobs)
    text = fm.dumps(model) + "\n"
    try:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write model to {args.out}: {exc}") from None
    print(f"variant: {model.variant.value}")
    print(f"trees: {model.ntree}")
    print(f"mean depth: {model.mean_depth():.2f}")
    print(f"mean node count: {model.mean_node_count():.2f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model = fm.load(args.model)
    except OSError as exc:
        raise DataError(f"cannot read model {args.model}: {exc}") from None
    X = read_feature_csv(args.data, model.n_features, has_header=not args.no_header)
    pred = model.predict(X)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for p in pred:
        w.writerow([model.label_tokens[p]])
    try:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise DataError(f"cannot write predictions to {args.out}: {exc}") from None
    print(f"{len(pred)} predictions written to {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        spec = load_spec(args.spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid bench spec: {exc}") from None
    written, failed = run_bench(spec, args.out, n_jobs=args.jobs)
    print(f"{written} records written to {args.out}")
    if failed == len(spec.datasets):
        print("every dataset failed to load", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_report(args) -> int:
    if not os.path.isfile(args.results):
        raise DataError(f"{args.results}: no such file")
    text = build_report(args.results, q=args.q_alpha, alpha=args.alpha, paper_n=args.paper_n)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hetdraf", description="Heterogeneous oblique double random forests and baselines.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a forest on a CSV file and save it as JSON")
    t.add_argument("--data", required=True)
    t.add_argument("--variant", required=True,
                   help="one of: " + ", ".join(v.cli_name for v in fm.Variant))
    t.add_argument("--ntree", type=int, default=50)
    t.add_argument("--minleaf", type=int, default=1)
    t.add_argument("--mtry", type=_mtry, default=None, help="'sqrt' (default) or an integer")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.add_argument("--no-normalize", action="store_true")
    t.add_argument("--no-header", action="store_true")
    t.add_argument("--ridge-lambda", type=float, default=0.1)
    t.add_argument("--svm-c", type=float, default=1.0)
    t.add_argument("--lssvm-c", type=float, default=1.0)
    t.add_argument("--mpsvm-delta", type=float, default=0.01)
    t.add_argument("--topm", type=int, default=None)
    t.add_argument("--jobs", type=int, default=1)
    t.set_defaults(func=cmd_train)

    q = sub.add_parser("predict", help="predict labels for the rows of a CSV file")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--no-header", action="store_true")
    q.set_defaults(func=cmd_predict)

    b = sub.add_parser("bench", help="cross-validated benchmark from a JSON/TOML spec")
    b.add_argument("--spec", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="rank statistics report from a results CSV")
    r.add_argument("--results", required=True)
    r.add_argument("--alpha", type=float, default=0.05)
    r.add_argument("--q-alpha", type=float, default=None)
    r.add_argument("--paper-n", type=int, default=None)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hetdraf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, fm.ModelFormatError) as exc:
        print(f"hetdraf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # numeric/shape problems surfacing from the data (e.g. feature mismatch)
        print(f"hetdraf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"hetdraf: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
