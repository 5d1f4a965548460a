"""Command-line entry point: ``slidingclust``."""

from __future__ import annotations

import argparse
import logging
import sys

from .augmented import SketchInvalid
from .experiment import (ALGOS, ExperimentSpec, InputError, StreamSource, default_seed,
                         run_experiment)
from .window import BEST_EFFORT, EXACT, LAZY, PROOF, STRICT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slidingclust",
                                 description="Sliding-window k-clustering benchmark.")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV file, one point per row")
    src.add_argument("--synth", metavar="K:N:D:SEP", help="synthetic Gaussian blobs")
    ap.add_argument("--label-column", type=int, default=None)
    ap.add_argument("--no-standardize", action="store_true")
    ap.add_argument("--shuffle", action="store_true", help="stream in seeded random order")
    ap.add_argument("--window", type=int, required=True)
    ap.add_argument("--k", type=int, required=True)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--delta", type=float, default=0.2)
    ap.add_argument("--epsilon", type=float, default=0.05)
    ap.add_argument("--gamma", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=None,
                    help="master seed (default: $SLIDINGCLUST_SEED or 0)")
    ap.add_argument("--algos", default=",".join(ALGOS),
                    help="comma-separated subset of sketch,sampling,batch")
    ap.add_argument("--query-every", type=int, default=100)
    mode = ap.add_mutually_exclusive_group()
    mode.add_argument("--lazy", dest="mode", action="store_const", const=LAZY)
    mode.add_argument("--exact", dest="mode", action="store_const", const=EXACT)
    q = ap.add_mutually_exclusive_group()
    q.add_argument("--best-effort", dest="query_mode", action="store_const", const=BEST_EFFORT)
    q.add_argument("--strict", dest="query_mode", action="store_const", const=STRICT)
    q.add_argument("--proof-rule", dest="query_mode", action="store_const", const=PROOF)
    ap.add_argument("--copies", choices=("single", "full"), default="single")
    ap.add_argument("--replace-centers", action="store_true",
                    help="substitute in-window stand-ins for expired centers")
    ap.add_argument("--bounded", action="store_true",
                    help="restart inner instances every window so none sees more than 2w points")
    ap.add_argument("--log-window", action="store_true",
                    help="use log(2w) instead of log(Delta) in the sampling factor")
    ap.add_argument("--bounds-samples", type=int, default=10)
    ap.add_argument("--max-points", type=int, default=None)
    ap.add_argument("--out", default=None, help="metrics CSV path (default: stdout)")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.set_defaults(mode=LAZY, query_mode=BEST_EFFORT)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        seed = args.seed if args.seed is not None else default_seed()
        source = StreamSource(origin=args.input or args.synth, synthetic=args.synth is not None,
                              shuffle=args.shuffle, label_column=args.label_column,
                              standardize=not args.no_standardize)
        if args.synth is not None:
            source.label_column = None
        spec = ExperimentSpec(
            source=source, w=args.window, k=args.k, p=args.p, delta=args.delta,
            epsilon=args.epsilon, gamma=args.gamma, copies=args.copies,
            log_window=args.log_window,
            algos=tuple(a.strip() for a in args.algos.split(",") if a.strip()),
            query_every=args.query_every, mode=args.mode, query_mode=args.query_mode,
            replace_centers=args.replace_centers, bounded=args.bounded,
            bounds_samples=args.bounds_samples, seed=seed, out=args.out,
            max_points=args.max_points)
        result = run_experiment(spec)
    except (InputError, SketchInvalid, ValueError, OSError) as e:
        print(f"slidingclust: error: {e}", file=sys.stderr)
        return 2
    if args.out is None:
        from .experiment import metrics_csv
        sys.stdout.write(metrics_csv(result.metrics))
    return 0


if __name__ == "__main__":
    sys.exit(main())
