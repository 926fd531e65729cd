"""Command-line entry point: ``congestsp run | compare | query``."""
from __future__ import annotations

import argparse
import json
import sys

from .graph import GraphError
from .experiments import ALGORITHMS, ExperimentSpec, ResultRecord, SpecError, compare, dump_artifacts, run_experiment
from .labeling import load_labels, query
from .partwise import FIDELITIES
from .sim import DEFAULT_KAPPA


def _constants(text: str) -> tuple[float, float, float, float]:
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"constants must be numbers, got {text!r}")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected c1,c2,c,gamma")
    return parts


def _beta(text: str) -> float:
    try:
        b = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be a number, got {text!r}")
    if not 0 < b < 1:
        raise argparse.ArgumentTypeError(f"beta must lie in (0, 1), got {b}")
    return b


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="congestsp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write a JSON record and CSV table")
    run.add_argument("--graph", required=True, help="generator spec (grid:16, er:256:0.03, line:64 ...) or edge-list file")
    run.add_argument("--weights", default="unit", help="unit | int:LO:HI | real:LO:HI (generated graphs)")
    run.add_argument("--algo", required=True, choices=ALGORITHMS)
    run.add_argument("--beta", type=_beta, default=0.125)
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--constants", type=_constants, default=(4.0, 2.0, 4.0, 2.0), metavar="c1,c2,c,gamma")
    run.add_argument("--kappa-bits", type=float, default=DEFAULT_KAPPA, help="message budget is ceil(kappa log2 n) bits")
    run.add_argument("--fidelity", choices=FIDELITIES, default="accounted")
    run.add_argument("--source", type=int, default=0)
    run.add_argument("--demands", help="demands file for transshipment (default: random per trial)")
    run.add_argument("--out", help="output path stem; writes STEM.json and STEM.csv")
    run.add_argument("--dump", metavar="DIR", help="also write trial-0 raw outputs into DIR")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for trials")

    cmp_ = sub.add_parser("compare", help="diff two result records")
    cmp_.add_argument("a")
    cmp_.add_argument("b")

    q = sub.add_parser("query", help="distance estimate from a label file")
    q.add_argument("labels")
    q.add_argument("x", type=int)
    q.add_argument("y", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        if args.trials < 1:
            parser.error("--trials must be at least 1")
        spec = ExperimentSpec(
            graph=args.graph, algo=args.algo, beta=args.beta, trials=args.trials, seed=args.seed,
            weights=args.weights, constants=args.constants, kappa_bits=args.kappa_bits,
            fidelity=args.fidelity, source=args.source, demands=args.demands,
        )
        try:
            record = run_experiment(spec, jobs=args.jobs)
        except (SpecError, GraphError, OSError) as exc:
            parser.error(str(exc))
        if args.out:
            jpath, cpath = record.write(args.out)
            print(f"wrote {jpath} and {cpath}")
        else:
            sys.stdout.write(record.to_json())
        if args.dump:
            for path in dump_artifacts(spec, args.dump):
                print(f"wrote {path}")
        for name, ok in sorted(record.data["verdicts"].items()):
            print(f"{'PASS' if ok else 'FAIL'} {name}", file=sys.stderr)
        return 0 if record.passed else 1
    if args.command == "compare":
        try:
            diff = compare(ResultRecord.read(args.a), ResultRecord.read(args.b))
        except SpecError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(json.dumps(diff, sort_keys=True, indent=2))
        return 0
    labels = load_labels(args.labels)
    for v in (args.x, args.y):
        if v not in labels:
            print(f"error: no label for vertex {v}", file=sys.stderr)
            return 2
    res = query(labels[args.x], labels[args.y])
    if res.cluster is None:
        print("inf (labels share no cluster)")
        return 1
    print(f"{res.estimate:.10g} cluster={res.cluster:016x}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
