"""Command-line front end.

Exit codes: 0 on success, 2 for invalid input or arguments, 3 when a
file cannot be read or written.

``solve`` and ``oracle`` consume the plain text matrix format (header
``M N``, then one ``i j cost`` entry per line) and print ranked
solutions: a ``K M`` header followed by one line per solution holding
the total cost and the M column assignments (-1 marks a missed row).
The benchmark and simulation commands emit CSV; per-trial tables are
deterministic for a fixed seed apart from timing columns.
"""

from __future__ import annotations

import argparse
import sys

from . import bench
from .core import InvalidInputError, TooLargeError, read_matrix_text
from .fusion import FusionParams, fusion_sweep
from .kbest import SolverConfig, kbest_single
from .oracle import kbest_bruteforce


def _write_solutions(out, n_rows, stream):
    stream.write(f"{len(out)} {n_rows}\n")
    for assoc, total in zip(out.associations, out.total_costs):
        cols = " ".join(str(int(c)) for c in assoc.row_to)
        stream.write(f"{float(total):.17g} {cols}".rstrip() + "\n")


def _cmd_solve(args):
    matrix = read_matrix_text(args.input)
    if args.gate is not None:
        matrix = bench.gate_matrix(matrix, args.gate)
    config = SolverConfig.from_name(args.config) if args.config else None
    out = kbest_single(matrix, args.k, config, backend=args.backend)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            _write_solutions(out, matrix.n_rows, fh)
    else:
        _write_solutions(out, matrix.n_rows, sys.stdout)
    return 0


def _cmd_oracle(args):
    matrix = read_matrix_text(args.input)
    ranked = kbest_bruteforce(matrix, args.k)
    sys.stdout.write(f"{len(ranked)} {matrix.n_rows}\n")
    for assoc in ranked:
        cols = " ".join(str(int(c)) for c in assoc.row_to)
        sys.stdout.write(f"{assoc.cost:.17g} {cols}".rstrip() + "\n")
    return 0


def _parse_int_list(text):
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise InvalidInputError(f"bad integer list: {text!r}") from exc
    if not values or any(v < 1 for v in values):
        raise InvalidInputError(f"need positive integers: {text!r}")
    return values


def _emit_csv(rows, summary_keys, args, value="ms"):
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            bench.write_csv(rows, fh)
    else:
        bench.write_csv(rows, sys.stdout)
    if summary_keys:
        for s in bench.summarize(rows, summary_keys, value=value):
            text = "  ".join(
                f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                for k, v in s.items())
            print(text, file=sys.stderr)


def _cmd_bench(args):
    sizes = _parse_int_list(args.sizes) if args.sizes else None
    if args.kind == "dense":
        rows = bench.run_dense_bench(sizes or [100, 200, 400], args.k,
                                     args.trials, args.seed,
                                     backend=args.backend)
        _emit_csv(rows, ("size", "config"), args)
    elif args.kind == "mimo":
        rows = bench.run_mimo_bench(sizes or [50, 100, 200], args.k,
                                    args.trials, args.seed,
                                    backend=args.backend)
        _emit_csv(rows, ("size",), args)
    elif args.kind == "gibbs":
        rows = bench.run_gibbs_bench(args.trials, args.seed,
                                     size=sizes[0] if sizes else 100,
                                     backend=args.backend)
        _emit_csv(rows, ("method", "param"), args, value="ratio")
    elif args.kind == "gate-sweep":
        rows = bench.run_gate_sweep(args.trials, args.seed, k=args.k,
                                    size=sizes[0] if sizes else 100,
                                    backend=args.backend)
        _emit_csv(rows, ("gate",), args, value="s_star")
    else:
        rows = bench.run_backend_bench(sizes or [50, 100, 200], args.k,
                                       args.trials, args.seed)
        _emit_csv(rows, ("size", "backend"), args)
    return 0


def _cmd_fusion_sim(args):
    k_list = _parse_int_list(args.k_list)
    _, summary = fusion_sweep(k_list, args.trials, args.seed,
                              FusionParams(), backend=args.backend)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            bench.write_csv(summary, fh)
    else:
        bench.write_csv(summary, sys.stdout)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kbassoc",
        description="K-best data association: solver, oracle, benchmarks.")
    parser.add_argument("--backend", choices=["c", "python"], default=None,
                        help="force a compute backend")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="rank the K best associations of a matrix")
    p.add_argument("--input", required=True, help="matrix file (M N / i j cost)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--config", choices=["v1", "v2", "v3", "v4"], default=None,
                   help="solver variant (default: chosen from sparsity)")
    p.add_argument("--gate", type=int, default=None,
                   help="keep only the S cheapest entries per row")
    p.add_argument("--out", default=None, help="write solutions here instead of stdout")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("oracle", help="brute-force reference ranking (small inputs)")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("bench", help="timed benchmark suites, CSV per trial")
    p.add_argument("kind", choices=["dense", "mimo", "gibbs", "gate-sweep",
                                    "backends"])
    p.add_argument("--sizes", default=None, help="comma list, e.g. 100,200,400")
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="reserved; kernels are single-threaded")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("fusion-sim",
                       help="three-sensor tracking simulation, summary CSV")
    p.add_argument("--k-list", default="1,10,100,1000")
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_fusion_sim)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (InvalidInputError, TooLargeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
