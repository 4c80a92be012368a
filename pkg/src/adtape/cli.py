"""Command line front end for the coupled Burgers' benchmark."""

from __future__ import annotations

import argparse
import sys

from .burgers import BurgersConfig, run_benchmark
from .stats import render_report


def _on_off(value: str) -> bool:
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adtape-burgers",
        description=(
            "Differentiate the norm of a coupled Burgers' solve with respect "
            "to its initial solution, per identifier-management scheme, and "
            "report statement/memory statistics with built-in gradient checks."
        ),
    )
    parser.add_argument("--manager", choices=["linear", "reuse", "usecount", "all"], default="all")
    parser.add_argument("--grid", type=int, default=61, metavar="N", help="grid points per side")
    parser.add_argument("--iters", type=int, default=32, metavar="K", help="time steps")
    parser.add_argument("--reynolds", type=float, default=100.0, metavar="R")
    parser.add_argument("--vector-dim", type=int, default=1, metavar="D", help="adjoint lanes")
    parser.add_argument("--block-size", type=int, default=256, metavar="B", help="identifier pool block size")
    parser.add_argument("--zero-adjoint-reverse", choices=["on", "off"], default="on",
                        help="clear statement adjoints during reversal (off: linear only)")
    parser.add_argument("--copy-heavy", choices=["on", "off"], default="off",
                        help="swap fields through explicit element copies")
    parser.add_argument("--fd-check", choices=["on", "off"], default="on",
                        help="verify sampled gradient entries by central differences")
    parser.add_argument("--fd-eps", type=float, default=1e-6, metavar="E")
    parser.add_argument("--fd-samples", type=int, default=12, metavar="S")
    parser.add_argument("--format", choices=["table", "csv"], default="table")
    parser.add_argument("--repetitions", type=int, default=10, metavar="N",
                        help="timed repetitions (plus one discarded warm-up)")
    parser.add_argument("--warmup", choices=["on", "off"], default="on")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not _on_off(args.zero_adjoint_reverse) and args.manager != "linear":
        parser.error("--zero-adjoint-reverse off is only supported with --manager linear")
    cfg = BurgersConfig(
        grid_n=args.grid,
        iterations=args.iters,
        reynolds=args.reynolds,
        manager_kind=args.manager,
        vector_dim=args.vector_dim,
        zero_adjoint_on_reverse=_on_off(args.zero_adjoint_reverse),
        copy_heavy=_on_off(args.copy_heavy),
        fd_check=_on_off(args.fd_check),
        fd_epsilon=args.fd_eps,
        fd_samples=args.fd_samples,
        output_format=args.format,
        block_size=args.block_size,
        repetitions=args.repetitions,
        warmup=_on_off(args.warmup),
    )
    result = run_benchmark(cfg)
    sys.stdout.write(render_report(result.reports, cfg.output_format))
    for kind, value in sorted(result.objective_values.items()):
        print(f"# objective[{kind}] = {value!r}")
    failures = 0
    for check in result.checks:
        status = "ok" if check.passed else "FAILED"
        detail = f" ({check.detail})" if check.detail else ""
        print(f"# check {check.name}: {status}{detail}")
        failures += not check.passed
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
