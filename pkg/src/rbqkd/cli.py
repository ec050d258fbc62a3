"""Command-line experiment runner.

Exit codes: 0 success, 1 internal or self-test failure, 2 usage error,
3 protocol abort (``session`` only).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from rbqkd.attacks import build_channel, parse_channel_spec
from rbqkd.error_rates import RELATION_TOL, check_relations, error_rates_exact, error_rates_formula
from rbqkd.protocol import SessionConfig, run_reuse_loop, run_session
from rbqkd.rates import BASE_THRESHOLD, rate_curve, total_key_ratio, write_rate_csv

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_ABORT = 3

_RATE_NAMES = ("e_bit_comm", "e_ph_comm", "e_bit_base", "e_ph_base")


class UsageError(Exception):
    pass


def _channel(spec: str):
    try:
        return parse_channel_spec(spec)
    except (ValueError, OSError) as exc:
        raise UsageError(f"--channel: {exc}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_rates(args) -> int:
    try:
        points = rate_curve(args.min, args.max, args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = write_rate_csv(points)
    _emit(text, args.out)
    if args.out:
        print(f"wrote {len(points)} rows to {args.out}")
    return EXIT_OK


def attack_report(spec: str) -> dict:
    """Formula and exact rates for one channel, plus the relation residuals."""
    ch = build_channel(_channel(spec))
    formula = error_rates_formula(ch)
    exact = error_rates_exact(ch)
    relations = check_relations(exact)
    diff = float(np.max(np.abs(formula.as_array() - exact.as_array())))
    report = {"channel": spec, **exact.to_dict(), **relations.to_dict()}
    report.update(
        formula=formula.to_dict(),
        exact=exact.to_dict(),
        formula_relations=check_relations(formula).to_dict(),
        route_difference=diff,
        consistent=bool(
            relations.holds and check_relations(formula).holds and diff <= RELATION_TOL
        ),
    )
    return report


def cmd_attack(args) -> int:
    report = attack_report(args.channel)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"channel: {args.channel}")
        print(f"{'':14}{'formula':>16}{'exact':>16}")
        for name in _RATE_NAMES:
            print(f"{name:14}{report['formula'][name]:16.10f}{report['exact'][name]:16.10f}")
        print(f"{'route diff':14}{report['route_difference']:16.3e}")
        print(f"{'|Eph - Ebit|':14}{report['ph_eq_bit_residual']:16.3e}  (comm pair)")
        print(f"{'Ebit_base':14}{report['base_bit_residual']:16.3e}")
        print(f"{'2Ebit - Eph':14}{report['ph_base_slack']:16.3e}  (base pair, >= 0)")
        print("relations hold" if report["consistent"] else "RELATION VIOLATED")
    return EXIT_OK if report["consistent"] else EXIT_FAILURE


def _session_config(args, n: int | None = None) -> SessionConfig:
    cfg = SessionConfig(
        n=args.n if n is None else n,
        channel=_channel(args.channel),
        css=args.css,
        c2_prime=getattr(args, "c2prime", "auto"),
        abort_threshold=getattr(args, "abort_threshold", None),
        rng_seed=args.seed,
        partial_blocks=getattr(args, "partial_blocks", False),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def cmd_session(args) -> int:
    cfg = _session_config(args)
    result = run_session(cfg)
    _emit(result.to_json(), args.out)
    status = "aborted" if result.aborted else f"key {result.key_alice.size} bits"
    print(f"observed e = {result.observed_e:.6f}; {status}", file=sys.stderr)
    return EXIT_ABORT if result.aborted else EXIT_OK


def cmd_reuse(args) -> int:
    cfg = _session_config(args)
    if args.rounds < 1:
        raise UsageError("--rounds must be at least 1")
    report = run_reuse_loop(cfg, args.rounds, sizing=args.sizing)
    _emit(report.to_json(), args.out)
    line = f"rounds run {len(report.rounds)}; total key {report.total_key} bits; Lk/2n = {report.key_ratio:.6g}"
    if report.nominal_e <= BASE_THRESHOLD:
        line += f" (closed form {total_key_ratio(report.nominal_e):.6g} at e = {report.nominal_e:.6g})"
    print(line, file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from rbqkd.selftest import run_selftest

    results = run_selftest(scale="reduced")
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAILURE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbqkd", description="BB84 with a reusable pre-shared base string"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="key / base rate curves as CSV")
    p.add_argument("--min", type=float, default=0.0)
    p.add_argument("--max", type=float, default=BASE_THRESHOLD)
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--out", help="CSV path (default: standard output)")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("attack", help="error rates of one channel, both routes")
    p.add_argument("--channel", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_attack)

    def session_flags(p, n_default):
        p.add_argument("--n", type=int, default=n_default, help="check / code half size")
        p.add_argument("--channel", default="identity")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--css", default="steane")
        p.add_argument("--out", help="JSON path (default: standard output)")
        p.add_argument("--partial-blocks", action="store_true",
                       help="allow n not divisible by the CSS block length")

    p = sub.add_parser("session", help="one protocol run, JSON transcript")
    session_flags(p, 700)
    p.add_argument("--c2prime", default="auto")
    p.add_argument("--abort-threshold", type=float, default=None)
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("reuse", help="repeated rounds on the refreshed base string")
    session_flags(p, 7000)
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--sizing", choices=("ideal", "session"), default="ideal")
    p.add_argument("--abort-threshold", type=float, default=None)
    p.set_defaults(func=cmd_reuse)

    p = sub.add_parser("selftest", help="acceptance checks at reduced sizes")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
