"""End-to-end checks of the simulator, runnable at full or reduced size.

Each check returns a ``CheckResult`` with the worst residual it saw. The CLI
``selftest`` command runs the reduced sizes; the test suite runs full sizes.
"""
from __future__ import annotations

import contextlib
import io
import itertools
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rbqkd.attacks import ChannelModel, build_channel, random_channel, saturation_channel
from rbqkd.codes import ToeplitzCode, _all_words, gf2_matmul, named_css, refresh_base
from rbqkd.error_rates import check_relations, error_rates_exact, error_rates_formula
from rbqkd.protocol import (
    QubitPrep,
    SessionConfig,
    qubit_error_probability,
    run_reuse_loop,
    run_session,
    run_session_with_injected_errors,
)
from rbqkd.rates import base_rate, key_rate, key_threshold, rate_curve, total_key_ratio, write_rate_csv

SIZES = {
    "full": dict(
        channels=1000, mc_n=10000, mc_seeds=20, recon_seeds=50, refresh_max=20,
        reuse_n=100_000, reuse_rounds=30,
    ),
    "reduced": dict(
        channels=200, mc_n=2000, mc_seeds=5, recon_seeds=5, refresh_max=12,
        reuse_n=20_000, reuse_rounds=30,
    ),
}

NAMED_CHANNELS = (
    "identity", "bitflip:0.1", "bitflip:0.3", "phaseflip:0.2", "depolarizing:0.1",
    "depolarizing:0.2", "depolarizing:0.4", "ir-z", "ir-random",
)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


def _named(spec: str):
    from rbqkd.attacks import parse_channel_spec

    return build_channel(parse_channel_spec(spec))


def tested_channels(count: int) -> list:
    """Seeded random channels (1-4 Kraus operators), named models and the saturation family."""
    chans = [random_channel(seed, 1 + seed % 4) for seed in range(count)]
    chans += [_named(s) for s in NAMED_CHANNELS]
    chans += [saturation_channel(d) for d in (0.01, 0.05, 0.1)]
    return chans


def _both_routes(channels):
    return [(error_rates_formula(ch), error_rates_exact(ch)) for ch in channels]


def check_formula_oracle(size) -> CheckResult:
    pairs = _both_routes(random_channel(s, 1 + s % 4) for s in range(size["channels"]))
    worst = max(np.max(np.abs(f.as_array() - x.as_array())) for f, x in pairs)
    return CheckResult(1, "per-Kraus formulas vs 16x16 simulation", worst <= 1e-9,
                       f"{len(pairs)} channels, max diff {worst:.2e} (tol 1e-9)")


def check_base_bit_zero(size) -> CheckResult:
    pairs = _both_routes(tested_channels(size["channels"]))
    worst = max(max(f.e_bit_base, x.e_bit_base) for f, x in pairs)
    return CheckResult(2, "E_bit_base = 0", worst <= 1e-12,
                       f"{len(pairs)} channels, max {worst:.2e} (tol 1e-12)")


def check_comm_symmetry(size) -> CheckResult:
    pairs = _both_routes(tested_channels(size["channels"]))
    worst = max(max(check_relations(r).ph_eq_bit_residual for r in pair) for pair in pairs)
    return CheckResult(3, "E_ph_comm = E_bit_comm", worst <= 1e-9,
                       f"{len(pairs)} channels, max residual {worst:.2e} (tol 1e-9)")


def check_base_phase_bound(size) -> CheckResult:
    pairs = _both_routes(tested_channels(size["channels"]))
    slack = min(min(check_relations(r).ph_base_slack for r in pair) for pair in pairs)
    tight = 0.0
    for d in (0.01, 0.05, 0.1):
        for r in _both_routes([saturation_channel(d)])[0]:
            tight = max(tight, abs(check_relations(r).ph_base_slack))
    ok = slack >= -1e-9 and tight <= 1e-9
    return CheckResult(4, "E_ph_base <= 2 E_bit_comm, tight on saturation family", ok,
                       f"min slack {slack:.2e}, saturation |slack| {tight:.2e} (tol 1e-9)")


def check_named_channels(size) -> CheckResult:
    worst = 0.0
    for kind, p in itertools.product(("depolarizing", "bitflip"), (0.1, 0.2, 0.4)):
        for r in _both_routes([build_channel(ChannelModel(kind, p))])[0]:
            worst = max(worst, abs(r.e_bit_comm - p / 2))
    worst_ir = 0.0
    for kind in ("ir-z", "ir-random"):
        for r in _both_routes([build_channel(ChannelModel(kind))])[0]:
            worst_ir = max(worst_ir, abs(r.e_bit_comm - 0.25))
    return CheckResult(5, "named-channel error rates", worst <= 1e-9 and worst_ir <= 1e-12,
                       f"|e - p/2| {worst:.2e} (tol 1e-9), |e_ir - 1/4| {worst_ir:.2e} (tol 1e-12)")


def check_thresholds(size) -> CheckResult:
    root = key_threshold()
    rb = base_rate(0.25)
    ok = 0.1099 < root < 0.1101 and abs(rb) <= 1e-12
    return CheckResult(6, "thresholds", ok, f"key root {root:.9f}, R_b(0.25) = {rb:.1e}")


def check_rate_curves(size, csv_path: Path | None = None) -> CheckResult:
    pts = rate_curve(0.0, 0.25, 0.005)
    rk = np.array([p.r_k for p in pts])
    rb = np.array([p.r_b for p in pts])
    lk = [p.lk_over_2n for p in pts]
    thr = key_threshold()
    ok = (
        len(pts) == 51
        and bool(np.all(np.diff(rk) < 0))
        and bool(np.all(np.diff(rb) < 0))
        and bool(np.all(rb >= rk))
        and math.isinf(lk[0])
        and all(v == 0.0 for p, v in zip(pts, lk) if p.e >= thr)
    )
    if csv_path is not None:
        write_rate_csv(pts, csv_path)
    return CheckResult(7, "rate curves", ok,
                       f"{len(pts)} points, min(R_b - R_k) = {np.min(rb - rk):.3g}")


def check_cross_level(size) -> CheckResult:
    worst = 0.0
    for spec in NAMED_CHANNELS:
        ch = _named(spec)
        avg = np.mean([qubit_error_probability(QubitPrep(b, v), ch) for b in (0, 1) for v in (0, 1)])
        worst = max(worst, abs(avg - error_rates_exact(ch).e_bit_comm))
    return CheckResult(8, "prepare-and-measure error = block E_bit_comm", worst <= 1e-9,
                       f"{len(NAMED_CHANNELS)} channels, max diff {worst:.2e} (tol 1e-9)")


def check_concentration(size) -> CheckResult:
    n = size["mc_n"]
    tol = 4 * math.sqrt(0.05 * 0.95 / n)
    devs = []
    for seed in range(size["mc_seeds"]):
        cfg = SessionConfig(n=n, channel=ChannelModel("depolarizing", 0.1), rng_seed=seed,
                            partial_blocks=True)
        devs.append(abs(run_session(cfg).observed_e - 0.05))
    worst = max(devs)
    return CheckResult(9, "observed e concentrates at p/2", worst <= tol,
                       f"n={n}, {len(devs)} seeds, max |e - 0.05| {worst:.4f} (tol {tol:.4f})")


def check_reconciliation(size) -> CheckResult:
    n = 14
    blocks = n // 7
    runs = mismatches = bad_len = 0
    for seed in range(size["recon_seeds"]):
        cfg = SessionConfig(n=n, channel=ChannelModel("identity"), css=named_css("steane"), rng_seed=seed)
        # every pattern of at most one flip per block
        for choice in itertools.product(range(8), repeat=blocks):
            pos = [7 * j + c - 1 for j, c in enumerate(choice) if c]
            res = run_session_with_injected_errors(cfg, pos)
            runs += 1
            mismatches += not res.keys_agree
            if not pos:
                bad_len += res.key_alice.size != blocks
    ok = mismatches == 0 and bad_len == 0
    return CheckResult(10, "Steane reconciliation corrects one error per block", ok,
                       f"{runs} runs, {mismatches} key mismatches, {bad_len} wrong key lengths")


def check_refresh_algebra(size) -> CheckResult:
    failures = cases = 0
    for n2 in range(2, size["refresh_max"] + 1, 2):
        for kp in sorted({0, 1, n2 // 3, n2 // 2, n2 - 1, n2}):
            code = ToeplitzCode(n2, kp, seed=n2 * 100 + kp)
            words = _all_words(n2)
            out = refresh_base(words, code)
            cases += 1
            if out.shape[1] != n2 - kp:
                failures += 1
                continue
            packed = out.astype(np.int64) @ (1 << np.arange(out.shape[1], dtype=np.int64))
            if np.unique(packed).size != 2 ** (n2 - kp):
                failures += 1
                continue
            for c in code.generator:
                if not np.array_equal(refresh_base(words ^ c, code), out):
                    failures += 1
                    break
    return CheckResult(11, "base refresh is a surjective coset map", failures == 0,
                       f"{cases} codes with 2n <= {size['refresh_max']}, {failures} failures")


def check_reuse_totals(size) -> CheckResult:
    n = size["reuse_n"]
    worst = 0.0
    parts = []
    for e in (0.02, 0.05, 0.08):
        cfg = SessionConfig(n=n, channel=ChannelModel("depolarizing", 2 * e), rng_seed=1)
        rep = run_reuse_loop(cfg, size["reuse_rounds"], sizing="ideal")
        target = total_key_ratio(e)
        rel = abs(rep.key_ratio - target) / target
        worst = max(worst, rel)
        parts.append(f"e={e}: {rep.key_ratio:.5f} vs {target:.5f}")
    return CheckResult(12, "reuse totals match n R_k / (1 - R_b)", worst <= 0.01,
                       f"{'; '.join(parts)}; max rel err {worst:.2e} (tol 1e-2)")


def check_cli_determinism(size) -> CheckResult:
    from rbqkd.cli import main

    runs = {
        "session": ["session", "--n", "700", "--channel", "depolarizing:0.1", "--seed", "5"],
        "reuse": ["reuse", "--n", "7000", "--channel", "depolarizing:0.1", "--rounds", "5", "--seed", "5"],
    }
    same = []
    with tempfile.TemporaryDirectory() as tmp:
        for name, argv in runs.items():
            blobs = []
            for i in range(2):
                out = Path(tmp) / f"{name}{i}.json"
                with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
                    main(argv + ["--out", str(out)])
                blobs.append(out.read_bytes())
            same.append(blobs[0] == blobs[1] and len(blobs[0]) > 0)
    return CheckResult(13, "CLI outputs are byte-identical across runs", all(same),
                       ", ".join(f"{k}: {'identical' if s else 'DIFFER'}" for k, s in zip(runs, same)))


CHECKS = (
    check_formula_oracle, check_base_bit_zero, check_comm_symmetry, check_base_phase_bound,
    check_named_channels, check_thresholds, check_rate_curves, check_cross_level,
    check_concentration, check_reconciliation, check_refresh_algebra, check_reuse_totals,
    check_cli_determinism,
)


def run_selftest(scale: str = "reduced") -> list[CheckResult]:
    size = SIZES[scale]
    results = []
    for number, check in enumerate(CHECKS, start=1):
        try:
            results.append(check(size))
        except Exception as exc:  # a crash is a failed check, keep going
            results.append(CheckResult(number, check.__name__, False, f"raised {exc!r}"))
    return results
