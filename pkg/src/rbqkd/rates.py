"""Asymptotic key and base-string rates and the curves built from them."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable

from scipy.optimize import bisect

UNBOUNDED = math.inf
"""Total-key ratio at zero error: the geometric series of reuse rounds diverges."""

BASE_THRESHOLD = 0.25
CSV_HEADER = ("e", "R_k", "R_b", "Lk_over_2n")


def _check_domain(x: float, lo: float, hi: float, what: str) -> None:
    if not (lo <= x <= hi):
        raise ValueError(f"{what} must be in [{lo}, {hi}], got {x}")


def binary_entropy(x: float) -> float:
    """H(x) = -x log2 x - (1 - x) log2 (1 - x), with H(0) = H(1) = 0."""
    _check_domain(x, 0.0, 1.0, "entropy argument")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def key_rate(e: float) -> float:
    """Secure key rate 1 - 2H(e). Negative above the key threshold."""
    _check_domain(e, 0.0, 0.5, "bit error rate")
    return 1.0 - 2.0 * binary_entropy(e)


def base_rate(e: float, return_flag: bool = False):
    """Reusable base-string rate 1 - H(2e).

    Only meaningful for ``2e < 0.5``; above ``BASE_THRESHOLD`` the rate is 0.
    With ``return_flag`` the result is ``(rate, in_range)``.
    """
    _check_domain(e, 0.0, 0.5, "bit error rate")
    in_range = e <= BASE_THRESHOLD
    rate = 1.0 - binary_entropy(2 * e) if in_range else 0.0
    return (rate, in_range) if return_flag else rate


def total_key_ratio(e: float) -> float:
    """Total key from unlimited reuse, divided by the initial base length 2n.

    Returns ``UNBOUNDED`` at ``e = 0`` and 0 wherever the key rate is not positive.
    """
    _check_domain(e, 0.0, BASE_THRESHOLD, "bit error rate")
    if e == 0.0:
        return UNBOUNDED
    rk = key_rate(e)
    if rk <= 0.0:
        return 0.0
    return rk / (2.0 * (1.0 - base_rate(e)))


@lru_cache(maxsize=None)
def key_threshold() -> float:
    """Bit error rate where the key rate crosses zero (about 11%)."""
    return bisect(key_rate, 1e-6, BASE_THRESHOLD, xtol=1e-12)


def base_threshold() -> float:
    return BASE_THRESHOLD


@dataclass(frozen=True)
class RatePoint:
    e: float
    r_k: float
    r_b: float
    lk_over_2n: float

    @classmethod
    def at(cls, e: float) -> RatePoint:
        return cls(e, key_rate(e), base_rate(e), total_key_ratio(e))


def rate_curve(e_min: float, e_max: float, step: float) -> list[RatePoint]:
    """Rate points on the inclusive grid ``e_min, e_min + step, ..., e_max``."""
    if not (0.0 <= e_min < e_max <= BASE_THRESHOLD):
        raise ValueError(f"need 0 <= e_min < e_max <= {BASE_THRESHOLD}, got [{e_min}, {e_max}]")
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    count = int(math.floor((e_max - e_min) / step + 1e-9))
    grid = [min(round(e_min + i * step, 12), e_max) for i in range(count + 1)]
    return [RatePoint.at(e) for e in grid]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_rate_csv(points: Iterable[RatePoint], path: str | Path | None = None) -> str:
    """Serialise points as CSV (``inf`` marks an unbounded total-key ratio).

    Returns the CSV text; also writes it to ``path`` if given.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for pt in points:
        writer.writerow([_fmt(pt.e), _fmt(pt.r_k), _fmt(pt.r_b), _fmt(pt.lk_over_2n)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
