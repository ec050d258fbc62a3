"""Bit and phase error rates of the base and communicating pairs.

Two independent routes are provided: closed-form per-Kraus contributions summed
over the channel, and exact evaluation of the parity observables on the
corrupted 16x16 block state. They must agree for every trace-preserving channel.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from rbqkd.attacks import COMPLETENESS_TOL, KrausChannel, validate_channel
from rbqkd.block_sim import CLAMP_TOL, corrupted_block_state, minus_one_rate
from rbqkd.exceptions import NumericalIntegrityError

IMAG_TOL = 1e-12
RELATION_TOL = 1e-9


@dataclass(frozen=True)
class ErrorRates:
    e_bit_comm: float
    e_ph_comm: float
    e_bit_base: float
    e_ph_base: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not -CLAMP_TOL <= value <= 1 + CLAMP_TOL:
                raise NumericalIntegrityError(f"{name} = {value} outside [0, 1]")
            object.__setattr__(self, name, min(max(float(value), 0.0), 1.0))

    def as_array(self) -> np.ndarray:
        return np.array([self.e_bit_comm, self.e_ph_comm, self.e_bit_base, self.e_ph_base])

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RelationReport:
    ph_eq_bit_residual: float
    base_bit_residual: float
    ph_base_slack: float

    @property
    def holds(self) -> bool:
        return (
            self.ph_eq_bit_residual <= RELATION_TOL
            and self.base_bit_residual <= RELATION_TOL
            and self.ph_base_slack >= -RELATION_TOL
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _kraus_bit_error(a11: complex, a12: complex, a21: complex, a22: complex) -> float:
    return (
        abs(a11 - a22) ** 2 + abs(a12 - a21) ** 2 + 2 * abs(a12) ** 2 + 2 * abs(a21) ** 2
    ) / 8


def _kraus_base_phase_cross(a11: complex, a12: complex, a21: complex, a22: complex) -> complex:
    # value plus its complex conjugate; real up to rounding
    term = (-a11 + a22) * (np.conj(a12) + np.conj(a21))
    return (term + (-np.conj(a11) + np.conj(a22)) * (a12 + a21)) / 8


def _require_complete(ch: KrausChannel) -> None:
    residual = validate_channel(ch)
    if residual > COMPLETENESS_TOL:
        raise ValueError(f"channel is not trace preserving (residual {residual:.3e})")


def error_rates_formula(ch: KrausChannel) -> ErrorRates:
    """Sum of the closed-form per-Kraus error contributions."""
    _require_complete(ch)
    bit = 0.0
    cross = 0j
    for m in ch.operators:
        a11, a12, a21, a22 = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
        bit += _kraus_bit_error(a11, a12, a21, a22)
        cross += _kraus_base_phase_cross(a11, a12, a21, a22)
    if abs(cross.imag) > IMAG_TOL:
        raise NumericalIntegrityError(f"base phase cross term has imaginary part {cross.imag:.3e}")
    return ErrorRates(
        e_bit_comm=bit,
        e_ph_comm=bit,
        e_bit_base=0.0,
        e_ph_base=bit + cross.real,
    )


def error_rates_exact(ch: KrausChannel) -> ErrorRates:
    """Rates of -1 outcomes of Z2Z3, X2X3, Z1Z4, X1X4 on the simulated block."""
    _require_complete(ch)
    state = corrupted_block_state(ch)
    return ErrorRates(
        e_bit_comm=minus_one_rate(state, "Z2Z3"),
        e_ph_comm=minus_one_rate(state, "X2X3"),
        e_bit_base=minus_one_rate(state, "Z1Z4"),
        e_ph_base=minus_one_rate(state, "X1X4"),
    )


def check_relations(rates: ErrorRates) -> RelationReport:
    """Residuals of E_ph_comm = E_bit_comm, E_bit_base = 0 and E_ph_base <= 2 E_bit_comm."""
    return RelationReport(
        ph_eq_bit_residual=abs(rates.e_ph_comm - rates.e_bit_comm),
        base_bit_residual=rates.e_bit_base,
        ph_base_slack=2 * rates.e_bit_comm - rates.e_ph_base,
    )


def phase_error_bound(e: float) -> float:
    """Upper bound on the base-pair phase error rate given channel bit error ``e``."""
    if not 0.0 <= e <= 0.5:
        raise ValueError(f"bit error rate must be in [0, 0.5], got {e}")
    return min(2 * e, 1.0)
