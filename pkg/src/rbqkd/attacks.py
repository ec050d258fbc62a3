"""Eavesdropper channels acting on the transmitted qubit.

Every attack is reduced to a single-qubit Kraus channel ``rho -> sum M rho M^dag``.
Named models cover the usual noise and intercept-resend baselines; arbitrary
Kraus sets can be loaded from JSON or drawn at random for coverage tests.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

COMPLETENESS_TOL = 1e-10
MAX_KRAUS = 8
_MAX_CONDITION = 1e12

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


def _projector(ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, ket.conj())


@dataclass(frozen=True)
class KrausChannel:
    """Trace-preserving single-qubit channel given by its Kraus operators.

    The operators are stored as an ``(m, 2, 2)`` complex array. Construction
    rejects anything that is not trace preserving to within
    ``COMPLETENESS_TOL``.
    """

    operators: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        ops = np.array(self.operators, dtype=complex)
        if ops.ndim == 2:
            ops = ops[np.newaxis]
        if ops.ndim != 3 or ops.shape[1:] != (2, 2) or ops.shape[0] == 0:
            raise ValueError(f"Kraus operators must have shape (m, 2, 2), got {ops.shape}")
        if not np.all(np.isfinite(ops)):
            raise ValueError("Kraus operators contain non-finite entries")
        ops.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        residual = validate_channel(self)
        if residual > COMPLETENESS_TOL:
            raise ValueError(
                f"channel is not trace preserving: completeness residual {residual:.3e}"
            )

    def __len__(self) -> int:
        return self.operators.shape[0]

    def __iter__(self):
        return iter(self.operators)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Apply the channel to a 2x2 density matrix."""
        return np.einsum("mij,jk,mlk->il", self.operators, rho, self.operators.conj())

    def to_json(self) -> list:
        """Nested ``[[ [re, im], ... ], ...]`` lists, the custom-channel file format."""
        return [
            [[[float(z.real), float(z.imag)] for z in row] for row in op]
            for op in self.operators
        ]


def validate_channel(ch: KrausChannel | Sequence[np.ndarray]) -> float:
    """Return the completeness residual ``max |sum M^dag M - I|``."""
    ops = ch.operators if isinstance(ch, KrausChannel) else np.asarray(ch, dtype=complex)
    total = np.einsum("mji,mjk->ik", ops.conj(), ops)
    return float(np.max(np.abs(total - I2)))


@dataclass(frozen=True)
class ChannelModel:
    """A named attack. ``p`` is required for the parametrised kinds."""

    kind: str
    p: Optional[float] = None
    custom: Optional[KrausChannel] = field(default=None, compare=False)

    KINDS = ("identity", "bitflip", "phaseflip", "depolarizing", "ir-z", "ir-random", "custom")
    PARAMETRISED = ("bitflip", "phaseflip", "depolarizing")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind in self.PARAMETRISED:
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError(f"{self.kind} needs a probability in [0, 1], got {self.p}")
        if self.kind == "custom" and self.custom is None:
            raise ValueError("custom channel model needs a KrausChannel")

    @property
    def spec(self) -> str:
        if self.kind in self.PARAMETRISED:
            return f"{self.kind}:{self.p:g}"
        return self.kind


def build_channel(model: ChannelModel) -> KrausChannel:
    """Kraus representation of a named channel model."""
    kind, p = model.kind, model.p
    label = model.spec
    if kind == "identity":
        ops = [I2]
    elif kind == "bitflip":
        ops = [np.sqrt(1 - p) * I2, np.sqrt(p) * PAULI_X]
    elif kind == "phaseflip":
        ops = [np.sqrt(1 - p) * I2, np.sqrt(p) * PAULI_Z]
    elif kind == "depolarizing":
        w = np.sqrt(p / 4)
        ops = [np.sqrt(1 - 3 * p / 4) * I2, w * PAULI_X, w * PAULI_Y, w * PAULI_Z]
    elif kind == "ir-z":
        ops = [_projector(KET_0), _projector(KET_1)]
    elif kind == "ir-random":
        ops = [_projector(k) / np.sqrt(2) for k in (KET_0, KET_1, KET_PLUS, KET_MINUS)]
    else:
        return model.custom
    return KrausChannel(np.stack(ops), label=label)


def _inverse_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    return (v / np.sqrt(w)) @ v.conj().T


def random_channel(seed: int, num_kraus: int) -> KrausChannel:
    """Seed-deterministic random trace-preserving channel.

    Draws ``num_kraus`` complex Gaussian 2x2 matrices and normalises them on
    the right by ``(sum M^dag M)^(-1/2)``, so completeness holds by
    construction. Ill-conditioned draws are redrawn from a perturbed seed.
    """
    if not 1 <= num_kraus <= MAX_KRAUS:
        raise ValueError(f"num_kraus must be in [1, {MAX_KRAUS}], got {num_kraus}")
    attempt = 0
    while True:
        rng = np.random.default_rng([seed, num_kraus, attempt])
        raw = rng.normal(size=(num_kraus, 2, 2)) + 1j * rng.normal(size=(num_kraus, 2, 2))
        gram = np.einsum("mji,mjk->ik", raw.conj(), raw)
        if np.linalg.cond(gram) <= _MAX_CONDITION:
            break
        attempt += 1
    ops = raw @ _inverse_sqrt(gram)
    return KrausChannel(ops, label=f"random:{seed}:{num_kraus}")


def mixture(ch1: KrausChannel, ch2: KrausChannel, weight: float) -> KrausChannel:
    """Probabilistic mixture: ``ch1`` with probability ``weight``, else ``ch2``."""
    if not 0.0 <= weight <= 1.0:
        raise ValueError("mixture weight must be in [0, 1]")
    ops = np.concatenate([np.sqrt(weight) * ch1.operators, np.sqrt(1 - weight) * ch2.operators])
    return KrausChannel(ops, label=f"mix({ch1.label},{ch2.label},{weight:g})")


def saturation_channel(delta_sq: float) -> KrausChannel:
    """``{sqrt(1 - 2 d^2) I, d (Z - X)}``, the family where the base phase bound is tight."""
    if not 0.0 <= delta_sq <= 0.5:
        raise ValueError("delta_sq must be in [0, 0.5]")
    d = np.sqrt(delta_sq)
    ops = np.stack([np.sqrt(1 - 2 * delta_sq) * I2, d * (PAULI_Z - PAULI_X)])
    return KrausChannel(ops, label=f"saturation:{delta_sq:g}")


def load_custom_channel(path: str | Path) -> KrausChannel:
    """Read a JSON list of 2x2 matrices whose entries are ``[re, im]`` pairs."""
    path = Path(path)
    with path.open() as fh:
        data = json.load(fh)
    try:
        ops = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed Kraus operator list") from exc
    if ops.ndim != 4 or ops.shape[1:] != (2, 2, 2):
        raise ValueError(f"{path}: expected shape (m, 2, 2, 2), got {ops.shape}")
    return KrausChannel(ops[..., 0] + 1j * ops[..., 1], label=f"custom:{path.name}")


def parse_channel_spec(spec: str) -> ChannelModel:
    """Parse ``identity``, ``bitflip:<p>``, ``phaseflip:<p>``, ``depolarizing:<p>``,
    ``ir-z``, ``ir-random`` or ``custom:<path>``."""
    name, _, arg = spec.strip().partition(":")
    if name in ChannelModel.PARAMETRISED:
        try:
            p = float(arg)
        except ValueError:
            raise ValueError(f"bad probability in channel spec {spec!r}") from None
        return ChannelModel(name, p)
    if name == "custom":
        if not arg:
            raise ValueError("custom channel spec needs a path")
        return ChannelModel("custom", custom=load_custom_channel(arg))
    if name in ("identity", "ir-z", "ir-random") and not arg:
        return ChannelModel(name)
    raise ValueError(f"unknown channel spec {spec!r}")
