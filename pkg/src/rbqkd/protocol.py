"""Prepare-and-measure BB84 with a pre-shared, reusable base string.

Alice and Bob share a 2n-bit base string ``b`` that fixes the basis of every
qubit, so no qubit is lost to basis mismatch. Half the qubits are checked to
estimate the channel bit error rate ``e``; the other half yield a key through
CSS reconciliation (random C1 codeword masking, coset labels in C1/C2). The
base string is refreshed by compressing ``b`` modulo a second code C2', and the
refreshed string seeds the next round.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Union

import numpy as np

from rbqkd.attacks import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    ChannelModel,
    KrausChannel,
    build_channel,
)
from rbqkd.codes import (
    CssCode,
    LinearCode,
    ToeplitzCode,
    as_bits,
    bits_to_str,
    encode,
    named_code,
    named_css,
    refresh_base,
    syndrome_decode,
)
from rbqkd.error_rates import error_rates_formula
from rbqkd.rates import base_rate, key_rate, key_threshold

_ONE_OUTCOME = (KET_1, KET_MINUS)  # outcome-1 state of the Z and X bases
_PREP_KETS = ((KET_0, KET_1), (KET_PLUS, KET_MINUS))  # [base][value]

AUTO = "auto"


# -- single-qubit primitives ------------------------------------------------


@dataclass(frozen=True)
class QubitPrep:
    base_bit: int
    value_bit: int

    def __post_init__(self):
        if self.base_bit not in (0, 1) or self.value_bit not in (0, 1):
            raise ValueError("base and value bits must be 0 or 1")


def prepare_qubit(p: QubitPrep) -> np.ndarray:
    """|0>,|1> for base 0 and |+>,|-> for base 1, as a density matrix."""
    ket = _PREP_KETS[p.base_bit][p.value_bit]
    return np.outer(ket, ket.conj())


def _outcome_one_probability(rho: np.ndarray, base_bit: int) -> float:
    ket = _ONE_OUTCOME[base_bit]
    return float(np.real(ket.conj() @ rho @ ket))


def measure_qubit(state: np.ndarray, base_bit: int, rand: float) -> int:
    """Projective Z (base 0) or X (base 1) measurement; outcome 1 iff ``rand < P(1)``."""
    rho = np.asarray(state, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError("qubit state must be 2x2")
    if (
        np.max(np.abs(rho - rho.conj().T)) > 1e-10
        or abs(np.trace(rho) - 1) > 1e-10
        or np.linalg.eigvalsh(rho)[0] < -1e-9
    ):
        raise ValueError("not a valid density matrix")
    if base_bit not in (0, 1):
        raise ValueError("base bit must be 0 or 1")
    if not 0.0 <= rand < 1.0:
        raise ValueError("rand must lie in [0, 1)")
    return int(rand < _outcome_one_probability(rho, base_bit))


def qubit_error_probability(p: QubitPrep, ch: KrausChannel) -> float:
    """Probability that Bob, measuring in ``p.base_bit``, reads a bit other than ``p.value_bit``."""
    out = ch.apply(prepare_qubit(p))
    p_one = _outcome_one_probability(out, p.base_bit)
    return p_one if p.value_bit == 0 else 1.0 - p_one


def _outcome_one_table(ch: KrausChannel) -> np.ndarray:
    """``table[prep_base, value, meas_base]`` = P(outcome 1) after the channel."""
    table = np.empty((2, 2, 2))
    for prep_base in (0, 1):
        for value in (0, 1):
            out = ch.apply(prepare_qubit(QubitPrep(prep_base, value)))
            for meas_base in (0, 1):
                table[prep_base, value, meas_base] = _outcome_one_probability(out, meas_base)
    return table


# -- configuration and results ---------------------------------------------


@dataclass(frozen=True)
class SessionConfig:
    """One protocol run on ``2n`` qubits.

    ``css`` and ``c2_prime`` take objects or names understood by
    ``named_css``/``named_code``. ``c2_prime="auto"`` picks a random systematic
    code whose output keeps ``floor(2n (1 - H(2e)))`` bits at the observed ``e``.
    ``abort_threshold=None`` means the key-rate threshold (about 11%).
    With ``partial_blocks`` an ``n`` that is not a multiple of the CSS block
    length is accepted and the trailing code qubits are left unused.
    """

    n: int
    channel: Union[ChannelModel, KrausChannel]
    css: Union[CssCode, str] = "steane"
    c2_prime: Union[LinearCode, str] = AUTO
    abort_threshold: Optional[float] = None
    rng_seed: int = 0
    partial_blocks: bool = False

    @property
    def kraus(self) -> KrausChannel:
        if isinstance(self.channel, KrausChannel):
            return self.channel
        return build_channel(self.channel)

    @property
    def css_code(self) -> CssCode:
        return named_css(self.css) if isinstance(self.css, str) else self.css

    @property
    def threshold(self) -> float:
        return key_threshold() if self.abort_threshold is None else self.abort_threshold

    def c2_prime_code(self) -> Optional[LinearCode]:
        """Explicit C2', or ``None`` when it is chosen from the observed error rate."""
        if isinstance(self.c2_prime, LinearCode):
            return self.c2_prime
        if self.c2_prime == AUTO:
            return None
        return named_code(self.c2_prime)

    def validate(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        css = self.css_code
        if not self.partial_blocks and self.n % css.n:
            raise ValueError(f"CSS block length {css.n} does not divide n = {self.n}")
        c2p = self.c2_prime_code()
        if c2p is not None and c2p.n != 2 * self.n:
            raise ValueError(f"C2' has length {c2p.n}, expected 2n = {2 * self.n}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"abort threshold must be in [0, 1], got {self.threshold}")
        self.kraus  # noqa: B018 - builds and validates the channel

    def describe(self) -> dict:
        ch = self.channel
        channel = ch.spec if isinstance(ch, ChannelModel) else (ch.label or "kraus")
        css = self.css if isinstance(self.css, str) else self.css.name
        c2p = self.c2_prime if isinstance(self.c2_prime, str) else self.c2_prime.name
        return {
            "n": int(self.n),
            "channel": channel,
            "css": css,
            "c2_prime": c2p,
            "abort_threshold": self.threshold,
            "rng_seed": int(self.rng_seed),
            "partial_blocks": self.partial_blocks,
        }


@dataclass(frozen=True)
class Message:
    """One public announcement on the classical channel."""

    step: int
    sender: str
    payload: dict

    def to_dict(self) -> dict:
        return {"step": self.step, "sender": self.sender, "payload": self.payload}


@dataclass
class SessionResult:
    observed_e: float
    aborted: bool
    key_alice: np.ndarray
    key_bob: np.ndarray
    refreshed_base: np.ndarray
    transcript: list[Message]
    config: dict = field(default_factory=dict)

    @property
    def keys_agree(self) -> bool:
        return np.array_equal(self.key_alice, self.key_bob)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "observed_e": self.observed_e,
            "aborted": self.aborted,
            "key_alice": bits_to_str(self.key_alice),
            "key_bob": bits_to_str(self.key_bob),
            "refreshed_base": bits_to_str(self.refreshed_base),
            "transcript": [m.to_dict() for m in self.transcript],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    base_len_in: int
    observed_e: float
    key_len_out: int
    base_len_out: int
    aborted: bool = False


@dataclass
class ReuseReport:
    rounds: list[RoundRecord]
    sizing: str
    nominal_e: float
    config: dict = field(default_factory=dict)

    @property
    def initial_base_len(self) -> int:
        return self.rounds[0].base_len_in if self.rounds else 0

    @property
    def total_key(self) -> int:
        return sum(r.key_len_out for r in self.rounds)

    @property
    def key_ratio(self) -> float:
        """Cumulative key length over the initial base-string length."""
        return self.total_key / self.initial_base_len if self.initial_base_len else 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "sizing": self.sizing,
            "nominal_e": self.nominal_e,
            "rounds": [asdict(r) for r in self.rounds],
            "totals": {
                "rounds_run": len(self.rounds),
                "initial_base_len": self.initial_base_len,
                "total_key": self.total_key,
                "key_ratio": self.key_ratio,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# -- role state machines -----------------------------------------------------


class Phase(enum.Enum):
    START = enum.auto()
    QUBITS = enum.auto()  # qubits prepared / measured
    CHECKED = enum.auto()
    RECONCILED = enum.auto()
    ABORTED = enum.auto()


class ProtocolError(RuntimeError):
    """A role was driven out of protocol order."""


class _Role:
    name = "role"

    def __init__(self, base: np.ndarray):
        self.base = base
        self.phase = Phase.START
        self.raw: Optional[np.ndarray] = None
        self.check_idx: Optional[np.ndarray] = None
        self.code_idx: Optional[np.ndarray] = None

    def _require(self, expected: Phase) -> None:
        if self.phase is not expected:
            raise ProtocolError(f"{self.name}: expected phase {expected.name}, in {self.phase.name}")

    def _advance(self, expected: Phase, nxt: Phase) -> None:
        self._require(expected)
        self.phase = nxt

    def agree_checks(self, permutation_seed: int) -> None:
        perm = np.random.default_rng(permutation_seed).permutation(self.base.size)
        n = self.base.size // 2
        self.check_idx, self.code_idx = perm[:n], perm[n:]

    def check_bits(self) -> np.ndarray:
        return self.raw[self.check_idx]

    def estimate(self, own: np.ndarray, other: np.ndarray, threshold: float) -> float:
        e = float(np.count_nonzero(own != other)) / own.size
        self._advance(Phase.QUBITS, Phase.CHECKED if e < threshold else Phase.ABORTED)
        return e

    def code_blocks(self, block: int) -> np.ndarray:
        usable = (self.code_idx.size // block) * block
        return self.raw[self.code_idx[:usable]].reshape(-1, block)

    def refresh(self, c2_prime: LinearCode) -> np.ndarray:
        return refresh_base(self.base, c2_prime)


class Alice(_Role):
    name = "alice"

    def __init__(self, base: np.ndarray, rng: np.random.Generator):
        super().__init__(base)
        self.rng = rng
        self.key: Optional[np.ndarray] = None

    def prepare(self) -> np.ndarray:
        """Random value bits; the preparation basis of qubit i is ``base[i]``."""
        self._advance(Phase.START, Phase.QUBITS)
        self.raw = self.rng.integers(0, 2, self.base.size, dtype=np.uint8)
        return self.raw

    def reconcile(self, css: CssCode) -> np.ndarray:
        """Pick a random C1 codeword per block and return the public mask ``x + u``."""
        self._require(Phase.CHECKED)
        x = self.code_blocks(css.n)
        messages = self.rng.integers(0, 2, (x.shape[0], css.c1.k), dtype=np.uint8)
        u = encode(css.c1, messages)
        self.key = css.coset_label(u).ravel()
        self._advance(Phase.CHECKED, Phase.RECONCILED)
        return x ^ u


class Bob(_Role):
    name = "bob"

    def __init__(self, base: np.ndarray):
        super().__init__(base)
        self.key: Optional[np.ndarray] = None

    def measure(self, p_one: np.ndarray, rand: np.ndarray) -> None:
        """Measure each qubit in the basis ``base[i]``; ``p_one[i]`` is P(outcome 1)."""
        self._advance(Phase.START, Phase.QUBITS)
        self.raw = (rand < p_one).astype(np.uint8)

    def reconcile(self, css: CssCode, mask: np.ndarray) -> None:
        self._require(Phase.CHECKED)
        y = self.code_blocks(css.n)
        u_hat = syndrome_decode(css.c1, y ^ mask)
        self.key = css.coset_label(u_hat).ravel()
        self._advance(Phase.CHECKED, Phase.RECONCILED)


# -- session driver ---------------------------------------------------------


def _auto_c2_prime(n2: int, e: float, seed: int) -> ToeplitzCode:
    keep = math.floor(n2 * base_rate(min(e, 0.5)))
    return ToeplitzCode(n2, n2 - keep, seed)


def _run(
    cfg: SessionConfig,
    base: Optional[np.ndarray] = None,
    injected: Optional[Iterable[int]] = None,
) -> SessionResult:
    cfg.validate()
    n, n2 = int(cfg.n), 2 * int(cfg.n)
    css = cfg.css_code
    c2_prime = cfg.c2_prime_code()
    threshold = cfg.threshold
    ch = cfg.kraus
    if injected is not None:
        injected = sorted(set(int(i) for i in injected))
        if injected and not (0 <= injected[0] and injected[-1] < n):
            raise ValueError(f"injected error positions must be code-qubit indices in [0, {n})")

    shared_ss, alice_ss, physics_ss, public_ss = np.random.SeedSequence(cfg.rng_seed).spawn(4)
    if base is None:
        base = np.random.default_rng(shared_ss).integers(0, 2, n2, dtype=np.uint8)
    else:
        base = as_bits(base, n2)
    physics = np.random.default_rng(physics_ss)
    public = np.random.default_rng(public_ss)

    alice = Alice(base.copy(), np.random.default_rng(alice_ss))
    bob = Bob(base.copy())
    transcript: list[Message] = []

    # steps 1-4: prepare, transmit, measure in the shared bases
    values = alice.prepare()
    p_one = _outcome_one_table(ch)[alice.base, values, bob.base]
    bob.measure(p_one, physics.random(n2))
    transcript.append(Message(4, "bob", {"received": n2}))

    # step 5: public coin for the check set
    perm_seed = int(public.integers(0, 2**63 - 1))
    transcript.append(Message(5, "alice", {"permutation_seed": perm_seed, "num_check": n}))
    alice.agree_checks(perm_seed)
    bob.agree_checks(perm_seed)

    if injected is not None:
        # code qubits bypass the channel; flip exactly the requested Bob bits
        code_bits = values[bob.code_idx].copy()
        code_bits[injected] ^= 1
        bob.raw[bob.code_idx] = code_bits

    # step 6: disclose check bits, estimate e, abort if too noisy
    a_check, b_check = alice.check_bits(), bob.check_bits()
    transcript.append(Message(6, "alice", {"check_bits": bits_to_str(a_check)}))
    transcript.append(Message(6, "bob", {"check_bits": bits_to_str(b_check)}))
    e = alice.estimate(a_check, b_check, threshold)
    bob.estimate(b_check, a_check, threshold)
    aborted = alice.phase is Phase.ABORTED
    transcript.append(
        Message(6, "alice", {"observed_e": e, "threshold": threshold, "abort": aborted})
    )
    empty = np.zeros(0, dtype=np.uint8)
    if aborted:
        return SessionResult(e, True, empty, empty.copy(), empty.copy(), transcript, cfg.describe())

    # step 7: CSS reconciliation on the code qubits
    mask = alice.reconcile(css)
    transcript.append(Message(7, "alice", {"css": css.name, "mask": bits_to_str(mask)}))
    bob.reconcile(css, mask)

    # step 8: compress the whole base string (check positions included)
    if c2_prime is None:
        c2_prime = _auto_c2_prime(n2, e, perm_seed)
    transcript.append(
        Message(8, "alice", {"c2_prime": c2_prime.name, "n": c2_prime.n, "k": c2_prime.k})
    )
    refreshed = alice.refresh(c2_prime)
    if not np.array_equal(refreshed, bob.refresh(c2_prime)):
        raise AssertionError("base strings diverged")
    return SessionResult(e, False, alice.key, bob.key, refreshed, transcript, cfg.describe())


def run_session(cfg: SessionConfig, base=None) -> SessionResult:
    """Run the full protocol once. ``base`` overrides the freshly drawn base string."""
    return _run(cfg, base=base)


def run_session_with_injected_errors(
    cfg: SessionConfig, error_positions: Iterable[int], base=None
) -> SessionResult:
    """Run with noiseless code qubits except for Bob bit flips at ``error_positions``.

    Positions index the code qubits in check-set order, so block ``j`` of the
    CSS code covers positions ``j*css.n`` to ``(j+1)*css.n - 1``. Check qubits
    still cross the channel.
    """
    return _run(cfg, base=base, injected=error_positions)


def _round_seed(seed: int, round_index: int) -> int:
    if round_index == 0:
        return seed
    return int(np.random.SeedSequence([seed, round_index]).generate_state(1, np.uint64)[0])


def run_reuse_loop(cfg: SessionConfig, rounds: int, sizing: str = "ideal") -> ReuseReport:
    """Repeat the protocol, each round encoding with the previous refreshed base.

    ``sizing="ideal"`` sizes C2' and the key from the rates at the channel's
    exact bit error rate, floored per round; ``sizing="session"`` reports the
    keys the CSS code actually produced and sizes C2' from the observed rate.
    Round ``r + 1`` runs on ``floor(len_r / 2)`` qubit pairs; the loop stops
    once fewer than one CSS block of code qubits would remain.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if sizing not in ("ideal", "session"):
        raise ValueError(f"sizing must be 'ideal' or 'session', got {sizing!r}")
    cfg = replace(cfg, partial_blocks=True)
    cfg.validate()
    e_nominal = error_rates_formula(cfg.kraus).e_bit_comm
    block = cfg.css_code.n
    records: list[RoundRecord] = []
    base = None
    n_r = int(cfg.n)
    for r in range(rounds):
        if n_r < block:
            break
        seed = _round_seed(cfg.rng_seed, r)
        if sizing == "ideal":
            c2p = _auto_c2_prime(2 * n_r, e_nominal, seed)
        else:
            c2p = AUTO
        result = _run(replace(cfg, n=n_r, rng_seed=seed, c2_prime=c2p), base=base)
        if result.aborted:
            key_len = 0
        elif sizing == "ideal":
            key_len = math.floor(n_r * max(key_rate(min(e_nominal, 0.5)), 0.0))
        else:
            key_len = int(result.key_alice.size)
        records.append(
            RoundRecord(r + 1, 2 * n_r, result.observed_e, key_len, int(result.refreshed_base.size), result.aborted)
        )
        if result.aborted:
            break
        n_r = result.refreshed_base.size // 2
        base = result.refreshed_base[: 2 * n_r]
    return ReuseReport(records, sizing, e_nominal, cfg.describe())
