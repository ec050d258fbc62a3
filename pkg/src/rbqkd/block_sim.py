"""Dense simulation of one protocol block of four qubits.

Qubits 1 and 4 form the base pair, qubits 2 and 3 the communicating pair; only
qubit 3 crosses the channel. Basis states are indexed ``8*q1 + 4*q2 + 2*q3 + q4``
so qubit 1 is the most significant bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np

from rbqkd.attacks import COMPLETENESS_TOL, I2, PAULI_X, PAULI_Z, KrausChannel, validate_channel
from rbqkd.exceptions import NumericalIntegrityError

NUM_QUBITS = 4
DIM = 2**NUM_QUBITS

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
UNITARY_TOL = 1e-10
CLAMP_TOL = 1e-9

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_P0 = np.diag([1, 0]).astype(complex)
_P1 = np.diag([0, 1]).astype(complex)

OBSERVABLES = ("Z1Z4", "X1X4", "Z2Z3", "X2X3")


def embed(ops: dict[int, np.ndarray]) -> np.ndarray:
    """Tensor product of single-qubit operators, identity on qubits not in ``ops``."""
    for q in ops:
        if not 1 <= q <= NUM_QUBITS:
            raise ValueError(f"qubit index must be in 1..{NUM_QUBITS}, got {q}")
    return reduce(np.kron, [ops.get(q, I2) for q in range(1, NUM_QUBITS + 1)])


@lru_cache(maxsize=None)
def _controlled_hadamard(control: int, target: int) -> np.ndarray:
    u = embed({control: _P0}) + embed({control: _P1, target: HADAMARD})
    u.setflags(write=False)
    return u


def controlled_hadamard(control_qubit: int, target_qubit: int) -> np.ndarray:
    """16x16 controlled-Hadamard with the given 1-based control and target."""
    if control_qubit == target_qubit:
        raise ValueError("control and target qubit must differ")
    for q in (control_qubit, target_qubit):
        if not 1 <= q <= NUM_QUBITS:
            raise ValueError(f"qubit index must be in 1..{NUM_QUBITS}, got {q}")
    return _controlled_hadamard(control_qubit, target_qubit)


@lru_cache(maxsize=None)
def observable_matrix(tag: str) -> np.ndarray:
    """Matrix of one of the two-qubit parity observables in ``OBSERVABLES``."""
    if tag not in OBSERVABLES:
        raise ValueError(f"unknown observable {tag!r}; expected one of {OBSERVABLES}")
    pauli = PAULI_Z if tag[0] == "Z" else PAULI_X
    a, b = int(tag[1]), int(tag[3])
    m = embed({a: pauli, b: pauli})
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class BlockState:
    """Density matrix of one block. Validated on construction."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (DIM, DIM):
            raise ValueError(f"block state must be {DIM}x{DIM}, got {rho.shape}")
        check_density_matrix(rho)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def expectation(self, op: np.ndarray) -> float:
        return float(np.real(np.trace(op @ self.rho)))

    def marginal(self, qubit: int) -> np.ndarray:
        """Reduced 2x2 density matrix of a single qubit."""
        t = self.rho.reshape((2,) * (2 * NUM_QUBITS))
        keep = qubit - 1
        others = [q for q in range(NUM_QUBITS) if q != keep]
        # trace out the other qubits pairwise (row axis q, column axis q + 4)
        letters = "abcdefgh"
        row = list(letters[:NUM_QUBITS])
        col = list(letters[NUM_QUBITS:])
        for q in others:
            col[q] = row[q]
        subscripts = "".join(row) + "".join(col) + "->" + row[keep] + col[keep]
        return np.einsum(subscripts, t)


def check_density_matrix(rho: np.ndarray) -> None:
    """Raise ``NumericalIntegrityError`` unless ``rho`` is a valid state."""
    if not np.all(np.isfinite(rho)):
        raise NumericalIntegrityError("density matrix contains non-finite entries")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise NumericalIntegrityError(f"density matrix not Hermitian (residual {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise NumericalIntegrityError(f"density matrix trace {tr} differs from 1")
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lam < -PSD_TOL:
        raise NumericalIntegrityError(f"density matrix has negative eigenvalue {lam:.3e}")


def initial_block_state() -> BlockState:
    """Both pairs in |Phi+>: (|00> + |11>)_14 (|00> + |11>)_23 / 2."""
    psi = np.zeros(DIM, dtype=complex)
    for q1, q2, q3, q4 in ((0, 0, 0, 0), (0, 1, 1, 0), (1, 0, 0, 1), (1, 1, 1, 1)):
        psi[8 * q1 + 4 * q2 + 2 * q3 + q4] = 0.5
    return BlockState(np.outer(psi, psi.conj()))


def apply_unitary(state: BlockState, u: np.ndarray) -> BlockState:
    """Conjugate the block state by a 16x16 unitary."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (DIM, DIM):
        raise ValueError(f"unitary must be {DIM}x{DIM}, got {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(DIM)))
    if err > UNITARY_TOL:
        raise ValueError(f"matrix is not unitary (residual {err:.3e})")
    return BlockState(u @ state.rho @ u.conj().T)


def apply_channel_on_qubit3(state: BlockState, ch: KrausChannel) -> BlockState:
    """Apply Eve's Kraus channel to the transmitted qubit (qubit 3)."""
    residual = validate_channel(ch)
    if residual > COMPLETENESS_TOL:
        raise ValueError(f"channel is not trace preserving (residual {residual:.3e})")
    out = np.zeros((DIM, DIM), dtype=complex)
    for m in ch.operators:
        big = embed({3: m})
        out += big @ state.rho @ big.conj().T
    return BlockState(out)


def corrupted_block_state(ch: KrausChannel) -> BlockState:
    """Block state seen by the post-processing: CH43 S(CH13 rho0 CH13^dag) CH43^dag."""
    state = initial_block_state()
    state = apply_unitary(state, controlled_hadamard(1, 3))
    state = apply_channel_on_qubit3(state, ch)
    return apply_unitary(state, controlled_hadamard(4, 3))


def minus_one_rate(state: BlockState, obs: str) -> float:
    """Probability of the -1 outcome when measuring ``obs`` on ``state``."""
    rate = (1.0 - state.expectation(observable_matrix(obs))) / 2.0
    if rate < -CLAMP_TOL or rate > 1.0 + CLAMP_TOL:
        raise NumericalIntegrityError(f"{obs} rate {rate} outside [0, 1]")
    return min(max(rate, 0.0), 1.0)
