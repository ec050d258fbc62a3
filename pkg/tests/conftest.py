import numpy as np
import pytest


def _apply_1q(psi, u, qubit):
    """Apply a 2x2 operator to a 4-qubit state vector by axis contraction."""
    t = psi.reshape(2, 2, 2, 2)
    t = np.moveaxis(np.tensordot(u, t, axes=([1], [qubit - 1])), 0, qubit - 1)
    return t.reshape(16)


def _apply_ch(psi, control, target):
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    t = psi.reshape(2, 2, 2, 2).astype(complex)
    out = t.copy()
    idx = [slice(None)] * 4
    idx[control - 1] = 1
    sub = t[tuple(idx)]
    tgt_axis = target - 1 - (1 if target > control else 0)
    out[tuple(idx)] = np.moveaxis(np.tensordot(h, sub, axes=([1], [tgt_axis])), 0, tgt_axis)
    return out.reshape(16)


def brute_force_block(kraus_ops):
    """Corrupted block state built from pure-state branches, one per Kraus operator.

    Independent of the package: state vectors, axis contraction, no Kronecker products.
    """
    psi = np.zeros(16, dtype=complex)
    for bits in ("0000", "0110", "1001", "1111"):
        psi[int(bits, 2)] = 0.5
    psi = _apply_ch(psi, 1, 3)
    rho = np.zeros((16, 16), dtype=complex)
    for m in kraus_ops:
        branch = _apply_ch(_apply_1q(psi, np.asarray(m), 3), 4, 3)
        rho += np.outer(branch, branch.conj())
    return rho


def brute_force_rates(kraus_ops):
    """(Z2Z3, X2X3, Z1Z4, X1X4) minus-one rates via explicit parity sums."""
    rho = brute_force_block(kraus_ops)
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)

    def z_parity_rate(r, a, b):
        total = 0.0
        for i in range(16):
            bits = [(i >> (3 - q)) & 1 for q in range(4)]
            if bits[a - 1] ^ bits[b - 1]:
                total += r[i, i].real
        return total

    def rotate(r, qubits):
        u = np.eye(16, dtype=complex)
        for q in qubits:
            u = np.stack([_apply_1q(col, h, q) for col in u.T], axis=1)
        return u @ r @ u.conj().T

    return (
        z_parity_rate(rho, 2, 3),
        z_parity_rate(rotate(rho, (2, 3)), 2, 3),
        z_parity_rate(rho, 1, 4),
        z_parity_rate(rotate(rho, (1, 4)), 1, 4),
    )


@pytest.fixture
def brute_rates():
    return brute_force_rates
