import numpy as np
import pytest

from rbqkd.attacks import ChannelModel, KrausChannel, PAULI_X, build_channel, random_channel
from rbqkd.block_sim import (
    DIM,
    OBSERVABLES,
    BlockState,
    apply_channel_on_qubit3,
    apply_unitary,
    controlled_hadamard,
    corrupted_block_state,
    initial_block_state,
    minus_one_rate,
    observable_matrix,
)
from rbqkd.exceptions import NumericalIntegrityError


def basis_state(bits: str) -> np.ndarray:
    v = np.zeros(DIM, dtype=complex)
    v[int(bits, 2)] = 1
    return v


def pure(v):
    return BlockState(np.outer(v, v.conj()))


class TestInitialState:
    def test_entries(self):
        rho = initial_block_state().rho
        support = [int(b, 2) for b in ("0000", "0110", "1001", "1111")]
        expected = np.zeros((DIM, DIM))
        expected[np.ix_(support, support)] = 0.25
        assert np.array_equal(rho, expected)

    def test_pure_and_correlated(self):
        st = initial_block_state()
        assert st.purity == pytest.approx(1.0, abs=1e-15)
        for obs in OBSERVABLES:
            assert st.expectation(observable_matrix(obs)) == pytest.approx(1.0, abs=1e-15)
            assert minus_one_rate(st, obs) == 0.0


class TestControlledHadamard:
    def test_control_on_applies_hadamard(self):
        out = controlled_hadamard(1, 3) @ basis_state("1000")
        expected = (basis_state("1000") + basis_state("1010")) / np.sqrt(2)
        np.testing.assert_allclose(out, expected, atol=1e-15)

    @pytest.mark.parametrize("rest", ["000", "101", "011", "111"])
    def test_control_off_is_identity(self, rest):
        v = basis_state("0" + rest)
        np.testing.assert_array_equal(controlled_hadamard(1, 3) @ v, v)

    @pytest.mark.parametrize("c,t", [(4, 3), (1, 3), (2, 1), (3, 4)])
    def test_involution(self, c, t):
        u = controlled_hadamard(c, t)
        np.testing.assert_allclose(u @ u, np.eye(DIM), atol=1e-15)

    def test_same_qubit_rejected(self):
        with pytest.raises(ValueError):
            controlled_hadamard(3, 3)

    def test_bad_index_rejected(self):
        with pytest.raises(ValueError):
            controlled_hadamard(0, 3)


class TestUnitaries:
    def test_identity(self):
        st = initial_block_state()
        assert np.array_equal(apply_unitary(st, np.eye(DIM)).rho, st.rho)

    def test_double_ch13_restores(self):
        st = initial_block_state()
        u = controlled_hadamard(1, 3)
        twice = apply_unitary(apply_unitary(st, u), u)
        assert np.max(np.abs(twice.rho - st.rho)) <= 1e-12

    def test_non_unitary_rejected(self):
        with pytest.raises(ValueError):
            apply_unitary(initial_block_state(), 2 * np.eye(DIM))

    def test_random_unitary_preserves_trace(self):
        rng = np.random.default_rng(7)
        q, _ = np.linalg.qr(rng.normal(size=(DIM, DIM)) + 1j * rng.normal(size=(DIM, DIM)))
        st = apply_unitary(corrupted_block_state(random_channel(1, 3)), q)
        assert abs(np.trace(st.rho) - 1) <= 1e-12


class TestChannelOnQubit3:
    def test_identity(self):
        st = initial_block_state()
        out = apply_channel_on_qubit3(st, build_channel(ChannelModel("identity")))
        np.testing.assert_allclose(out.rho, st.rho, atol=1e-15)

    def test_bit_flip_on_qubit3(self):
        st = pure(basis_state("0110"))
        out = apply_channel_on_qubit3(st, KrausChannel(PAULI_X))
        np.testing.assert_allclose(out.rho, pure(basis_state("0100")).rho, atol=1e-15)
        assert out.purity == pytest.approx(1.0)

    def test_full_depolarizing_mixes_qubit3(self):
        ch = build_channel(ChannelModel("depolarizing", 1.0))
        for st in (initial_block_state(), corrupted_block_state(random_channel(5, 2))):
            out = apply_channel_on_qubit3(st, ch)
            np.testing.assert_allclose(out.marginal(3), np.eye(2) / 2, atol=1e-12)

    def test_incomplete_channel_rejected(self):
        bad = KrausChannel.__new__(KrausChannel)
        object.__setattr__(bad, "operators", np.array([0.5 * np.eye(2)], dtype=complex))
        object.__setattr__(bad, "label", None)
        with pytest.raises(ValueError):
            apply_channel_on_qubit3(initial_block_state(), bad)


class TestCorruptedState:
    def test_noiseless(self):
        st = corrupted_block_state(build_channel(ChannelModel("identity")))
        for obs in OBSERVABLES:
            assert st.expectation(observable_matrix(obs)) == pytest.approx(1.0, abs=1e-12)

    def test_bit_flip_attack_halves_correlation(self, brute_rates):
        st = corrupted_block_state(KrausChannel(PAULI_X))
        assert st.expectation(observable_matrix("Z2Z3")) == pytest.approx(0.0, abs=1e-12)
        assert minus_one_rate(st, "Z2Z3") == pytest.approx(brute_rates([PAULI_X])[0], abs=1e-12)
        assert minus_one_rate(st, "Z2Z3") == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
    def test_depolarizing_trace(self, p):
        st = corrupted_block_state(build_channel(ChannelModel("depolarizing", p)))
        assert abs(np.trace(st.rho) - 1) <= 1e-12

    def test_matches_independent_construction(self):
        from conftest import brute_force_block

        for seed in range(20):
            ch = random_channel(seed, 1 + seed % 4)
            np.testing.assert_allclose(
                corrupted_block_state(ch).rho, brute_force_block(ch.operators), atol=1e-12
            )


def test_state_invariants_over_random_channels():
    for seed in range(1000):
        st = corrupted_block_state(random_channel(seed, 1 + seed % 4))
        rho = st.rho
        assert np.max(np.abs(rho - rho.conj().T)) <= 1e-10
        assert abs(np.trace(rho) - 1) <= 1e-10
        assert np.linalg.eigvalsh(rho)[0] >= -1e-9
        assert minus_one_rate(st, "Z1Z4") <= 1e-12


def test_minus_one_rate_matches_projector():
    for seed in range(50):
        st = corrupted_block_state(random_channel(seed, 2))
        for obs in OBSERVABLES:
            w, v = np.linalg.eigh(observable_matrix(obs))
            neg = v[:, w < 0]
            proj = neg @ neg.conj().T
            assert minus_one_rate(st, obs) == pytest.approx(
                np.real(np.trace(proj @ st.rho)), abs=1e-10
            )


def test_marginals_of_product_state():
    kets = [np.array([1, 0]), np.array([0, 1]), np.array([1, 1]) / np.sqrt(2), np.array([1, 1j]) / np.sqrt(2)]
    v = np.kron(np.kron(np.kron(kets[0], kets[1]), kets[2]), kets[3])
    st = pure(v)
    for q, k in enumerate(kets, start=1):
        np.testing.assert_allclose(st.marginal(q), np.outer(k, k.conj()), atol=1e-15)


class TestValidation:
    def test_rejects_bad_trace(self):
        with pytest.raises(NumericalIntegrityError):
            BlockState(np.eye(DIM))

    def test_rejects_non_hermitian(self):
        rho = initial_block_state().rho.copy()
        rho[0, 1] += 1e-6
        with pytest.raises(NumericalIntegrityError):
            BlockState(rho)

    def test_rejects_negative(self):
        rho = np.diag([1.5, -0.5] + [0] * 14).astype(complex)
        with pytest.raises(NumericalIntegrityError):
            BlockState(rho)

    def test_unknown_observable(self):
        with pytest.raises(ValueError):
            minus_one_rate(initial_block_state(), "Y1Y4")
