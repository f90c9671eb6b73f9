import json

import numpy as np
import pytest

from fermipec import pauli
from fermipec.errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidWeights,
    NonUnitary,
    Singular,
)
from fermipec.pauli import (
    PauliChannel,
    PauliString,
    Ptm,
    average_gate_fidelity,
    commutation_signs,
    embed_two_qubit,
    pauli_basis,
    pauli_channel_ptm,
    pauli_ptm,
    ptm_compose,
    ptm_from_unitary,
    ptm_inverse,
)


def yy_unitary(phi: float, sign: float = 1.0) -> np.ndarray:
    """exp(sign * i * phi * Y otimes Y)."""
    yy = np.kron(pauli._SINGLE["Y"], pauli._SINGLE["Y"])
    return np.cos(phi) * np.eye(4) + sign * 1j * np.sin(phi) * yy


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    mat = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(mat)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def ptm_by_trace_formula(unitary: np.ndarray, n: int) -> np.ndarray:
    """Independent brute-force evaluation of the defining trace formula."""
    basis = pauli_basis(n)
    dim = 2**n
    out = np.empty((4**n, 4**n))
    for i in range(4**n):
        for j in range(4**n):
            out[i, j] = np.trace(basis[i] @ unitary @ basis[j] @ unitary.conj().T).real / dim
    return out


class TestPauliString:
    def test_index_order_is_base4_lexicographic(self):
        labels = [str(PauliString.from_index(i, 2)) for i in range(16)]
        assert labels[:5] == ["II", "IX", "IY", "IZ", "XI"]
        assert labels[-1] == "ZZ"
        for i, lab in enumerate(labels):
            assert PauliString.from_label(lab).index == i

    def test_matrix_matches_kron(self):
        zx = PauliString.from_label("ZX").matrix()
        expected = np.kron(pauli._SINGLE["Z"], pauli._SINGLE["X"])
        assert np.array_equal(zx, expected)

    def test_label_length_mismatch_rejected(self):
        with pytest.raises(DimensionMismatch):
            PauliString(2, "X")

    def test_commutation(self):
        zi = PauliString.from_label("ZI")
        xx = PauliString.from_label("XX")
        xi = PauliString.from_label("XI")
        assert not zi.commutes_with(xx)
        assert xi.commutes_with(xx)


class TestPtmFromUnitary:
    def test_identity_two_qubits(self):
        result = ptm_from_unitary(np.eye(4))
        assert result.qubit_count == 2
        assert np.allclose(result.entries, np.eye(16), atol=1e-12)

    def test_yy_quarter_turn_is_signed_permutation(self):
        result = ptm_from_unitary(yy_unitary(np.pi / 4))
        oracle = ptm_by_trace_formula(yy_unitary(np.pi / 4), 2)
        assert np.allclose(result.entries, oracle, atol=1e-12)
        # Clifford: one entry of modulus 1 per row and column.
        mags = np.abs(result.entries)
        assert np.allclose(np.sort(mags, axis=1)[:, :-1], 0.0, atol=1e-10)
        assert np.allclose(np.max(mags, axis=1), 1.0, atol=1e-10)
        assert result.is_orthogonal()

    def test_yy_eighth_turn_mixes_two_paulis(self):
        result = ptm_from_unitary(yy_unitary(np.pi / 8))
        oracle = ptm_by_trace_formula(yy_unitary(np.pi / 8), 2)
        assert np.allclose(result.entries, oracle, atol=1e-12)
        yy_index = PauliString.from_label("YY").index
        signs = commutation_signs(2)
        for b in range(16):
            row = result.entries[b]
            support = np.flatnonzero(np.abs(row) > 1e-12)
            if signs[b, yy_index] == 1:
                assert np.array_equal(support, [b])
            else:
                assert support.size == 2 and b in support
                assert np.allclose(np.sort(np.abs(row[support])), np.sin(np.pi / 4), atol=1e-12)

    def test_rejects_non_unitary(self):
        with pytest.raises(NonUnitary):
            ptm_from_unitary(np.eye(4) * 1.5)

    def test_rejects_bad_dimension(self):
        with pytest.raises(DimensionMismatch):
            ptm_from_unitary(np.eye(3))


class TestComposeInverse:
    def test_compose_with_identity(self):
        r = ptm_from_unitary(yy_unitary(np.pi / 8))
        assert np.allclose(ptm_compose(r, Ptm.identity(2)).entries, r.entries)

    def test_compose_with_inverse_gives_identity(self):
        r = ptm_from_unitary(yy_unitary(np.pi / 4))
        assert np.allclose(ptm_compose(r, ptm_inverse(r)).entries, np.eye(16), atol=1e-10)

    def test_pauli_flip_channel_is_involution(self):
        flip = pauli_channel_ptm(PauliChannel.from_weight_map(2, {"XX": 1.0}))
        composed = ptm_compose(flip, flip)
        assert np.allclose(composed.entries, np.eye(16), atol=1e-12)

    def test_compose_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ptm_compose(Ptm.identity(1), Ptm.identity(2))

    def test_inverse_identity(self):
        assert np.allclose(ptm_inverse(Ptm.identity(2)).entries, np.eye(16))

    def test_inverse_of_diagonal(self):
        lam = np.full(16, 0.9)
        lam[0] = 1.0
        inv = ptm_inverse(Ptm(2, np.diag(lam)))
        expected = np.full(16, 1 / 0.9)
        expected[0] = 1.0
        assert np.allclose(np.diag(inv.entries), expected, atol=1e-12)

    def test_inverse_of_orthogonal_is_transpose(self):
        r = ptm_from_unitary(yy_unitary(np.pi / 8))
        assert np.allclose(ptm_inverse(r).entries, r.entries.T, atol=1e-8)

    def test_singular_rejected(self):
        mat = np.zeros((16, 16))
        mat[0, 0] = 1.0
        with pytest.raises(Singular):
            ptm_inverse(Ptm(2, mat))

    def test_composition_homomorphism_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            u1 = random_unitary(4, rng)
            u2 = random_unitary(4, rng)
            left = ptm_from_unitary(u2 @ u1).entries
            right = ptm_compose(ptm_from_unitary(u1), ptm_from_unitary(u2)).entries
            assert np.allclose(left, right, atol=1e-9)


def pauli_vector_of_state(psi: np.ndarray, n: int) -> np.ndarray:
    basis = pauli_basis(n)
    return np.einsum("a,iab,b->i", psi.conj(), basis, psi).real


class TestEmbed:
    def test_embed_identity(self):
        embedded = embed_two_qubit(Ptm.identity(2), (0, 1), 3)
        assert np.allclose(embedded.entries, np.eye(64), atol=1e-12)

    def test_zz_flip_on_computational_state_preserves_populations(self):
        flip = pauli_channel_ptm(PauliChannel.from_weight_map(2, {"ZZ": 1.0}))
        embedded = embed_two_qubit(flip, (0, 2), 3)
        psi = np.zeros(8)
        psi[0] = 1.0
        vec = pauli_vector_of_state(psi, 3)
        out = embedded.apply(vec)
        # Z strings act trivially on |000>, the full vector is unchanged.
        assert np.allclose(out, vec, atol=1e-12)

    def test_embedded_gate_matches_state_vector_simulation(self):
        gate = yy_unitary(np.pi / 8)
        embedded = embed_two_qubit(ptm_from_unitary(gate), (1, 2), 3)
        full_unitary = np.kron(np.eye(2), gate)
        rng = np.random.default_rng(3)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        via_ptm = embedded.apply(pauli_vector_of_state(psi, 3))
        via_state = pauli_vector_of_state(full_unitary @ psi, 3)
        assert np.allclose(via_ptm, via_state, atol=1e-10)

    def test_embed_commutes_with_composition(self):
        rng = np.random.default_rng(11)
        a = ptm_from_unitary(random_unitary(4, rng))
        b = ptm_from_unitary(random_unitary(4, rng))
        lhs = embed_two_qubit(ptm_compose(a, b), (0, 2), 3)
        rhs = ptm_compose(embed_two_qubit(a, (0, 2), 3), embed_two_qubit(b, (0, 2), 3))
        assert np.allclose(lhs.entries, rhs.entries, atol=1e-10)

    def test_pair_validation(self):
        with pytest.raises(IndexOutOfRange):
            embed_two_qubit(Ptm.identity(2), (1, 1), 3)
        with pytest.raises(IndexOutOfRange):
            embed_two_qubit(Ptm.identity(2), (0, 3), 3)


class TestFidelity:
    def test_equal_channels_give_unity(self):
        r = ptm_from_unitary(yy_unitary(np.pi / 4))
        assert average_gate_fidelity(r, r) == pytest.approx(1.0, abs=0)

    def test_depolarizing_closed_form(self):
        p = 0.0252
        ideal = ptm_from_unitary(yy_unitary(np.pi / 4))
        noisy = ptm_compose(ideal, pauli_channel_ptm(PauliChannel.depolarizing(2, p)))
        expected = (4 * ((1 + 15 * (1 - p)) / 16) + 1) / 5
        assert average_gate_fidelity(noisy, ideal) == pytest.approx(expected, abs=1e-12)

    def test_requires_orthogonal_ideal(self):
        with pytest.raises(NonUnitary):
            average_gate_fidelity(Ptm.identity(2), Ptm(2, np.eye(16) * 0.5))


class TestPauliChannel:
    def test_identity_weights_give_identity_ptm(self):
        channel = PauliChannel.identity(2)
        assert np.allclose(pauli_channel_ptm(channel).entries, np.eye(16))

    def test_xx_mixture_eigenvalues(self):
        channel = PauliChannel.from_weight_map(2, {"XX": 0.1})
        lam = channel.eigenvalues()
        assert lam[PauliString.from_label("ZI").index] == pytest.approx(0.8)
        assert lam[PauliString.from_label("XI").index] == pytest.approx(1.0)

    def test_depolarizing_eigenvalues(self):
        p = 0.0252
        lam = PauliChannel.depolarizing(2, p).eigenvalues()
        assert lam[0] == pytest.approx(1.0)
        assert np.allclose(lam[1:], 1 - p, atol=1e-12)

    def test_weights_validation(self):
        with pytest.raises(InvalidWeights):
            PauliChannel(2, np.full(16, 0.1))
        with pytest.raises(InvalidWeights):
            PauliChannel(1, np.array([1.5, -0.5, 0.0, 0.0]))

    def test_random_simplex_weights_give_diagonal_unit_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            weights = rng.dirichlet(np.ones(16))
            channel = PauliChannel(2, weights)
            matrix = pauli_channel_ptm(channel)
            assert matrix.is_diagonal(1e-12)
            assert matrix.entries[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_eigenvalue_round_trip(self):
        rng = np.random.default_rng(9)
        weights = rng.dirichlet(np.ones(16))
        channel = PauliChannel(2, weights)
        recovered = PauliChannel.from_eigenvalues(channel.eigenvalues())
        assert np.allclose(recovered.weights, weights, atol=1e-12)


class TestCommutationSigns:
    def test_symmetry(self):
        signs = commutation_signs(2)
        assert np.array_equal(signs, signs.T)

    def test_row_sums_vanish_off_identity(self):
        signs = commutation_signs(2)
        sums = signs.sum(axis=1)
        assert sums[0] == 16
        assert np.all(sums[1:] == 0)

    def test_pauli_ptm_diagonal(self):
        idx = PauliString.from_label("XY").index
        diag = np.diag(pauli_ptm(idx, 2).entries)
        assert np.array_equal(diag, commutation_signs(2)[idx].astype(float))


class TestSerialization:
    def test_json_round_trip_is_exact(self):
        rng = np.random.default_rng(13)
        original = ptm_from_unitary(random_unitary(4, rng))
        payload = json.dumps(original.to_json_dict())
        restored = Ptm.from_json_dict(json.loads(payload))
        assert restored.qubit_count == original.qubit_count
        assert np.array_equal(restored.entries, original.entries)
