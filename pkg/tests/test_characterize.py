import numpy as np
import pytest

from fermipec.characterize import (
    GateCharacterization,
    QuasiProbDecomposition,
    characterize_gate,
    circuit_cost,
    decompose_inverse,
    decomposition_from_characterization,
    error_operator,
    inverse_error_ptm,
    select_settings,
)
from fermipec.errors import (
    DegenerateSetting,
    MissingDecomposition,
    NonDiagonal,
    NonPauliError,
    SingularEigenvalue,
)
from fermipec.hubbard import Circuit, Entangler
from fermipec.pauli import (
    PauliChannel,
    PauliString,
    Ptm,
    commutation_signs,
    pauli_channel_ptm,
    ptm_compose,
    ptm_from_unitary,
)
from fermipec.simulate import NoiseModel


def yy_gate(phi=np.pi / 4, pair=(0, 1)):
    return Entangler("yy", phi, pair)


def noise_with(channel, gate=None):
    key = gate.gate_id if gate is not None else "default"
    return NoiseModel(per_gate={key: channel})


class TestCharacterizeGate:
    def test_identity_noise_exact(self):
        gate = yy_gate()
        char = characterize_gate(gate, NoiseModel.ideal(), shots_per_setting=0, seed=0)
        assert np.allclose(char.eigenvalues, 1.0, atol=1e-12)
        assert np.allclose(char.estimated_noisy.entries, char.ideal.entries, atol=1e-12)

    def test_single_pauli_channel_exact(self):
        gate = yy_gate()
        channel = PauliChannel.from_weight_map(2, {"XI": 0.02})
        char = characterize_gate(gate, noise_with(channel), shots_per_setting=0, seed=0)
        xi = PauliString.from_label("XI").index
        signs = commutation_signs(2)
        for b in range(1, 16):
            expected = 0.96 if signs[xi, b] == -1 else 1.0
            assert char.eigenvalues[b] == pytest.approx(expected, abs=1e-12)

    def test_exact_recovery_for_all_pair_geometries(self):
        rng = np.random.default_rng(8)
        pairs = [(0, 1), (1, 2), (2, 3), (0, 2), (1, 3)]
        for phi in (np.pi / 4, np.pi / 8):
            for pair in pairs:
                gate = yy_gate(phi, pair)
                weights = 0.9 * np.eye(16)[0] + 0.1 * rng.dirichlet(np.ones(16))
                channel = PauliChannel(2, weights / weights.sum())
                char = characterize_gate(gate, noise_with(channel, gate), 0, seed=0)
                assert np.allclose(char.eigenvalues, channel.eigenvalues(), atol=1e-12)

    def test_sampled_mode_error_bound(self):
        gate = yy_gate()
        channel = PauliChannel.depolarizing(2, 0.0252)
        char = characterize_gate(gate, noise_with(channel), shots_per_setting=3000, seed=123)
        errors = np.abs(char.raw_eigenvalues[1:] - channel.eigenvalues()[1:])
        assert np.max(errors) < 3.0 / np.sqrt(3000)

    def test_estimator_error_shrinks_as_root_shots(self):
        gate = yy_gate()
        channel = PauliChannel.depolarizing(2, 0.05)
        truth = channel.eigenvalues()
        shot_levels = [100, 1000, 10_000, 100_000]
        mean_errors = []
        for shots in shot_levels:
            errs = []
            for repeat in range(30):
                char = characterize_gate(
                    gate, noise_with(channel), shots_per_setting=shots, seed=1000 * shots + repeat
                )
                errs.append(np.mean(np.abs(char.raw_eigenvalues[1:] - truth[1:])))
            mean_errors.append(np.mean(errs))
        slope = np.polyfit(np.log10(shot_levels), np.log10(mean_errors), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.05)

    def test_non_pauli_error_detected(self):
        gate = yy_gate(np.pi / 4)
        overrotated = ptm_from_unitary(Entangler("yy", np.pi / 4 + 0.05, (0, 1)).matrix())
        coherent = error_operator(overrotated, ptm_from_unitary(yy_gate().matrix()))
        with pytest.raises(NonPauliError):
            characterize_gate(gate, noise_with(coherent, gate), shots_per_setting=0, seed=0)

    def test_degenerate_setting_guard(self):
        weak = Ptm(2, 0.4 * np.eye(16))
        with pytest.raises(DegenerateSetting):
            select_settings(weak)

    def test_json_round_trip(self):
        gate = yy_gate()
        char = characterize_gate(gate, NoiseModel.ideal(), shots_per_setting=0, seed=0)
        restored = GateCharacterization.from_json_dict(char.to_json_dict())
        assert restored.gate_id == char.gate_id
        assert np.array_equal(restored.eigenvalues, char.eigenvalues)


class TestErrorOperator:
    def test_identical_gates_give_identity(self):
        r = ptm_from_unitary(yy_gate().matrix())
        assert np.allclose(error_operator(r, r).entries, np.eye(16), atol=1e-10)

    def test_structural_diagonal(self):
        lam = np.linspace(1.0, 0.9, 16)
        lam[0] = 1.0
        ideal = ptm_from_unitary(yy_gate().matrix())
        noisy = Ptm(2, np.diag(lam) @ ideal.entries)
        err = error_operator(noisy, ideal)
        assert err.is_diagonal(1e-9)
        assert np.allclose(np.diag(err.entries), lam, atol=1e-10)

    def test_overrotation_is_flagged_non_diagonal(self):
        ideal = ptm_from_unitary(yy_gate().matrix())
        noisy = ptm_from_unitary(Entangler("xx", 0.03, (0, 1)).matrix() @ yy_gate().matrix())
        err = error_operator(noisy, ideal)
        assert not err.is_diagonal(1e-6)


def solve_oracle(lam: np.ndarray) -> np.ndarray:
    """Generic linear-solve route: coefficients from the full sign system."""
    signs = commutation_signs(2).astype(float)
    return np.linalg.solve(signs.T, 1.0 / lam)


class TestDecomposeInverse:
    def test_identity_error(self):
        decomp = decompose_inverse(Ptm.identity(2))
        assert decomp.coefficients[0] == pytest.approx(1.0)
        assert np.allclose(decomp.coefficients[1:], 0.0, atol=1e-15)
        assert decomp.cost == pytest.approx(1.0)

    def test_depolarizing_closed_form(self):
        p = 0.0252
        eta = 1.0 / (1.0 - p)
        lam = np.full(16, 1.0 - p)
        lam[0] = 1.0
        decomp = decompose_inverse(Ptm(2, np.diag(lam)))
        assert decomp.coefficients[0] == pytest.approx((1 + 15 * eta) / 16, abs=1e-12)
        assert np.allclose(decomp.coefficients[1:], (1 - eta) / 16, atol=1e-12)
        assert decomp.cost == pytest.approx((30 * eta - 14) / 16, abs=1e-9)
        assert np.all(decomp.signs[1:] == -1)
        assert np.allclose(decomp.coefficients, solve_oracle(lam), atol=1e-12)

    def test_matches_linear_solve_on_random_channels(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            weights = 0.85 * np.eye(16)[0] + 0.15 * rng.dirichlet(np.ones(16))
            lam = PauliChannel(2, weights / weights.sum()).eigenvalues()
            decomp = decompose_inverse(Ptm(2, np.diag(lam)))
            assert np.allclose(decomp.coefficients, solve_oracle(lam), atol=1e-10)

    def test_round_trip_cancellation(self):
        rng = np.random.default_rng(5)
        weights = 0.9 * np.eye(16)[0] + 0.1 * rng.dirichlet(np.ones(16))
        channel = PauliChannel(2, weights / weights.sum())
        error = pauli_channel_ptm(channel)
        decomp = decompose_inverse(error)
        product = ptm_compose(error, inverse_error_ptm(decomp))
        assert np.allclose(product.entries, np.eye(16), atol=1e-9)

    def test_coefficients_sum_to_one(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            weights = 0.8 * np.eye(16)[0] + 0.2 * rng.dirichlet(np.ones(16))
            lam = PauliChannel(2, weights / weights.sum()).eigenvalues()
            decomp = decompose_inverse(Ptm(2, np.diag(lam)))
            assert decomp.coefficients.sum() == pytest.approx(1.0, abs=1e-12)
            assert decomp.probabilities.sum() == pytest.approx(1.0, abs=1e-12)

    def test_cost_is_one_iff_noiseless_and_monotone(self):
        def cost_for(p):
            lam = np.full(16, 1.0 - p)
            lam[0] = 1.0
            return decompose_inverse(Ptm(2, np.diag(lam))).cost

        assert cost_for(0.0) == pytest.approx(1.0, abs=1e-12)
        costs = [cost_for(p) for p in (0.01, 0.02, 0.05, 0.1)]
        assert all(a < b for a, b in zip(costs, costs[1:]))
        assert all(c > 1.0 for c in costs)

    def test_singular_eigenvalue_rejected(self):
        lam = np.ones(16)
        lam[5] = 1e-8
        with pytest.raises(SingularEigenvalue):
            decompose_inverse(Ptm(2, np.diag(lam)))

    def test_non_diagonal_rejected(self):
        mat = np.eye(16)
        mat[1, 2] = 0.01
        with pytest.raises(NonDiagonal):
            decompose_inverse(Ptm(2, mat))

    def test_from_characterization_clips(self):
        gate = yy_gate()
        channel = PauliChannel.depolarizing(2, 0.02)
        char = characterize_gate(gate, noise_with(channel), shots_per_setting=0, seed=0)
        decomp = decomposition_from_characterization(char)
        assert decomp.gate_id == gate.gate_id
        assert decomp.cost > 1.0

    def test_json_round_trip(self):
        decomp = QuasiProbDecomposition.identity("yy_0-1_0.785")
        restored = QuasiProbDecomposition.from_json_dict(decomp.to_json_dict())
        assert np.array_equal(restored.coefficients, decomp.coefficients)
        assert restored.cost == decomp.cost


class TestCircuitCost:
    def test_all_unit_costs(self):
        gates = tuple(Entangler("yy", np.pi / 4, (0, 1)) for _ in range(5))
        circuit = Circuit(2, gates)
        decomps = {gates[0].gate_id: QuasiProbDecomposition.identity(gates[0].gate_id)}
        assert circuit_cost(decomps, circuit) == pytest.approx(1.0)

    def test_paper_scale_product(self):
        # 24 gates at per-gate cost 1.083 compound to about 6.78.
        gate = yy_gate()
        circuit = Circuit(2, tuple(gate for _ in range(24)))
        decomp = QuasiProbDecomposition.identity(gate.gate_id)
        object.__setattr__(decomp, "cost", 1.083)
        assert circuit_cost({gate.gate_id: decomp}, circuit) == pytest.approx(
            1.083**24, rel=1e-12
        )
        assert 6.7 < 1.083**24 < 6.9

    def test_mixed_costs_multiply(self):
        g1 = Entangler("yy", np.pi / 8, (0, 1))
        g2 = Entangler("yy", np.pi / 8, (1, 2))
        circuit = Circuit(3, (g1, g2) * 12)
        d1 = QuasiProbDecomposition.identity(g1.gate_id)
        d2 = QuasiProbDecomposition.identity(g2.gate_id)
        object.__setattr__(d1, "cost", 1.157)
        object.__setattr__(d2, "cost", 1.171)
        expected = 1.157**12 * 1.171**12
        assert circuit_cost([d1, d2], circuit) == pytest.approx(expected, rel=1e-12)

    def test_missing_decomposition(self):
        circuit = Circuit(2, (yy_gate(),))
        with pytest.raises(MissingDecomposition):
            circuit_cost({}, circuit)
