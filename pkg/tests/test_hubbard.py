import numpy as np
import pytest

from fermipec.errors import InvalidSteps, UnsupportedSize
from fermipec.hubbard import (
    Circuit,
    Entangler,
    HubbardSpec,
    Rotation,
    build_hamiltonian,
    circuit_prefix,
    compile_to_native,
    exact_matrix,
    state_from_labels,
    trotter_circuit,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1, -1]).astype(complex)
SPLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # lowers |1> to |0>


def kron_all(mats):
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def annihilation_ops(n_modes):
    """Parity-string fermion operators with occupied = |1>."""
    ops = []
    for m in range(n_modes):
        mats = [SZ] * m + [SPLUS] + [np.eye(2)] * (n_modes - m - 1)
        ops.append(kron_all(mats))
    return ops


def fermionic_matrix(spec: HubbardSpec) -> np.ndarray:
    """Independent construction straight from the fermion-operator Hamiltonian."""
    n = spec.qubit_count
    ann = annihilation_ops(n)
    num = [a.conj().T @ a for a in ann]
    if spec.components == "one":
        chains = [list(range(spec.sites))]
    else:
        chains = [list(range(spec.sites)), list(range(spec.sites, 2 * spec.sites))]
    h = np.zeros((2**n, 2**n), dtype=complex)
    for chain in chains:
        for a, b in zip(chain, chain[1:]):
            hop = ann[a].conj().T @ ann[b]
            h += -spec.tunneling * (hop + hop.conj().T)
            h += spec.neighbor * num[a] @ num[b]
    if spec.components == "two":
        for site in range(spec.sites):
            h += spec.onsite * num[site] @ num[spec.sites + site]
    return h


def hopping_sign_gauge(spec: HubbardSpec) -> np.ndarray:
    """Diagonal +-1 gauge flipping the hopping sign on every bond."""
    n = spec.qubit_count
    if spec.components == "one":
        position = list(range(spec.sites))
    else:
        position = list(range(spec.sites)) * 2
    diag = np.ones(2**n)
    for state in range(2**n):
        sign = 1
        for q in range(n):
            bit = (state >> (n - 1 - q)) & 1
            if bit and position[q] % 2:
                sign = -sign
        diag[state] = sign
    return np.diag(diag)


class TestHubbardSpec:
    def test_one_component_ignores_onsite(self):
        spec = HubbardSpec(sites=2, components="one", onsite=3.0)
        assert spec.onsite == 0.0
        assert spec.qubit_count == 2

    def test_two_components_double_qubits(self):
        assert HubbardSpec(sites=2, components="two").qubit_count == 4

    def test_size_guard(self):
        with pytest.raises(UnsupportedSize):
            HubbardSpec(sites=5, components="one")
        with pytest.raises(UnsupportedSize):
            HubbardSpec(sites=3, components="two")


class TestBuildHamiltonian:
    def test_two_site_hopping_only(self):
        h = build_hamiltonian(HubbardSpec(sites=2, tunneling=1.0, neighbor=0.0))
        by_label = {str(t.pauli): t.coefficient for t in h.terms}
        assert by_label == {"XX": 0.5, "YY": 0.5}
        assert h.part("z") == ()
        assert h.offset == 0.0

    def test_two_site_with_neighbor_interaction(self):
        v = 2.0
        h = build_hamiltonian(HubbardSpec(sites=2, tunneling=1.0, neighbor=v))
        by_label = {str(t.pauli): t.coefficient for t in h.part("z")}
        # Magnitude v/4 on ZZ, ZI, IZ; linear signs follow the occupation
        # expansion (1 - sz)(1 - sz)/4 with the quarter offset tracked.
        assert by_label["ZZ"] == pytest.approx(v / 4)
        assert by_label["ZI"] == pytest.approx(-v / 4)
        assert by_label["IZ"] == pytest.approx(-v / 4)
        assert h.offset == pytest.approx(v / 4)

    def test_two_component_structure(self):
        h = build_hamiltonian(
            HubbardSpec(sites=2, components="two", tunneling=1.0, onsite=2.0, neighbor=0.0)
        )
        hop_pairs = sorted(
            (str(t.pauli), t.coefficient) for t in h.terms if t.part in ("x", "y")
        )
        assert hop_pairs == [
            ("IIXX", 0.5),
            ("IIYY", 0.5),
            ("XXII", 0.5),
            ("YYII", 0.5),
        ]
        zz = {str(t.pauli) for t in h.part("z") if str(t.pauli).count("Z") == 2}
        assert zz == {"ZIZI", "IZIZ"}

    def test_matches_fermionic_construction_up_to_hopping_gauge(self):
        specs = [
            HubbardSpec(sites=2, tunneling=1.0, neighbor=2.0),
            HubbardSpec(sites=3, tunneling=1.3, neighbor=0.7),
            HubbardSpec(sites=4, tunneling=0.9, neighbor=1.1),
            HubbardSpec(sites=2, components="two", tunneling=1.0, onsite=2.0),
            HubbardSpec(sites=2, components="two", tunneling=0.8, onsite=1.5, neighbor=0.4),
        ]
        for spec in specs:
            built = exact_matrix(build_hamiltonian(spec))
            gauge = hopping_sign_gauge(spec)
            reference = gauge @ fermionic_matrix(spec) @ gauge
            assert np.allclose(built, reference, atol=1e-12), spec

    def test_number_conservation(self):
        for spec in (
            HubbardSpec(sites=2, neighbor=2.0),
            HubbardSpec(sites=3, neighbor=2.0),
            HubbardSpec(sites=2, components="two", onsite=2.0),
        ):
            h = exact_matrix(build_hamiltonian(spec))
            n = spec.qubit_count
            number = sum(
                kron_all([np.eye(2)] * q + [SZ] + [np.eye(2)] * (n - q - 1)) for q in range(n)
            )
            comm = h @ number - number @ h
            assert np.max(np.abs(comm)) < 1e-10


class TestExactMatrix:
    def test_zero_terms(self):
        from fermipec.hubbard import PauliHamiltonian

        h = PauliHamiltonian(2, ())
        assert np.array_equal(exact_matrix(h), np.zeros((4, 4)))

    def test_hopping_block(self):
        h = build_hamiltonian(HubbardSpec(sites=2, tunneling=1.0))
        mat = exact_matrix(h)
        # Single-excitation block over |01>, |10> is the hopping matrix.
        block = mat[np.ix_([1, 2], [1, 2])]
        assert np.allclose(block, [[0, 1], [1, 0]], atol=1e-12)

    def test_doubly_occupied_energy(self):
        v = 2.0
        h = build_hamiltonian(HubbardSpec(sites=2, tunneling=1.0, neighbor=v))
        mat = exact_matrix(h)
        assert mat[3, 3].real == pytest.approx(v)  # offset included


class TestTrotterCircuit:
    def test_two_site_gate_counts(self):
        h = build_hamiltonian(HubbardSpec(sites=2, tunneling=1.0, neighbor=2.0))
        circuit = trotter_circuit(h, total_time=8 * np.pi / 2, steps=8)
        assert len(circuit.entanglers) == 24
        per_step = [g for g in circuit.gates[: len(circuit.gates) // 8]]
        assert sum(isinstance(g, Entangler) for g in per_step) == 3
        for gate in circuit.entanglers:
            assert gate.angle == pytest.approx(np.pi / 4)

    def test_three_site_gate_counts(self):
        h = build_hamiltonian(HubbardSpec(sites=3, tunneling=1.0, neighbor=2.0))
        circuit = trotter_circuit(h, total_time=4 * np.pi / 4, steps=4)
        assert len(circuit.entanglers) == 24
        first_block = circuit.gates[: len(circuit.gates) // 4]
        assert sum(isinstance(g, Entangler) for g in first_block) == 6

    def test_invalid_steps(self):
        h = build_hamiltonian(HubbardSpec(sites=2))
        with pytest.raises(InvalidSteps):
            trotter_circuit(h, 1.0, 0)

    def test_block_unitary_is_product_of_part_exponentials(self):
        spec = HubbardSpec(sites=3, tunneling=1.1, neighbor=0.9)
        h = build_hamiltonian(spec)
        dt = 0.37
        circuit = trotter_circuit(h, dt, 1)
        from fermipec.hubbard import PauliHamiltonian

        expected = np.eye(2**h.qubit_count, dtype=complex)
        for part in ("x", "y", "z"):
            part_h = PauliHamiltonian(h.qubit_count, h.part(part))
            vals, vecs = np.linalg.eigh(exact_matrix(part_h))
            expected = (vecs @ np.diag(np.exp(-1j * vals * dt)) @ vecs.conj().T) @ expected
        assert np.allclose(circuit.unitary(), expected, atol=1e-10)

    def test_error_halves_when_steps_double(self):
        spec = HubbardSpec(sites=3, tunneling=1.0, neighbor=2.0)
        h = build_hamiltonian(spec)
        t = 1.0
        target_vals, target_vecs = np.linalg.eigh(exact_matrix(h))
        target = target_vecs @ np.diag(np.exp(-1j * target_vals * t)) @ target_vecs.conj().T

        def distance(steps):
            u = trotter_circuit(h, t, steps).unitary()
            # Phase-align before comparing: the offset appears as a global phase.
            phase = np.trace(target.conj().T @ u)
            u = u * (abs(phase) / phase)
            return np.linalg.norm(u - target, 2)

        ratio = distance(16) / distance(32)
        assert 1.7 < ratio < 2.3

    def test_prefix_blocks(self):
        h = build_hamiltonian(HubbardSpec(sites=2, tunneling=1.0, neighbor=2.0))
        full = trotter_circuit(h, 8 * np.pi / 2, 8)
        for k in range(9):
            prefix = trotter_circuit(h, k * np.pi / 2, k) if k else Circuit(2)
            assert circuit_prefix(full, k, 8).gates == prefix.gates


class TestCompileToNative:
    def test_yy_unchanged(self):
        circuit = Circuit(2, (Entangler("yy", 0.3, (0, 1)),))
        assert compile_to_native(circuit).gates == circuit.gates

    def test_xx_compiles_with_four_rotations(self):
        circuit = Circuit(2, (Entangler("xx", np.pi / 8, (0, 1)),))
        compiled = compile_to_native(circuit)
        rotations = [g for g in compiled.gates if isinstance(g, Rotation)]
        entanglers = compiled.entanglers
        assert len(rotations) == 4 and len(entanglers) == 1
        assert entanglers[0].kind == "yy" and entanglers[0].angle == pytest.approx(np.pi / 8)
        self._assert_unitary_equal(circuit, compiled)

    def test_zz_compiles_and_matches(self):
        circuit = Circuit(2, (Entangler("zz", 0.77, (0, 1)),))
        compiled = compile_to_native(circuit)
        assert all(g.kind == "yy" for g in compiled.entanglers)
        self._assert_unitary_equal(circuit, compiled)

    def test_full_trotter_circuit_compiles(self):
        h = build_hamiltonian(HubbardSpec(sites=3, tunneling=1.0, neighbor=2.0))
        circuit = trotter_circuit(h, np.pi, 4)
        compiled = compile_to_native(circuit)
        assert all(g.kind == "yy" for g in compiled.entanglers)
        assert len(compiled.entanglers) == 24
        per_step = len(compiled.gates) // 4
        assert sum(isinstance(g, Entangler) for g in compiled.gates[:per_step]) == 6
        self._assert_unitary_equal(circuit, compiled)

    @staticmethod
    def _assert_unitary_equal(a: Circuit, b: Circuit):
        ua, ub = a.unitary(), b.unitary()
        overlap = abs(np.trace(ua.conj().T @ ub)) / ua.shape[0]
        assert overlap == pytest.approx(1.0, abs=1e-10)


class TestCircuitStructure:
    def test_sector_preservation_two_site(self):
        # Non-overlapping bonds: the x/y layers cancel pairing exactly.
        h = build_hamiltonian(HubbardSpec(sites=2, tunneling=1.0, neighbor=2.0))
        circuit = compile_to_native(trotter_circuit(h, 8 * np.pi / 2, 8))
        psi = state_from_labels(["11", "10"], 2)
        from fermipec.simulate import apply_circuit_state

        pops = np.abs(apply_circuit_state(circuit, psi)) ** 2
        assert pops[0] < 1e-10  # |00> stays empty

    def test_sector_preservation_two_site_spinful(self):
        h = build_hamiltonian(HubbardSpec(sites=2, components="two", tunneling=1.0, onsite=2.0))
        circuit = compile_to_native(trotter_circuit(h, np.pi, 4))
        psi = state_from_labels(["1001", "1010"], 4)
        from fermipec.simulate import apply_circuit_state

        pops = np.abs(apply_circuit_state(circuit, psi)) ** 2
        sector = [int(s, 2) for s in ("0101", "0110", "1001", "1010")]
        outside = 1.0 - sum(pops[i] for i in sector)
        assert outside < 1e-10

    def test_three_site_leakage_shrinks_as_trotter_error(self):
        # Overlapping bonds leak out of the number sector at O(dt^2) per
        # step; the leakage must vanish quadratically as steps increase.
        h = build_hamiltonian(HubbardSpec(sites=3, tunneling=1.0, neighbor=2.0))
        psi = state_from_labels(["101", "110"], 3)
        from fermipec.simulate import apply_circuit_state

        def leakage(steps):
            circuit = trotter_circuit(h, 1.0, steps)
            pops = np.abs(apply_circuit_state(circuit, psi)) ** 2
            sector = [int(s, 2) for s in ("110", "101", "011")]
            return 1.0 - sum(pops[i] for i in sector)

        assert leakage(8) > 1e-6
        assert leakage(8) / leakage(16) == pytest.approx(4.0, rel=0.4)

    def test_spinless_chains_disjoint_when_uncoupled(self):
        h = build_hamiltonian(HubbardSpec(sites=2, components="two", tunneling=1.0, onsite=0.0))
        circuit = trotter_circuit(h, np.pi, 4)
        up, down = {0, 1}, {2, 3}
        for gate in circuit.entanglers:
            assert set(gate.pair) in (up, down)

    def test_json_round_trip(self):
        h = build_hamiltonian(HubbardSpec(sites=2, tunneling=1.0, neighbor=2.0))
        circuit = compile_to_native(trotter_circuit(h, np.pi, 2))
        restored = Circuit.from_json_dict(circuit.to_json_dict())
        assert restored == circuit
