"""Exact and noisy circuit backends.

Three evolution routes are kept deliberately separate so they can check one
another: a dense matrix exponential of the Hamiltonian, a state-vector walk
over the gate list, and a Pauli-coefficient walk where each noisy entangler
is the ideal transfer matrix followed by its error channel.  A fourth,
density-matrix route exists purely as an independent oracle for the Pauli
walk.  Measurement is multinomial sampling of the final populations with an
explicit seed; there is no shared generator state anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    MissingNoiseEntry,
    SingularConfusion,
    UnsupportedSize,
)
from .hubbard import Circuit, Entangler, Gate, PauliHamiltonian, Rotation, basis_labels, exact_matrix
from .pauli import (
    PauliChannel,
    Ptm,
    commutation_signs,
    pauli_basis,
    pauli_channel_ptm,
    ptm_from_unitary,
)

# ---------------------------------------------------------------------------
# Operator embedding and axis application
# ---------------------------------------------------------------------------


def embed_operator(op: np.ndarray, qubits: tuple[int, ...], total: int, local: int) -> np.ndarray:
    """Embed a k-subsystem operator into the full register, identity elsewhere."""
    dim = local**total
    idx = np.arange(dim)
    digits = [(idx // local ** (total - 1 - q)) % local for q in range(total)]
    sub = np.zeros(dim, dtype=np.int64)
    for q in qubits:
        sub = local * sub + digits[q]
    rest = np.zeros(dim, dtype=np.int64)
    for q in range(total):
        if q not in qubits:
            rest = local * rest + digits[q]
    same = rest[:, None] == rest[None, :]
    return op[np.ix_(sub, sub)] * same


def _apply_on_axes(vec: np.ndarray, op: np.ndarray, qubits: tuple[int, ...], total: int, local: int) -> np.ndarray:
    """Apply a local operator to the given subsystem axes of a flat vector."""
    k = len(qubits)
    tensor = vec.reshape((local,) * total)
    tensor = np.moveaxis(tensor, qubits, range(k))
    shape = tensor.shape
    out = op @ tensor.reshape(local**k, -1)
    out = np.moveaxis(out.reshape(shape), range(k), qubits)
    return out.reshape(-1)


def _scale_on_axes(vec: np.ndarray, diag: np.ndarray, qubits: tuple[int, ...], total: int, local: int) -> np.ndarray:
    k = len(qubits)
    tensor = vec.reshape((local,) * total)
    tensor = np.moveaxis(tensor, qubits, range(k))
    shape = tensor.shape
    out = diag[:, None] * tensor.reshape(local**k, -1)
    out = np.moveaxis(out.reshape(shape), range(k), qubits)
    return out.reshape(-1)


def gate_qubits(gate: Gate) -> tuple[int, ...]:
    return gate.pair if isinstance(gate, Entangler) else (gate.qubit,)


def gate_unitary_full(gate: Gate, qubit_count: int) -> np.ndarray:
    return embed_operator(gate.matrix(), gate_qubits(gate), qubit_count, 2)


@lru_cache(maxsize=None)
def _rotation_ptm(axis: str, angle: float) -> np.ndarray:
    return ptm_from_unitary(Rotation(axis, angle, 0).matrix()).entries


@lru_cache(maxsize=None)
def _entangler_ptm(kind: str, angle: float) -> np.ndarray:
    return ptm_from_unitary(Entangler(kind, angle, (0, 1)).matrix()).entries


def gate_ptm_local(gate: Gate) -> np.ndarray:
    if isinstance(gate, Entangler):
        return _entangler_ptm(gate.kind, gate.angle)
    return _rotation_ptm(gate.axis, gate.angle)


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PauliVector:
    """Expectation of every Pauli string; index 0 is the identity."""

    qubit_count: int
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.shape != (4**self.qubit_count,):
            raise DimensionMismatch(
                f"expected {4**self.qubit_count} coefficients, got {coeffs.shape}"
            )
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_state(cls, psi: np.ndarray) -> "PauliVector":
        psi = np.asarray(psi, dtype=complex)
        n = int(round(np.log2(psi.size)))
        if 2**n != psi.size:
            raise DimensionMismatch(f"state length {psi.size} is not a power of two")
        basis = pauli_basis(n)
        coeffs = np.einsum("a,iab,b->i", psi.conj(), basis, psi).real
        return cls(n, coeffs)

    def density_matrix(self) -> np.ndarray:
        basis = pauli_basis(self.qubit_count)
        return np.einsum("i,iab->ab", self.coefficients, basis) / 2**self.qubit_count


@lru_cache(maxsize=None)
def _ztype_table(qubit_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices of Z/I-only Pauli strings and the parity sign matrix."""
    dim = 2**qubit_count
    masks = np.arange(dim)
    z_indices = np.zeros(dim, dtype=np.int64)
    for q in range(qubit_count):
        bit = (masks >> (qubit_count - 1 - q)) & 1
        z_indices = 4 * z_indices + 3 * bit
    states = np.arange(dim)
    overlap = states[:, None] & masks[None, :]
    parity = np.array([[bin(x).count("1") & 1 for x in row] for row in overlap])
    signs = np.where(parity, -1.0, 1.0)
    return z_indices, signs


def populations_from_pauli_vector(vector: PauliVector) -> np.ndarray:
    """Diagonal of the reconstructed density operator, unclipped."""
    z_indices, signs = _ztype_table(vector.qubit_count)
    return signs @ vector.coefficients[z_indices] / 2**vector.qubit_count


# ---------------------------------------------------------------------------
# Noise model
# ---------------------------------------------------------------------------

GateError = Union[PauliChannel, Ptm]


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate error channels plus optional readout confusion and cross-talk.

    ``per_gate`` maps a gate_id, a ``kind_m-n`` pair key, an ``m-n`` pair key
    or ``"default"`` to the two-qubit error applied after the ideal gate.
    Values are Pauli channels in the default model; a raw transfer matrix is
    accepted for deliberately non-Pauli stress errors.  ``crosstalk`` is a
    single-qubit channel fired on every spectator qubit whenever an entangler
    acts; characterization on an isolated pair cannot see it by construction.
    """

    per_gate: Mapping[str, GateError] = field(default_factory=dict)
    readout: tuple[np.ndarray, ...] | None = None
    crosstalk: PauliChannel | None = None

    def __post_init__(self) -> None:
        if self.readout is not None:
            frozen = []
            for mat in self.readout:
                mat = np.asarray(mat, dtype=float)
                if mat.shape != (2, 2):
                    raise DimensionMismatch("confusion matrices must be 2x2")
                if np.max(np.abs(mat.sum(axis=0) - 1.0)) > 1e-9:
                    raise SingularConfusion("confusion columns must sum to 1")
                if mat[0, 0] < 0.5 or mat[1, 1] < 0.5:
                    raise SingularConfusion("confusion diagonal below 0.5")
                mat.setflags(write=False)
                frozen.append(mat)
            object.__setattr__(self, "readout", tuple(frozen))
        if self.crosstalk is not None and self.crosstalk.qubit_count != 1:
            raise DimensionMismatch("crosstalk channel must act on one qubit")

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls(per_gate={"default": PauliChannel.identity(2)})

    def error_for(self, gate: Entangler) -> GateError:
        m, n = gate.pair
        for key in (gate.gate_id, f"{gate.kind}_{m}-{n}", f"{m}-{n}", "default"):
            if key in self.per_gate:
                return self.per_gate[key]
        raise MissingNoiseEntry(f"no error channel for gate {gate.gate_id!r}")

    def error_ptm_local(self, gate: Entangler) -> np.ndarray:
        error = self.error_for(gate)
        if isinstance(error, PauliChannel):
            return pauli_channel_ptm(error).entries
        return error.entries


def dephasing_channel(qubit_count: int, probability: float) -> PauliChannel:
    """Z-only errors, probability split evenly over the non-identity Z strings."""
    dim = 4**qubit_count
    weights = np.zeros(dim)
    z_indices, _ = _ztype_table(qubit_count)
    others = [int(i) for i in z_indices if i != 0]
    for i in others:
        weights[i] = probability / len(others)
    weights[0] = 1.0 - probability
    return PauliChannel(qubit_count, weights)


def named_channel(kind: str, qubit_count: int = 2, **params) -> PauliChannel:
    if kind == "depolarizing":
        return PauliChannel.depolarizing(qubit_count, float(params["p"]))
    if kind == "dephasing":
        return dephasing_channel(qubit_count, float(params["p"]))
    if kind == "pauli":
        return PauliChannel.from_weight_map(qubit_count, params["weights"])
    raise MissingNoiseEntry(f"unknown channel family {kind!r}")


def calibrate_channel(kind: str, target_fidelity: float, qubit_count: int = 2) -> PauliChannel:
    """Bisect the family parameter until the average gate fidelity matches.

    Composing a channel after a unitary leaves the average fidelity equal to
    that of the channel against the identity, so calibration is target-gate
    independent.
    """
    from .pauli import average_gate_fidelity

    def favg(p: float) -> float:
        channel = named_channel(kind, qubit_count, p=p)
        return average_gate_fidelity(pauli_channel_ptm(channel), Ptm.identity(qubit_count))

    lo, hi = 0.0, 1.0
    if not favg(hi) <= target_fidelity <= favg(lo):
        raise ConfigError(f"target fidelity {target_fidelity} outside family range")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if favg(mid) > target_fidelity:
            lo = mid
        else:
            hi = mid
    return named_channel(kind, qubit_count, p=0.5 * (lo + hi))


# ---------------------------------------------------------------------------
# Exact evolution
# ---------------------------------------------------------------------------


def evolve_exact(hamiltonian: PauliHamiltonian, t: float, initial: np.ndarray) -> np.ndarray:
    """exp(-i H t) applied through the eigendecomposition; norm preserving."""
    if hamiltonian.qubit_count > 4:
        raise UnsupportedSize("exact evolution limited to four qubits")
    psi = np.asarray(initial, dtype=complex)
    if psi.size != 2**hamiltonian.qubit_count:
        raise DimensionMismatch("initial state has wrong dimension")
    energies, vectors = np.linalg.eigh(exact_matrix(hamiltonian))
    phases = np.exp(-1j * energies * t)
    return vectors @ (phases * (vectors.conj().T @ psi))


def apply_circuit_state(circuit: Circuit, initial: np.ndarray) -> np.ndarray:
    psi = np.asarray(initial, dtype=complex).copy()
    for gate in circuit.gates:
        psi = _apply_on_axes(psi, gate.matrix(), gate_qubits(gate), circuit.qubit_count, 2)
    return psi


def run_ideal(circuit: Circuit, initial: np.ndarray) -> np.ndarray:
    """Noiseless populations over the computational basis."""
    psi = apply_circuit_state(circuit, initial)
    return np.abs(psi) ** 2


# ---------------------------------------------------------------------------
# Noisy transfer-matrix evolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PtmStep:
    matrix: np.ndarray
    qubits: tuple[int, ...]


@dataclass(frozen=True)
class PtmProgram:
    """Compiled Pauli-basis walk with one insertion slot per entangler."""

    qubit_count: int
    steps: tuple[PtmStep, ...]
    # slot g sits right after steps[slot_positions[g]] and targets slot_pairs[g]
    slot_positions: tuple[int, ...]
    slot_pairs: tuple[tuple[int, int], ...]
    slot_gate_ids: tuple[str, ...]


def compile_ptm_program(circuit: Circuit, noise: NoiseModel) -> PtmProgram:
    steps: list[PtmStep] = []
    positions: list[int] = []
    pairs: list[tuple[int, int]] = []
    ids: list[str] = []
    spectators = {
        pair: tuple(q for q in range(circuit.qubit_count) if q not in pair)
        for pair in {g.pair for g in circuit.entanglers}
    }
    crosstalk_ptm = (
        pauli_channel_ptm(noise.crosstalk).entries if noise.crosstalk is not None else None
    )
    for gate in circuit.gates:
        steps.append(PtmStep(gate_ptm_local(gate), gate_qubits(gate)))
        if isinstance(gate, Entangler):
            steps.append(PtmStep(noise.error_ptm_local(gate), gate.pair))
            if crosstalk_ptm is not None:
                for q in spectators[gate.pair]:
                    steps.append(PtmStep(crosstalk_ptm, (q,)))
            positions.append(len(steps) - 1)
            pairs.append(gate.pair)
            ids.append(gate.gate_id)
    return PtmProgram(circuit.qubit_count, tuple(steps), tuple(positions), tuple(pairs), tuple(ids))


def run_ptm_program(
    program: PtmProgram,
    initial: PauliVector,
    insertions: Sequence[int] | None = None,
    corrections: Sequence[np.ndarray] | None = None,
) -> PauliVector:
    """Walk the program; optionally insert Pauli signs or correction matrices
    right after each noisy entangler."""
    n = program.qubit_count
    if initial.qubit_count != n:
        raise DimensionMismatch("initial vector width does not match circuit")
    vec = initial.coefficients.copy()
    slot_at = {pos: g for g, pos in enumerate(program.slot_positions)}
    pair_signs = commutation_signs(2).astype(float)
    for pos, step in enumerate(program.steps):
        vec = _apply_on_axes(vec, step.matrix, step.qubits, n, 4)
        g = slot_at.get(pos)
        if g is None:
            continue
        if insertions is not None and insertions[g] != 0:
            vec = _scale_on_axes(vec, pair_signs[insertions[g]], program.slot_pairs[g], n, 4)
        if corrections is not None and corrections[g] is not None:
            vec = _apply_on_axes(vec, corrections[g], program.slot_pairs[g], n, 4)
    return PauliVector(n, vec)


def run_noisy_ptm(circuit: Circuit, noise: NoiseModel, initial: PauliVector) -> PauliVector:
    """Ideal single-qubit gates; each entangler followed by its error channel."""
    return run_ptm_program(compile_ptm_program(circuit, noise), initial)


def run_noisy_density(circuit: Circuit, noise: NoiseModel, initial: np.ndarray) -> np.ndarray:
    """Independent density-matrix route; returns populations."""
    n = circuit.qubit_count
    psi = np.asarray(initial, dtype=complex)
    rho = np.outer(psi, psi.conj())
    basis2 = pauli_basis(2)
    basis1 = pauli_basis(1)

    def apply_channel(rho: np.ndarray, channel: GateError, qubits: tuple[int, ...]) -> np.ndarray:
        if isinstance(channel, PauliChannel):
            basis = basis1 if channel.qubit_count == 1 else basis2
            out = np.zeros_like(rho)
            for a, weight in enumerate(channel.weights):
                if weight == 0.0:
                    continue
                full = embed_operator(basis[a], qubits, n, 2)
                out += weight * full @ rho @ full.conj().T
            return out
        # Raw transfer matrix: convert through the Pauli expansion.
        coeffs = np.einsum("iab,ba->i", pauli_basis(n), rho).real
        from .pauli import embed_ptm, Ptm as _Ptm

        coeffs = embed_ptm(_Ptm(2, channel.entries), qubits, n).apply(coeffs)
        return np.einsum("i,iab->ab", coeffs, pauli_basis(n)) / 2**n

    for gate in circuit.gates:
        full = gate_unitary_full(gate, n)
        rho = full @ rho @ full.conj().T
        if isinstance(gate, Entangler):
            rho = apply_channel(rho, noise.error_for(gate), gate.pair)
            if noise.crosstalk is not None:
                for q in range(n):
                    if q not in gate.pair:
                        rho = apply_channel(rho, noise.crosstalk, (q,))
    return np.diag(rho).real


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotCounts:
    """Multinomial counts over basis labels; counts sum to shots."""

    shots: int
    counts: Mapping[str, int]
    clipped_mass: float = 0.0

    def __post_init__(self) -> None:
        total = sum(self.counts.values())
        if total != self.shots:
            raise DimensionMismatch(f"counts sum to {total}, expected {self.shots}")

    def vector(self, qubit_count: int) -> np.ndarray:
        return np.array([self.counts.get(label, 0) for label in basis_labels(qubit_count)], dtype=float)

    def frequencies(self, qubit_count: int) -> np.ndarray:
        return self.vector(qubit_count) / self.shots

    def to_json_dict(self) -> dict:
        return {
            "shots": self.shots,
            "counts": {k: int(v) for k, v in sorted(self.counts.items())},
            "clipped_mass": self.clipped_mass,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "ShotCounts":
        return cls(int(data["shots"]), dict(data["counts"]), float(data.get("clipped_mass", 0.0)))


def clip_to_simplex(populations: np.ndarray) -> tuple[np.ndarray, float]:
    """Zero negative entries and renormalize; returns the clipped mass."""
    populations = np.asarray(populations, dtype=float)
    clipped = float(-populations[populations < 0].sum())
    nonneg = np.clip(populations, 0.0, None)
    total = nonneg.sum()
    if total <= 0:
        raise DimensionMismatch("populations have no positive mass")
    return nonneg / total, clipped


def sample_shots(populations: np.ndarray, shots: int, seed) -> ShotCounts:
    """Deterministic multinomial draw over the computational basis."""
    probs, clipped = clip_to_simplex(populations)
    n = int(round(np.log2(probs.size)))
    rng = np.random.default_rng(seed)
    draw = rng.multinomial(shots, probs)
    labels = basis_labels(n)
    counts = {labels[i]: int(c) for i, c in enumerate(draw) if c}
    return ShotCounts(shots, counts, clipped)


def _confusion_full(noise: NoiseModel, qubit_count: int, invert: bool) -> np.ndarray:
    mats = noise.readout
    if mats is None:
        return np.eye(2**qubit_count)
    if len(mats) != qubit_count:
        raise DimensionMismatch(f"expected {qubit_count} confusion matrices, got {len(mats)}")
    full = np.eye(1)
    for mat in mats:
        if invert:
            det = np.linalg.det(mat)
            if abs(det) < 1e-12:
                raise SingularConfusion("confusion matrix not invertible")
            mat = np.linalg.inv(mat)
        full = np.kron(full, mat)
    return full


def apply_readout_error(data, noise: NoiseModel, direction: str) -> np.ndarray:
    """Corrupt populations by the tensored confusion matrix, or invert it.

    Accepts a population vector or ShotCounts; always returns a float vector
    at the scale of the input (counts stay counts).  Corrected finite-shot
    data may carry small negative entries.
    """
    if direction not in ("corrupt", "correct"):
        raise ValueError(f"direction must be corrupt or correct, got {direction!r}")
    if isinstance(data, ShotCounts):
        n = len(next(iter(data.counts)))
        vec = data.vector(n)
    else:
        vec = np.asarray(data, dtype=float)
        n = int(round(np.log2(vec.size)))
    full = _confusion_full(noise, n, invert=direction == "correct")
    return full @ vec
