r"""Noisy-gate tomography and inverse-error quasi-probability decomposition.

A noisy entangler is assumed to be its ideal transfer matrix followed by a
Pauli channel, so the error is fully described by the sixteen eigenvalues
``lam_b`` (``lam_II = 1``).  One tomography setting per remaining component
suffices: prepare a product of single-qubit Pauli eigenstates, apply the
noisy gate, and measure the Pauli observable whose ideal signal is largest.
Under the diagonal assumption the measured-to-ideal ratio is exactly
``lam_b`` whatever else the preparation carries.

The inverse error then decomposes over Pauli insertions.  The transfer
matrix of conjugation by ``P_a`` is diagonal with commutation signs
``w(a, b)``, and since the sign matrix squares to ``16 I`` the coefficients
come out in closed form,

.. math::

    q_a = \frac{1}{16} \sum_b \frac{w(a, b)}{\lambda_b},

which sum to one whenever ``lam_II = 1``.  Negative coefficients make the
mixture a quasi-probability: sampling uses ``p_a = |q_a| / C`` with the cost
``C = sum_a |q_a| >= 1`` multiplying the estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateSetting,
    DimensionMismatch,
    MissingDecomposition,
    NonDiagonal,
    NonPauliError,
    SingularEigenvalue,
)
from .hubbard import Circuit, Entangler
from .pauli import (
    PauliChannel,
    PauliString,
    Ptm,
    commutation_signs,
    pauli_ptm,
    ptm_compose,
    ptm_from_unitary,
    ptm_inverse,
)
from .simulate import NoiseModel, PauliVector

# Eigenvalue estimates are clipped into this interval before inversion.
EIGENVALUE_FLOOR = 1e-3
EIGENVALUE_CEILING = 1.0
# Finite-shot overshoot above one tolerated in the stored estimates.
OVERSHOOT_LIMIT = 1.05

_EIGENSTATE_PREPS = {
    # Single-qubit states with unit expectation of each Pauli; identity
    # positions hold |0>.
    "I": np.array([1.0, 0.0], dtype=complex),
    "Z": np.array([1.0, 0.0], dtype=complex),
    "X": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    "Y": np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0),
}


def _product_eigenstate(label: str) -> np.ndarray:
    psi = np.eye(1, dtype=complex)[0]
    for ch in label:
        psi = np.kron(psi, _EIGENSTATE_PREPS[ch])
    return psi


def select_settings(ideal: Ptm) -> list[tuple[int, int]]:
    """One (preparation, observable) index pair per non-identity component.

    The preparation maximizing the ideal output signal of observable b is
    chosen; anything below 0.5 would drown in shot noise.
    """
    settings = []
    for b in range(1, ideal.dim):
        signals = np.abs(ideal.entries[b, 1:])
        j = int(np.argmax(signals)) + 1
        if signals[j - 1] < 0.5:
            raise DegenerateSetting(f"no preparation gives signal >= 0.5 for component {b}")
        settings.append((j, b))
    return settings


@dataclass(frozen=True)
class GateCharacterization:
    """Tomographic snapshot of one noisy entangler."""

    gate_id: str
    ideal: Ptm
    eigenvalues: np.ndarray = field(repr=False)
    raw_eigenvalues: np.ndarray = field(repr=False)
    shots_per_setting: int = 0
    clipped: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.shape != (self.ideal.dim,):
            raise DimensionMismatch("eigenvalue vector has wrong length")
        if lam[0] != 1.0:
            raise DimensionMismatch("identity eigenvalue must be exactly 1")
        if np.any(lam <= 0.0) or np.any(lam > OVERSHOOT_LIMIT):
            raise SingularEigenvalue("stored eigenvalues must lie in (0, 1.05]")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "raw_eigenvalues", np.asarray(self.raw_eigenvalues, dtype=float))

    @property
    def estimated_noisy(self) -> Ptm:
        return Ptm(self.ideal.qubit_count, np.diag(self.eigenvalues) @ self.ideal.entries)

    def error_diagonal(self) -> np.ndarray:
        """Eigenvalues clipped into the invertible window for decomposition."""
        return np.clip(self.eigenvalues, EIGENVALUE_FLOOR, EIGENVALUE_CEILING)

    def to_json_dict(self) -> dict:
        return {
            "gate_id": self.gate_id,
            "ideal": self.ideal.to_json_dict(),
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "raw_eigenvalues": [float(x) for x in self.raw_eigenvalues],
            "shots_per_setting": self.shots_per_setting,
            "clipped": list(self.clipped),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "GateCharacterization":
        return cls(
            gate_id=str(data["gate_id"]),
            ideal=Ptm.from_json_dict(data["ideal"]),
            eigenvalues=np.array(data["eigenvalues"], dtype=float),
            raw_eigenvalues=np.array(data["raw_eigenvalues"], dtype=float),
            shots_per_setting=int(data["shots_per_setting"]),
            clipped=tuple(data.get("clipped", ())),
        )


def _noisy_output(gate: Entangler, noise: NoiseModel, psi: np.ndarray) -> np.ndarray:
    """Pauli vector after the isolated noisy gate on its own two qubits."""
    local = Entangler(gate.kind, gate.angle, (0, 1), gate.gate_id)
    ideal = ptm_from_unitary(local.matrix()).entries
    vec = PauliVector.from_state(psi).coefficients
    return noise.error_ptm_local(gate) @ (ideal @ vec)


def characterize_gate(
    gate: Entangler,
    noise: NoiseModel,
    shots_per_setting: int,
    seed: int,
) -> GateCharacterization:
    """Estimate the error eigenvalues of one entangler in isolation.

    ``shots_per_setting = 0`` selects exact expectations; otherwise each
    setting draws that many parity outcomes.  The characterization circuit
    holds only the gate's own pair, so spectator cross-talk configured in the
    noise model never enters here.
    """
    local = Entangler(gate.kind, gate.angle, (0, 1), gate.gate_id)
    ideal = ptm_from_unitary(local.matrix())
    settings = select_settings(ideal)

    raw = np.ones(ideal.dim)
    for setting_index, (prep, observable) in enumerate(settings):
        psi = _product_eigenstate(PauliString.from_index(prep, 2).labels)
        prep_vec = PauliVector.from_state(psi).coefficients
        ideal_signal = float(ideal.entries[observable] @ prep_vec)
        noisy_signal = float(_noisy_output(gate, noise, psi)[observable])
        if shots_per_setting > 0:
            rng = np.random.default_rng([seed, setting_index])
            prob_plus = 0.5 * (1.0 + np.clip(noisy_signal, -1.0, 1.0))
            plus = rng.binomial(shots_per_setting, prob_plus)
            noisy_signal = 2.0 * plus / shots_per_setting - 1.0
        raw[observable] = noisy_signal / ideal_signal

    # Held-out consistency setting: a preparation never used above; under a
    # diagonal error the reconstruction predicts its output exactly.
    holdout = _product_eigenstate("XY")
    holdout_vec = PauliVector.from_state(holdout).coefficients
    predicted = np.diag(raw) @ (ideal.entries @ holdout_vec)
    actual = _noisy_output(gate, noise, holdout)
    tolerance = 1e-9 if shots_per_setting == 0 else 6.0 / np.sqrt(shots_per_setting)
    if np.max(np.abs(predicted - actual)) > tolerance:
        raise NonPauliError(
            f"gate {gate.gate_id!r}: held-out setting deviates by "
            f"{np.max(np.abs(predicted - actual)):.3e}, error is not Pauli-diagonal"
        )

    clipped = tuple(
        int(b) for b in range(1, ideal.dim) if not 0.0 < raw[b] <= OVERSHOOT_LIMIT
    )
    eigenvalues = raw.copy()
    eigenvalues[1:] = np.clip(raw[1:], EIGENVALUE_FLOOR, OVERSHOOT_LIMIT)
    eigenvalues[0] = 1.0
    return GateCharacterization(
        gate_id=gate.gate_id,
        ideal=ideal,
        eigenvalues=eigenvalues,
        raw_eigenvalues=raw,
        shots_per_setting=shots_per_setting,
        clipped=clipped,
    )


def error_operator(noisy: Ptm, ideal: Ptm) -> Ptm:
    """Error transfer matrix: noisy composed with the inverse ideal gate."""
    return ptm_compose(ptm_inverse(ideal), noisy)


@dataclass(frozen=True)
class QuasiProbDecomposition:
    """Signed Pauli mixture implementing one gate's inverse error."""

    gate_id: str
    coefficients: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)
    signs: np.ndarray = field(repr=False)
    cost: float = 1.0

    def __post_init__(self) -> None:
        q = np.asarray(self.coefficients, dtype=float)
        if abs(q.sum() - 1.0) > 1e-9:
            raise DimensionMismatch(f"coefficients sum to {q.sum()!r}, expected 1")
        object.__setattr__(self, "coefficients", q)
        object.__setattr__(self, "probabilities", np.asarray(self.probabilities, dtype=float))
        object.__setattr__(self, "signs", np.asarray(self.signs, dtype=np.int64))

    @classmethod
    def identity(cls, gate_id: str = "") -> "QuasiProbDecomposition":
        q = np.zeros(16)
        q[0] = 1.0
        return cls(gate_id, q, q.copy(), np.ones(16, dtype=np.int64), 1.0)

    def to_json_dict(self) -> dict:
        return {
            "gate_id": self.gate_id,
            "coefficients": [float(x) for x in self.coefficients],
            "probabilities": [float(x) for x in self.probabilities],
            "signs": [int(s) for s in self.signs],
            "cost": self.cost,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "QuasiProbDecomposition":
        return cls(
            gate_id=str(data["gate_id"]),
            coefficients=np.array(data["coefficients"], dtype=float),
            probabilities=np.array(data["probabilities"], dtype=float),
            signs=np.array(data["signs"], dtype=np.int64),
            cost=float(data["cost"]),
        )


def decompose_inverse(error: Ptm, gate_id: str = "") -> QuasiProbDecomposition:
    """Closed-form quasi-probabilities for the inverse of a diagonal error."""
    if not error.is_diagonal(1e-6):
        raise NonDiagonal("error transfer matrix carries off-diagonal mass above 1e-6")
    lam = np.diag(error.entries)
    if np.any(np.abs(lam) < 1e-6):
        raise SingularEigenvalue("an error eigenvalue is below 1e-6 in magnitude")
    n = error.qubit_count
    signs_matrix = commutation_signs(n).astype(float)
    q = signs_matrix @ (1.0 / lam) / error.dim

    # Verification: the signed mixture must reproduce the inverse diagonal.
    recombined = signs_matrix.T @ q
    if np.max(np.abs(recombined - 1.0 / lam)) > 1e-9:
        raise NonDiagonal("decomposition failed to reproduce the inverse error")

    cost = float(np.abs(q).sum())
    signs = np.where(q < 0, -1, 1).astype(np.int64)
    probabilities = np.abs(q) / cost
    return QuasiProbDecomposition(gate_id, q, probabilities, signs, cost)


def decomposition_from_characterization(char: GateCharacterization) -> QuasiProbDecomposition:
    error = Ptm(char.ideal.qubit_count, np.diag(char.error_diagonal()))
    return decompose_inverse(error, char.gate_id)


def inverse_error_ptm(decomp: QuasiProbDecomposition, qubit_count: int = 2) -> Ptm:
    """Dense inverse-error matrix summed from the signed Pauli mixture."""
    out = np.zeros((4**qubit_count, 4**qubit_count))
    for a, coeff in enumerate(decomp.coefficients):
        if coeff != 0.0:
            out += coeff * pauli_ptm(a, qubit_count).entries
    return Ptm(qubit_count, out)


def circuit_cost(
    decomps: Mapping[str, QuasiProbDecomposition] | Sequence[QuasiProbDecomposition],
    circuit: Circuit,
) -> float:
    """Product of per-gate costs over every entangler in the circuit."""
    table = _decomposition_table(decomps)
    cost = 1.0
    for gate in circuit.entanglers:
        if gate.gate_id not in table:
            raise MissingDecomposition(f"no decomposition for gate {gate.gate_id!r}")
        cost *= table[gate.gate_id].cost
    return cost


def _decomposition_table(
    decomps: Mapping[str, QuasiProbDecomposition] | Sequence[QuasiProbDecomposition],
) -> Mapping[str, QuasiProbDecomposition]:
    if isinstance(decomps, Mapping):
        return decomps
    return {d.gate_id: d for d in decomps}
