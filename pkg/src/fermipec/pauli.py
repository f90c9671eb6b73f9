r"""Pauli-string and Pauli-transfer-matrix algebra for up to four qubits.

States and channels are handled in the Pauli basis.  An ``n``-qubit density
operator is expanded as

.. math::

    \rho = \frac{1}{2^n} \sum_i \langle P_i \rangle \, P_i,

where the strings ``P_i`` are ordered by their base-4 index with ``I=0, X=1,
Y=2, Z=3`` and the leftmost qubit most significant, so the two-qubit order is
``II, IX, IY, IZ, XI, ..., ZZ``.  A channel acts on the coefficient vector
through its transfer matrix ``R`` with entries

.. math::

    R_{ij} = \frac{1}{2^n} \operatorname{tr}\bigl(P_i \, \Lambda(P_j)\bigr),

normalised so every entry lies in ``[-1, 1]``.  Composition of channels is
matrix multiplication, a unitary channel gives an orthogonal matrix, and a
Pauli channel (random Pauli applied with some probability) gives a diagonal
one whose entries are commutation signs summed against the weights.  Dense
matrices are used throughout; at four qubits they are only 256 x 256.

All values are immutable after construction and every operation is a pure
function, so everything here is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidWeights,
    NonUnitary,
    Singular,
    UnsupportedSize,
)

PAULI_LABELS = "IXYZ"

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Algebraic identities are checked to 1e-10, inverses to 1e-8.
ALGEBRA_TOL = 1e-10
INVERSE_TOL = 1e-8
MAX_QUBITS = 4


def _check_qubit_count(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise UnsupportedSize(f"qubit_count must be in 1..{MAX_QUBITS}, got {n}")


def label_to_index(label: str) -> int:
    """Base-4 index of a Pauli label, leftmost qubit most significant."""
    idx = 0
    for ch in label:
        idx = 4 * idx + PAULI_LABELS.index(ch)
    return idx


def index_to_label(index: int, qubit_count: int) -> str:
    digits = []
    for _ in range(qubit_count):
        digits.append(PAULI_LABELS[index & 3])
        index >>= 2
    return "".join(reversed(digits))


@dataclass(frozen=True)
class PauliString:
    """An n-qubit Pauli operator identified by its per-qubit labels."""

    qubit_count: int
    labels: str

    def __post_init__(self) -> None:
        _check_qubit_count(self.qubit_count)
        if len(self.labels) != self.qubit_count:
            raise DimensionMismatch(
                f"labels {self.labels!r} do not match qubit_count {self.qubit_count}"
            )
        if any(ch not in PAULI_LABELS for ch in self.labels):
            raise ValueError(f"invalid Pauli label {self.labels!r}")

    @classmethod
    def from_label(cls, labels: str) -> "PauliString":
        return cls(len(labels), labels)

    @classmethod
    def from_index(cls, index: int, qubit_count: int) -> "PauliString":
        if not 0 <= index < 4**qubit_count:
            raise IndexOutOfRange(f"Pauli index {index} out of range for {qubit_count} qubits")
        return cls(qubit_count, index_to_label(index, qubit_count))

    @property
    def index(self) -> int:
        return label_to_index(self.labels)

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix, tensor product in label order."""
        out = np.eye(1, dtype=complex)
        for ch in self.labels:
            out = np.kron(out, _SINGLE[ch])
        return out

    def commutes_with(self, other: "PauliString") -> bool:
        return commutation_sign(self.index, other.index, self.qubit_count) == 1

    def __str__(self) -> str:
        return self.labels


@lru_cache(maxsize=None)
def pauli_basis(qubit_count: int) -> np.ndarray:
    """Stack of all 4^n Pauli matrices, shape (4^n, 2^n, 2^n)."""
    _check_qubit_count(qubit_count)
    mats = [_SINGLE[ch] for ch in PAULI_LABELS]
    stack = np.array(mats)
    for _ in range(qubit_count - 1):
        stack = np.einsum("iab,jcd->ijacbd", stack, np.array(mats)).reshape(
            -1, stack.shape[1] * 2, stack.shape[1] * 2
        )
    stack.setflags(write=False)
    return stack


@lru_cache(maxsize=None)
def commutation_signs(qubit_count: int) -> np.ndarray:
    """Matrix w with w[a, b] = +1 if P_a and P_b commute, -1 otherwise."""
    dim = 4**qubit_count
    digits = np.zeros((dim, qubit_count), dtype=np.int64)
    idx = np.arange(dim)
    for q in range(qubit_count):
        digits[:, q] = (idx >> (2 * (qubit_count - 1 - q))) & 3
    da = digits[:, None, :]
    db = digits[None, :, :]
    anti = (da != 0) & (db != 0) & (da != db)
    signs = np.where(anti.sum(axis=2) % 2 == 1, -1, 1).astype(np.int8)
    signs.setflags(write=False)
    return signs


def commutation_sign(a: int, b: int, qubit_count: int) -> int:
    return int(commutation_signs(qubit_count)[a, b])


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Ptm:
    """Real transfer matrix of a channel in the Pauli basis."""

    qubit_count: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        _check_qubit_count(self.qubit_count)
        dim = 4**self.qubit_count
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (dim, dim):
            raise DimensionMismatch(
                f"expected {dim}x{dim} entries for {self.qubit_count} qubits, got {entries.shape}"
            )
        object.__setattr__(self, "entries", _frozen(entries))

    @classmethod
    def identity(cls, qubit_count: int) -> "Ptm":
        return cls(qubit_count, np.eye(4**qubit_count))

    @property
    def dim(self) -> int:
        return 4**self.qubit_count

    def is_diagonal(self, tol: float = 1e-6) -> bool:
        off = self.entries - np.diag(np.diag(self.entries))
        return bool(np.max(np.abs(off)) <= tol)

    def is_orthogonal(self, tol: float = ALGEBRA_TOL) -> bool:
        gram = self.entries.T @ self.entries
        return bool(np.max(np.abs(gram - np.eye(self.dim))) <= tol)

    def apply(self, coefficients: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(coefficients, dtype=float)

    def to_json_dict(self) -> dict:
        return {
            "qubit_count": self.qubit_count,
            "entries": [float(x) for x in self.entries.reshape(-1)],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Ptm":
        n = int(data["qubit_count"])
        dim = 4**n
        entries = np.array(data["entries"], dtype=float).reshape(dim, dim)
        return cls(n, entries)


@dataclass(frozen=True)
class PauliChannel:
    """Random-Pauli channel: apply P_a with probability weights[a]."""

    qubit_count: int
    weights: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        _check_qubit_count(self.qubit_count)
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (4**self.qubit_count,):
            raise InvalidWeights(
                f"expected {4**self.qubit_count} weights, got shape {weights.shape}"
            )
        if np.any(weights < -1e-12) or np.any(weights > 1 + 1e-12):
            raise InvalidWeights("weights must lie in [0, 1]")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidWeights(f"weights sum to {weights.sum()!r}, expected 1")
        object.__setattr__(self, "weights", _frozen(np.clip(weights, 0.0, 1.0)))

    @classmethod
    def identity(cls, qubit_count: int) -> "PauliChannel":
        weights = np.zeros(4**qubit_count)
        weights[0] = 1.0
        return cls(qubit_count, weights)

    @classmethod
    def from_weight_map(cls, qubit_count: int, weights: Mapping[str, float]) -> "PauliChannel":
        """Non-identity weights by label; the identity takes the remainder."""
        vec = np.zeros(4**qubit_count)
        for label, w in weights.items():
            idx = label_to_index(label)
            if len(label) != qubit_count:
                raise InvalidWeights(f"label {label!r} has wrong length")
            vec[idx] += float(w)
        if vec[0] == 0.0:
            vec[0] = 1.0 - vec[1:].sum()
        return cls(qubit_count, vec)

    @classmethod
    def depolarizing(cls, qubit_count: int, probability: float) -> "PauliChannel":
        """Uniform channel with eigenvalue 1 - probability on every non-identity string."""
        dim = 4**qubit_count
        weights = np.full(dim, probability / dim)
        weights[0] = 1.0 - probability * (dim - 1) / dim
        return cls(qubit_count, weights)

    @classmethod
    def from_eigenvalues(cls, eigenvalues: np.ndarray) -> "PauliChannel":
        """Invert the commutation-sign transform to recover Pauli weights."""
        lam = np.asarray(eigenvalues, dtype=float)
        qubit_count = int(round(np.log2(lam.size) / 2))
        if 4**qubit_count != lam.size:
            raise DimensionMismatch(f"eigenvalue vector length {lam.size} is not a power of 4")
        signs = commutation_signs(qubit_count).astype(float)
        weights = signs @ lam / lam.size
        return cls(qubit_count, weights)

    def eigenvalues(self) -> np.ndarray:
        """Diagonal of the channel's transfer matrix."""
        signs = commutation_signs(self.qubit_count).astype(float)
        return signs.T @ self.weights


def ptm_from_unitary(unitary: np.ndarray) -> Ptm:
    """Transfer matrix of conjugation by a unitary."""
    unitary = np.asarray(unitary, dtype=complex)
    dim = unitary.shape[0]
    if unitary.ndim != 2 or unitary.shape != (dim, dim) or dim & (dim - 1) or dim < 2:
        raise DimensionMismatch(f"unitary must be square with power-of-two size, got {unitary.shape}")
    qubit_count = dim.bit_length() - 1
    _check_qubit_count(qubit_count)
    defect = np.max(np.abs(unitary.conj().T @ unitary - np.eye(dim)))
    if defect > 1e-10:
        raise NonUnitary(f"unitarity defect {defect:.2e} exceeds 1e-10")
    basis = pauli_basis(qubit_count)
    conjugated = np.einsum("ab,jbc,dc->jad", unitary, basis, unitary.conj())
    entries = np.einsum("iab,jba->ij", basis, conjugated).real / dim
    return Ptm(qubit_count, entries)


def ptm_compose(first: Ptm, second: Ptm) -> Ptm:
    """Channel applying ``first`` then ``second``; the product second @ first."""
    if first.qubit_count != second.qubit_count:
        raise DimensionMismatch(
            f"cannot compose {first.qubit_count}- and {second.qubit_count}-qubit transfer matrices"
        )
    return Ptm(first.qubit_count, second.entries @ first.entries)


def ptm_inverse(matrix: Ptm) -> Ptm:
    """Inverse channel matrix; requires condition number below 1e8."""
    cond = np.linalg.cond(matrix.entries)
    if not np.isfinite(cond) or cond > 1e8:
        raise Singular(f"condition number {cond:.3e} exceeds 1e8")
    return Ptm(matrix.qubit_count, np.linalg.inv(matrix.entries))


@lru_cache(maxsize=None)
def _embedding_indices(pairs: tuple[int, ...], total: int) -> tuple[np.ndarray, np.ndarray]:
    """Sub-index and spectator-rest encodings of every full Pauli index."""
    dim = 4**total
    idx = np.arange(dim)
    digits = [(idx >> (2 * (total - 1 - q))) & 3 for q in range(total)]
    sub = np.zeros(dim, dtype=np.int64)
    for q in pairs:
        sub = 4 * sub + digits[q]
    rest = np.zeros(dim, dtype=np.int64)
    for q in range(total):
        if q not in pairs:
            rest = 4 * rest + digits[q]
    return sub, rest


def embed_ptm(matrix: Ptm, qubits: tuple[int, ...], total: int) -> Ptm:
    """Act with ``matrix`` on the listed qubits and as identity elsewhere."""
    _check_qubit_count(total)
    if len(set(qubits)) != len(qubits):
        raise IndexOutOfRange(f"qubits {qubits} must be distinct")
    if any(q < 0 or q >= total for q in qubits):
        raise IndexOutOfRange(f"qubits {qubits} out of range for {total} qubits")
    if len(qubits) != matrix.qubit_count:
        raise DimensionMismatch(
            f"{matrix.qubit_count}-qubit matrix cannot target {len(qubits)} qubits"
        )
    sub, rest = _embedding_indices(tuple(qubits), total)
    same_rest = rest[:, None] == rest[None, :]
    entries = matrix.entries[np.ix_(sub, sub)] * same_rest
    return Ptm(total, entries)


def embed_two_qubit(matrix: Ptm, pair: tuple[int, int], total: int) -> Ptm:
    """Embed a two-qubit transfer matrix on ``pair`` into a wider register."""
    m, n = pair
    if m == n:
        raise IndexOutOfRange(f"pair {pair} must name two distinct qubits")
    return embed_ptm(matrix, (m, n), total)


def average_gate_fidelity(noisy: Ptm, ideal: Ptm) -> float:
    """Average fidelity (d F_pro + 1) / (d + 1) of ``noisy`` against a unitary target."""
    if noisy.qubit_count != ideal.qubit_count:
        raise DimensionMismatch("transfer matrices act on different qubit counts")
    if not ideal.is_orthogonal(1e-8):
        raise NonUnitary("ideal transfer matrix is not orthogonal")
    d = 2**noisy.qubit_count
    process_fidelity = np.trace(ideal.entries.T @ noisy.entries) / d**2
    return float((d * process_fidelity + 1.0) / (d + 1.0))


def pauli_channel_ptm(channel: PauliChannel) -> Ptm:
    """Diagonal transfer matrix of a Pauli channel."""
    return Ptm(channel.qubit_count, np.diag(channel.eigenvalues()))


def pauli_ptm(index: int, qubit_count: int) -> Ptm:
    """Transfer matrix of conjugation by the Pauli string with this index."""
    signs = commutation_signs(qubit_count)[index].astype(float)
    return Ptm(qubit_count, np.diag(signs))


def all_labels(qubit_count: int) -> Iterable[str]:
    for idx in range(4**qubit_count):
        yield index_to_label(idx, qubit_count)
