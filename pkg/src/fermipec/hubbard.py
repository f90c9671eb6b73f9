"""Extended Fermi-Hubbard Hamiltonians and their Trotterized circuits.

A chain of L sites with tunneling J, nearest-neighbor interaction V and
(for two fermion components) on-site interaction U maps onto N qubits,
N = L for spinless fermions and N = 2L with qubits 1..L holding the
spin-up sites and L+1..2L the spin-down sites (0-based here).  Adjacent
hops have cancelling parity strings, so the qubit Hamiltonian splits into
three mutually commuting parts:

    H_X = (J/2) sum  sx sx   (same-spin neighbors)
    H_Y = (J/2) sum  sy sy
    H_Z = (V/4) sum (1 - sz)(1 - sz)  +  (U/4) sum (1 - sz_up)(1 - sz_dn)

Expanding the Z part produces a two-body sz sz term, single sz terms, and
an identity offset which is kept on the Hamiltonian so energies stay exact
(populations never see it).

A first-order Trotter step applies exp(-i H_X dt), then exp(-i H_Y dt),
then exp(-i H_Z dt).  Every two-body term c * ss becomes an entangling
gate exp(-i phi ss) with phi = c * dt, and single sz terms merge into one
z-rotation per qubit per step.  The native entangler is the YY flavor;
XX and ZZ flavors compile onto it by conjugating both qubits with
exp(-i (pi/4) sz) or exp(-i (pi/4) sx).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import DimensionMismatch, InvalidSteps, UnknownGateKind, UnsupportedSize
from .pauli import PauliString, _SINGLE

ONE_COMPONENT = "one"
TWO_COMPONENT = "two"


@dataclass(frozen=True)
class HubbardSpec:
    """Chain geometry and couplings; energies in units of the tunneling J."""

    sites: int
    components: str = ONE_COMPONENT
    tunneling: float = 1.0
    onsite: float = 0.0
    neighbor: float = 0.0

    def __post_init__(self) -> None:
        if self.components not in (ONE_COMPONENT, TWO_COMPONENT):
            raise ValueError(f"components must be 'one' or 'two', got {self.components!r}")
        if self.sites < 1:
            raise UnsupportedSize("need at least one site")
        if self.qubit_count > 4:
            raise UnsupportedSize(
                f"{self.sites} sites with {self.components} component(s) needs "
                f"{self.qubit_count} qubits, maximum is 4"
            )
        if self.components == ONE_COMPONENT and self.onsite != 0.0:
            # On-site interaction vanishes for a single component.
            object.__setattr__(self, "onsite", 0.0)

    @property
    def qubit_count(self) -> int:
        return self.sites if self.components == ONE_COMPONENT else 2 * self.sites

    def to_json_dict(self) -> dict:
        return {
            "sites": self.sites,
            "components": self.components,
            "tunneling": self.tunneling,
            "onsite": self.onsite,
            "neighbor": self.neighbor,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "HubbardSpec":
        return cls(
            sites=int(data["sites"]),
            components=str(data.get("components", ONE_COMPONENT)),
            tunneling=float(data.get("tunneling", 1.0)),
            onsite=float(data.get("onsite", 0.0)),
            neighbor=float(data.get("neighbor", 0.0)),
        )


@dataclass(frozen=True)
class HamiltonianTerm:
    coefficient: float
    pauli: PauliString
    part: str  # "x", "y" or "z"


@dataclass(frozen=True)
class PauliHamiltonian:
    """Weighted Pauli strings split into mutually commuting x/y/z parts."""

    qubit_count: int
    terms: tuple[HamiltonianTerm, ...]
    offset: float = 0.0

    def part(self, name: str) -> tuple[HamiltonianTerm, ...]:
        return tuple(t for t in self.terms if t.part == name)


def _single_z(qubit: int, n: int) -> PauliString:
    labels = ["I"] * n
    labels[qubit] = "Z"
    return PauliString(n, "".join(labels))


def _two_body(kind: str, pair: tuple[int, int], n: int) -> PauliString:
    labels = ["I"] * n
    labels[pair[0]] = kind.upper()
    labels[pair[1]] = kind.upper()
    return PauliString(n, "".join(labels))


def build_hamiltonian(spec: HubbardSpec) -> PauliHamiltonian:
    """Qubit Hamiltonian of the chain under the parity-string mapping."""
    n = spec.qubit_count
    sites = spec.sites
    hop = 0.5 * spec.tunneling

    chains: list[list[int]]
    if spec.components == ONE_COMPONENT:
        chains = [list(range(sites))]
    else:
        chains = [list(range(sites)), list(range(sites, 2 * sites))]

    terms: list[HamiltonianTerm] = []
    offset = 0.0

    for kind, part in (("x", "x"), ("y", "y")):
        for chain in chains:
            for a, b in zip(chain, chain[1:]):
                terms.append(HamiltonianTerm(hop, _two_body(kind, (a, b), n), part))

    # (V/4)(1 - sz_a)(1 - sz_b) per same-chain bond.
    linear: dict[int, float] = {}
    quadratic: list[tuple[float, tuple[int, int]]] = []
    if spec.neighbor != 0.0:
        v4 = spec.neighbor / 4.0
        for chain in chains:
            for a, b in zip(chain, chain[1:]):
                offset += v4
                linear[a] = linear.get(a, 0.0) - v4
                linear[b] = linear.get(b, 0.0) - v4
                quadratic.append((v4, (a, b)))
    if spec.components == TWO_COMPONENT and spec.onsite != 0.0:
        u4 = spec.onsite / 4.0
        for site in range(sites):
            up, down = site, sites + site
            offset += u4
            linear[up] = linear.get(up, 0.0) - u4
            linear[down] = linear.get(down, 0.0) - u4
            quadratic.append((u4, (up, down)))

    for coeff, pair in quadratic:
        terms.append(HamiltonianTerm(coeff, _two_body("z", pair, n), "z"))
    for qubit in sorted(linear):
        if linear[qubit] != 0.0:
            terms.append(HamiltonianTerm(linear[qubit], _single_z(qubit, n), "z"))

    return PauliHamiltonian(n, tuple(terms), offset)


def exact_matrix(hamiltonian: PauliHamiltonian) -> np.ndarray:
    """Dense Hermitian matrix including the identity offset."""
    if hamiltonian.qubit_count > 4:
        raise UnsupportedSize("dense matrix limited to four qubits")
    dim = 2**hamiltonian.qubit_count
    out = hamiltonian.offset * np.eye(dim, dtype=complex)
    for term in hamiltonian.terms:
        out += term.coefficient * term.pauli.matrix()
    return out


# ---------------------------------------------------------------------------
# Circuits
# ---------------------------------------------------------------------------

_AXIS_MATRICES = {"x": _SINGLE["X"], "y": _SINGLE["Y"], "z": _SINGLE["Z"]}


@dataclass(frozen=True)
class Rotation:
    """Single-qubit rotation exp(-i (angle/2) sigma_axis)."""

    axis: str
    angle: float
    qubit: int

    def matrix(self) -> np.ndarray:
        sigma = _AXIS_MATRICES[self.axis]
        return np.cos(self.angle / 2) * np.eye(2) - 1j * np.sin(self.angle / 2) * sigma

    def to_json_dict(self) -> dict:
        return {"gate": "rotation", "axis": self.axis, "angle": self.angle, "qubit": self.qubit}


@dataclass(frozen=True)
class Entangler:
    """Two-qubit gate exp(-i angle sigma_kind otimes sigma_kind) on ``pair``."""

    kind: str
    angle: float
    pair: tuple[int, int]
    gate_id: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("xx", "yy", "zz"):
            raise UnknownGateKind(f"unknown entangler kind {self.kind!r}")
        if self.pair[0] == self.pair[1]:
            raise DimensionMismatch(f"entangler pair {self.pair} must be distinct")
        if not self.gate_id:
            object.__setattr__(self, "gate_id", make_gate_id(self.kind, self.pair, self.angle))

    def matrix(self) -> np.ndarray:
        sigma = _AXIS_MATRICES[self.kind[0]]
        two = np.kron(sigma, sigma)
        return np.cos(self.angle) * np.eye(4) - 1j * np.sin(self.angle) * two

    def to_json_dict(self) -> dict:
        return {
            "gate": "entangler",
            "kind": self.kind,
            "angle": self.angle,
            "pair": list(self.pair),
            "gate_id": self.gate_id,
        }


Gate = Union[Rotation, Entangler]


def make_gate_id(kind: str, pair: tuple[int, int], angle: float) -> str:
    return f"{kind}_{pair[0]}-{pair[1]}_{angle:.10g}"


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over a fixed register."""

    qubit_count: int
    gates: tuple[Gate, ...] = field(default=())

    def __post_init__(self) -> None:
        for gate in self.gates:
            qubits = gate.pair if isinstance(gate, Entangler) else (gate.qubit,)
            if any(q < 0 or q >= self.qubit_count for q in qubits):
                raise DimensionMismatch(f"gate {gate} out of range for {self.qubit_count} qubits")

    @property
    def entanglers(self) -> tuple[Entangler, ...]:
        return tuple(g for g in self.gates if isinstance(g, Entangler))

    def unitary(self) -> np.ndarray:
        """Full 2^n unitary of the gate list (first gate applied first)."""
        from .simulate import gate_unitary_full

        dim = 2**self.qubit_count
        out = np.eye(dim, dtype=complex)
        for gate in self.gates:
            out = gate_unitary_full(gate, self.qubit_count) @ out
        return out

    def to_json_dict(self) -> dict:
        return {
            "qubit_count": self.qubit_count,
            "gates": [g.to_json_dict() for g in self.gates],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Circuit":
        gates: list[Gate] = []
        for g in data["gates"]:
            if g["gate"] == "rotation":
                gates.append(Rotation(g["axis"], float(g["angle"]), int(g["qubit"])))
            elif g["gate"] == "entangler":
                gates.append(
                    Entangler(
                        g["kind"], float(g["angle"]), tuple(g["pair"]), g.get("gate_id", "")
                    )
                )
            else:
                raise UnknownGateKind(f"unknown gate record {g!r}")
        return cls(int(data["qubit_count"]), tuple(gates))


def trotter_circuit(hamiltonian: PauliHamiltonian, total_time: float, steps: int) -> Circuit:
    """First-order product circuit with ``steps`` identical blocks.

    Within a block the x-part terms come first, then y, then z.  Two-body
    terms of coefficient c map to entanglers of angle c * dt and the single
    sz coefficients of one block merge into one z-rotation per qubit.
    """
    if steps < 1:
        raise InvalidSteps(f"steps must be >= 1, got {steps}")
    dt = total_time / steps
    n = hamiltonian.qubit_count

    block: list[Gate] = []
    for part in ("x", "y", "z"):
        z_merge: dict[int, float] = {}
        for term in hamiltonian.part(part):
            support = [q for q, ch in enumerate(term.pauli.labels) if ch != "I"]
            if len(support) == 2:
                kind = term.pauli.labels[support[0]].lower() * 2
                block.append(
                    Entangler(kind, term.coefficient * dt, (support[0], support[1]))
                )
            elif len(support) == 1 and term.pauli.labels[support[0]] == "Z":
                z_merge[support[0]] = z_merge.get(support[0], 0.0) + term.coefficient
            else:
                raise UnknownGateKind(f"cannot compile term {term.pauli}")
        for qubit in sorted(z_merge):
            block.append(Rotation("z", 2.0 * z_merge[qubit] * dt, qubit))

    return Circuit(n, tuple(block) * steps)


_CONJUGATIONS = {
    # flavor -> axis whose quarter rotations map it onto the yy entangler
    "xx": "z",
    "zz": "x",
}


def compile_to_native(circuit: Circuit) -> Circuit:
    """Rewrite every entangler onto the native yy flavor.

    xx gates become (quarter z, quarter z) . yy . (inverse quarters) and zz
    gates the same with quarter x rotations; the circuit unitary is
    unchanged up to global phase.
    """
    gates: list[Gate] = []
    for gate in circuit.gates:
        if isinstance(gate, Rotation) or gate.kind == "yy":
            gates.append(gate)
            continue
        axis = _CONJUGATIONS.get(gate.kind)
        if axis is None:
            raise UnknownGateKind(f"cannot compile entangler kind {gate.kind!r}")
        m, n = gate.pair
        gates.append(Rotation(axis, np.pi / 2, m))
        gates.append(Rotation(axis, np.pi / 2, n))
        gates.append(Entangler("yy", gate.angle, gate.pair))
        gates.append(Rotation(axis, -np.pi / 2, m))
        gates.append(Rotation(axis, -np.pi / 2, n))
    return Circuit(circuit.qubit_count, tuple(gates))


def circuit_prefix(circuit: Circuit, steps_done: int, total_steps: int) -> Circuit:
    """First ``steps_done`` of ``total_steps`` identical blocks."""
    if total_steps < 1 or not 0 <= steps_done <= total_steps:
        raise InvalidSteps(f"invalid prefix {steps_done}/{total_steps}")
    if len(circuit.gates) % total_steps:
        raise InvalidSteps("gate count is not an integer number of blocks")
    per_block = len(circuit.gates) // total_steps
    return replace(circuit, gates=circuit.gates[: per_block * steps_done])


def distinct_entanglers(circuit: Circuit) -> list[Entangler]:
    """One representative per gate_id, in first-appearance order."""
    seen: dict[str, Entangler] = {}
    for gate in circuit.entanglers:
        seen.setdefault(gate.gate_id, gate)
    return list(seen.values())


def basis_labels(qubit_count: int) -> list[str]:
    return [format(i, f"0{qubit_count}b") for i in range(2**qubit_count)]


def state_from_labels(labels: Iterable[str], qubit_count: int) -> np.ndarray:
    """Equal-amplitude superposition of computational basis labels."""
    psi = np.zeros(2**qubit_count, dtype=complex)
    for label in labels:
        if len(label) != qubit_count or any(c not in "01" for c in label):
            raise DimensionMismatch(f"bad basis label {label!r}")
        psi[int(label, 2)] += 1.0
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise DimensionMismatch("no labels given")
    return psi / norm
