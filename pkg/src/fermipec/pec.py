"""Signed Monte-Carlo cancellation of characterized gate errors.

Each noisy entangler is followed by a Pauli operation drawn from its
inverse-error quasi-probability distribution.  A sampled circuit carries the
product of the drawn coefficient signs; averaging the signed observable
values and multiplying by the total cost ``C`` (product of per-gate costs)
gives an unbiased estimate of the noiseless expectation:

    <mu> = (C / N_s) * sum_s sgn_s <mu>_s.

Inserted Paulis are treated as noiseless, which on hardware is justified by
single-qubit operations being far cleaner than entanglers.

Sampling is counter-style deterministic: the insertion for sample ``s`` is
row ``s`` of a uniform block generated from ``master_seed`` alone, so any
evaluation order, restart or parallel split reproduces the same circuits,
and per-sample shot noise comes from generators keyed on the sample index.
Two exact oracles live alongside the sampler: dense composition of the
inverse-error matrices (any size), and full enumeration of all ``16**N_g``
insertion tuples (tiny circuits only).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .characterize import QuasiProbDecomposition, inverse_error_ptm, _decomposition_table
from .errors import (
    InvalidObservable,
    MissingDecomposition,
    TooManyGates,
)
from .hubbard import Circuit, basis_labels
from .simulate import (
    NoiseModel,
    PauliVector,
    PtmProgram,
    ShotCounts,
    clip_to_simplex,
    compile_ptm_program,
    populations_from_pauli_vector,
    run_ideal,
    run_ptm_program,
    sample_shots,
)
from .pauli import label_to_index

# Seed-stream namespaces; fixed so derived generators never collide.
_INSERTION_STREAM = 101
_SHOT_STREAM = 202


def observable_kind(label: str) -> str:
    if label and all(c in "01" for c in label):
        return "population"
    if label and all(c in "IXYZ" for c in label):
        return "pauli"
    raise InvalidObservable(f"observable {label!r} is neither a basis label nor a Pauli string")


def evaluate_observables(
    vector: PauliVector,
    observables: Sequence[str],
    shots: int,
    rng: np.random.Generator | None,
    readout: NoiseModel | None = None,
) -> tuple[np.ndarray, ShotCounts | None]:
    """Exact (shots = 0) or finite-shot observable values on one state.

    All basis projectors share a single multinomial draw; Pauli strings draw
    independent parity outcomes.  A noise model with confusion matrices
    corrupts the sampled distribution and the inverse is applied to the
    measured frequencies, mirroring detection-error correction.
    """
    from .simulate import apply_readout_error

    populations = populations_from_pauli_vector(vector)
    n = vector.qubit_count
    counts: ShotCounts | None = None
    values = np.empty(len(observables))
    if shots > 0:
        if rng is None:
            raise ValueError("finite-shot evaluation needs a generator")
        visible = populations
        if readout is not None and readout.readout is not None:
            visible = apply_readout_error(populations, readout, "corrupt")
        probs, clipped = clip_to_simplex(visible)
        draw = rng.multinomial(shots, probs)
        labels = basis_labels(n)
        counts = ShotCounts(
            shots, {labels[i]: int(c) for i, c in enumerate(draw) if c}, clipped
        )
        frequencies = draw / shots
        if readout is not None and readout.readout is not None:
            frequencies = apply_readout_error(frequencies, readout, "correct")
    for k, label in enumerate(observables):
        kind = observable_kind(label)
        if kind == "population":
            if len(label) != n:
                raise InvalidObservable(f"label {label!r} has wrong width")
            index = int(label, 2)
            values[k] = frequencies[index] if shots > 0 else populations[index]
        else:
            if len(label) != n:
                raise InvalidObservable(f"Pauli {label!r} has wrong width")
            expectation = vector.coefficients[label_to_index(label)]
            if shots > 0:
                prob_plus = 0.5 * (1.0 + np.clip(expectation, -1.0, 1.0))
                plus = rng.binomial(shots, prob_plus)
                values[k] = 2.0 * plus / shots - 1.0
            else:
                values[k] = expectation
    return values, counts


@dataclass(frozen=True)
class SampledCircuit:
    """One random-insertion instance of a base circuit."""

    base: Circuit
    insertions: tuple[int, ...]
    sign: int
    master_seed: int
    sample_index: int


@dataclass(frozen=True)
class PecEstimate:
    observable: str
    value: float
    sample_count: int
    shot_count: int
    standard_error: float
    cost: float

    def to_json_dict(self) -> dict:
        return {
            "observable": self.observable,
            "value": self.value,
            "sample_count": self.sample_count,
            "shot_count": self.shot_count,
            "standard_error": self.standard_error,
            "cost": self.cost,
        }


@dataclass(frozen=True)
class PecSampleRecord:
    """Per-sample payload kept for resampling and streaming."""

    sample_index: int
    insertions: tuple[int, ...]
    sign: int
    values: np.ndarray = field(repr=False)
    counts: ShotCounts | None = None

    def to_json_dict(self) -> dict:
        return {
            "sample_index": self.sample_index,
            "insertions": list(self.insertions),
            "sign": self.sign,
            "values": [float(v) for v in self.values],
            "counts": self.counts.to_json_dict() if self.counts else None,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "PecSampleRecord":
        counts = data.get("counts")
        return cls(
            sample_index=int(data["sample_index"]),
            insertions=tuple(int(i) for i in data["insertions"]),
            sign=int(data["sign"]),
            values=np.array(data["values"], dtype=float),
            counts=ShotCounts.from_json_dict(counts) if counts else None,
        )


def _gate_distributions(
    program: PtmProgram,
    decomps: Mapping[str, QuasiProbDecomposition] | Sequence[QuasiProbDecomposition],
) -> list[QuasiProbDecomposition]:
    table = _decomposition_table(decomps)
    out = []
    for gate_id in program.slot_gate_ids:
        if gate_id not in table:
            raise MissingDecomposition(f"no decomposition for gate {gate_id!r}")
        out.append(table[gate_id])
    return out


def insertion_block(master_seed: int, sample_count: int, gate_count: int) -> np.ndarray:
    """Uniform variates; row s depends only on (master_seed, s, gate_count)."""
    rng = np.random.default_rng([master_seed, _INSERTION_STREAM])
    return rng.random((sample_count, gate_count))

def _draw_insertions(uniforms: np.ndarray, decomps: Sequence[QuasiProbDecomposition]) -> np.ndarray:
    indices = np.empty(len(decomps), dtype=np.int64)
    for g, decomp in enumerate(decomps):
        cumulative = np.cumsum(decomp.probabilities)
        indices[g] = min(int(np.searchsorted(cumulative, uniforms[g], side="right")), 15)
    return indices


def sample_circuit(
    base: Circuit,
    decomps: Mapping[str, QuasiProbDecomposition] | Sequence[QuasiProbDecomposition],
    master_seed: int,
    sample_index: int,
) -> SampledCircuit:
    """Deterministic random-insertion instance for one sample index."""
    program = compile_ptm_program(base, NoiseModel.ideal())
    distributions = _gate_distributions(program, decomps)
    uniforms = insertion_block(master_seed, sample_index + 1, len(distributions))[sample_index]
    indices = _draw_insertions(uniforms, distributions)
    sign = _insertion_sign(distributions, indices)
    return SampledCircuit(base, tuple(int(i) for i in indices), sign, master_seed, sample_index)


def _insertion_sign(distributions: Sequence[QuasiProbDecomposition], indices) -> int:
    sign = 1
    for g, i in enumerate(indices):
        sign *= int(distributions[g].signs[i])
    return sign


def collect_sample_records(
    base: Circuit,
    noise: NoiseModel,
    decomps: Mapping[str, QuasiProbDecomposition] | Sequence[QuasiProbDecomposition],
    observables: Sequence[str],
    initial: np.ndarray,
    sample_count: int,
    shots: int,
    master_seed: int,
) -> list[PecSampleRecord]:
    """Simulate every sampled circuit and keep the per-sample values.

    With ``shots = 0`` the per-sample expectations are exact and identical
    insertion tuples are evaluated once.
    """
    program = compile_ptm_program(base, noise)
    distributions = _gate_distributions(program, decomps)
    uniforms = insertion_block(master_seed, sample_count, len(distributions))
    start = PauliVector.from_state(initial)

    cache: dict[tuple[int, ...], np.ndarray] = {}
    records: list[PecSampleRecord] = []
    for s in range(sample_count):
        indices = _draw_insertions(uniforms[s], distributions)
        key = tuple(int(i) for i in indices)
        sign = _insertion_sign(distributions, indices)
        if shots == 0:
            if key not in cache:
                vector = run_ptm_program(program, start, insertions=key)
                cache[key], _ = evaluate_observables(vector, observables, 0, None)
            values, counts = cache[key], None
        else:
            vector = run_ptm_program(program, start, insertions=key)
            rng = np.random.default_rng([master_seed, _SHOT_STREAM, s])
            values, counts = evaluate_observables(vector, observables, shots, rng, readout=noise)
        records.append(PecSampleRecord(s, key, sign, values, counts))
    return records


def combine_records(
    records: Sequence[PecSampleRecord], cost: float
) -> tuple[np.ndarray, np.ndarray]:
    """Cost-weighted signed mean and its standard error, in fixed order."""
    signed = np.array([r.sign * r.values for r in records])
    mean = cost * signed.mean(axis=0)
    if len(records) > 1:
        stderr = cost * signed.std(axis=0, ddof=1) / np.sqrt(len(records))
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr


def estimate(
    base: Circuit,
    noise: NoiseModel,
    decomps: Mapping[str, QuasiProbDecomposition] | Sequence[QuasiProbDecomposition],
    observables: Sequence[str],
    sample_count: int,
    shots: int,
    master_seed: int,
    initial: np.ndarray | None = None,
) -> list[PecEstimate]:
    """Error-cancelled expectations of the observables; shots = 0 is exact."""
    if sample_count < 1:
        raise TooManyGates("sample_count must be >= 1")
    if initial is None:
        initial = _default_initial(base)
    records = collect_sample_records(
        base, noise, decomps, observables, initial, sample_count, shots, master_seed
    )
    from .characterize import circuit_cost

    cost = circuit_cost(decomps, base)
    values, errors = combine_records(records, cost)
    return [
        PecEstimate(label, float(values[k]), sample_count, shots, float(errors[k]), cost)
        for k, label in enumerate(observables)
    ]


def _default_initial(base: Circuit) -> np.ndarray:
    psi = np.zeros(2**base.qubit_count, dtype=complex)
    psi[0] = 1.0
    return psi


def pec_exact_oracle(
    base: Circuit,
    noise: NoiseModel,
    decomps: Mapping[str, QuasiProbDecomposition] | Sequence[QuasiProbDecomposition],
    initial: np.ndarray,
) -> np.ndarray:
    """Populations with every inverse error composed exactly after its gate.

    When the decompositions were computed from the true injected channels the
    cancellation is algebraic and the result equals the noiseless run.
    """
    program = compile_ptm_program(base, noise)
    distributions = _gate_distributions(program, decomps)
    corrections = [inverse_error_ptm(d).entries for d in distributions]
    vector = run_ptm_program(
        program, PauliVector.from_state(initial), corrections=corrections
    )
    return populations_from_pauli_vector(vector)


def enumerate_exact(
    base: Circuit,
    noise: NoiseModel,
    decomps: Mapping[str, QuasiProbDecomposition] | Sequence[QuasiProbDecomposition],
    observable: str,
    initial: np.ndarray,
) -> float:
    """Full quasi-probability sum over all insertion tuples; N_g <= 2 only."""
    program = compile_ptm_program(base, noise)
    distributions = _gate_distributions(program, decomps)
    gate_count = len(distributions)
    if gate_count > 2:
        raise TooManyGates(f"enumeration over 16**{gate_count} circuits refused")
    start = PauliVector.from_state(initial)

    def recurse(position: int, key: tuple[int, ...], weight: float) -> float:
        if weight == 0.0:
            return 0.0
        if position == gate_count:
            vector = run_ptm_program(program, start, insertions=key)
            values, _ = evaluate_observables(vector, [observable], 0, None)
            return weight * float(values[0])
        total = 0.0
        for i in range(16):
            total += recurse(
                position + 1, key + (i,), weight * distributions[position].coefficients[i]
            )
        return total

    return recurse(0, (), 1.0)
