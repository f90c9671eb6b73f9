"""End-to-end experiment orchestration and artifact emission.

A run builds the chain Hamiltonian, Trotterizes it at the configured angle,
compiles to the native entangler, characterizes every distinct gate,
decomposes the inverse errors, and then walks the Trotter steps.  Step ``k``
is measured on the prefix circuit holding the first ``k`` identical blocks,
which in software is exact.  Each step produces raw (noisy, sampled)
populations and the mitigation chain: signed-sampling estimate, simplex
projection, symmetry post-selection.  Bootstrap replicates resample the
per-circuit measurement records pool-by-pool and rerun the chain, giving
error bars on populations, fidelities, decay fits and spin/charge series.

Artifacts land under one output directory: JSON for configs, gate data and
summaries, one JSON-lines stream of per-sample records per step, delimited
tables for everything plotted, and rendered figures next to them.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .characterize import (
    GateCharacterization,
    QuasiProbDecomposition,
    characterize_gate,
    circuit_cost,
    decomposition_from_characterization,
)
from .errors import ConfigError, InsufficientData
from .hubbard import (
    Circuit,
    HubbardSpec,
    basis_labels,
    build_hamiltonian,
    circuit_prefix,
    compile_to_native,
    distinct_entanglers,
    state_from_labels,
    trotter_circuit,
)
from .pauli import PauliChannel
from .pec import PecSampleRecord, collect_sample_records, combine_records
from .postproc import (
    BootstrapBars,
    PopulationRecord,
    SymmetrySector,
    bootstrap_joint,
    fit_fidelity_per_gate,
    mle_project,
    population_fidelity,
    post_select,
    spin_charge,
)
from .simulate import (
    NoiseModel,
    PauliVector,
    ShotCounts,
    apply_readout_error,
    calibrate_channel,
    clip_to_simplex,
    named_channel,
    populations_from_pauli_vector,
    run_ideal,
    run_noisy_ptm,
    sample_shots,
)

MITIGATED_STAGES = ("pec", "mle", "ps")
_RAW_STREAM = 7


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrotterConfig:
    steps: int
    angle: float  # entangler angle of the hopping terms, J * dt / 2


@dataclass(frozen=True)
class PecConfig:
    samples: int = 1000
    shots: int = 300
    master_seed: int = 11


@dataclass(frozen=True)
class CharacterizationConfig:
    shots_per_setting: int = 3000
    seed: int = 101
    exact_mode: bool = True


@dataclass(frozen=True)
class PostConfig:
    mle: bool = True
    post_select: bool = True
    bootstrap_replicates: int = 1000
    bootstrap_seed: int = 5


@dataclass(frozen=True)
class NoiseConfig:
    """Named channel per gate pair; ``default`` covers unlisted pairs."""

    default: Mapping | None = None
    per_pair: Mapping[str, Mapping] = field(default_factory=dict)
    readout: Mapping | None = None
    crosstalk: Mapping | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: HubbardSpec
    trotter: TrotterConfig
    initial_state: tuple
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    pec: PecConfig = field(default_factory=PecConfig)
    characterization: CharacterizationConfig = field(default_factory=CharacterizationConfig)
    post: PostConfig = field(default_factory=PostConfig)

    def initial_vector(self) -> np.ndarray:
        n = self.model.qubit_count
        state = self.initial_state
        if all(isinstance(x, str) for x in state):
            return state_from_labels(state, n)
        psi = np.asarray(state, dtype=complex)
        if psi.size != 2**n:
            raise ConfigError(f"initial_state: expected {2**n} amplitudes, got {psi.size}")
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise ConfigError("initial_state: zero vector")
        return psi / norm

    def total_time(self) -> float:
        # angle = J * dt / 2 fixes the step length.
        dt = 2.0 * self.trotter.angle / self.model.tunneling
        return dt * self.trotter.steps

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model.to_json_dict(),
            "trotter": {"steps": self.trotter.steps, "angle": self.trotter.angle},
            "initial_state": list(self.initial_state),
            "noise": {
                "default": dict(self.noise.default) if self.noise.default else None,
                "per_pair": {k: dict(v) for k, v in self.noise.per_pair.items()},
                "readout": dict(self.noise.readout) if self.noise.readout else None,
                "crosstalk": dict(self.noise.crosstalk) if self.noise.crosstalk else None,
            },
            "pec": asdict(self.pec),
            "characterization": asdict(self.characterization),
            "post": asdict(self.post),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "ExperimentConfig":
        def section(name, required=True):
            value = data.get(name)
            if value is None:
                if required:
                    raise ConfigError(f"{name}: section missing")
                return {}
            if not isinstance(value, Mapping):
                raise ConfigError(f"{name}: expected an object")
            return value

        try:
            model = HubbardSpec.from_json_dict(section("model"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from exc
        trotter = section("trotter")
        try:
            trotter_cfg = TrotterConfig(int(trotter["steps"]), float(trotter["angle"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"trotter: {exc}") from exc
        if trotter_cfg.steps < 1:
            raise ConfigError("trotter.steps: must be >= 1")
        initial = data.get("initial_state")
        if not isinstance(initial, (list, tuple)) or not initial:
            raise ConfigError("initial_state: expected a nonempty list")
        noise = section("noise", required=False)
        pec = section("pec", required=False)
        char = section("characterization", required=False)
        post = section("post", required=False)
        try:
            config = cls(
                name=str(data.get("name", "custom")),
                model=model,
                trotter=trotter_cfg,
                initial_state=tuple(initial),
                noise=NoiseConfig(
                    default=noise.get("default"),
                    per_pair=dict(noise.get("per_pair", {})),
                    readout=noise.get("readout"),
                    crosstalk=noise.get("crosstalk"),
                ),
                pec=PecConfig(**pec) if pec else PecConfig(),
                characterization=CharacterizationConfig(**char) if char else CharacterizationConfig(),
                post=PostConfig(**post) if post else PostConfig(),
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        config.initial_vector()  # validates labels/amplitudes
        return config


def _channel_from_spec(spec: Mapping | None) -> PauliChannel | None:
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind in (None, "none"):
        return None
    qubit_count = int(spec.get("qubit_count", 2))
    if "average_gate_fidelity" in spec:
        return calibrate_channel(kind, float(spec["average_gate_fidelity"]), qubit_count)
    if kind == "pauli":
        return named_channel(kind, qubit_count, weights=spec["weights"])
    return named_channel(kind, qubit_count, p=float(spec["p"]))


def build_noise_model(config: ExperimentConfig) -> NoiseModel:
    per_gate: dict[str, PauliChannel] = {}
    default = _channel_from_spec(config.noise.default)
    per_gate["default"] = default if default is not None else PauliChannel.identity(2)
    for pair_key, spec in config.noise.per_pair.items():
        channel = _channel_from_spec(spec)
        if channel is None:
            channel = PauliChannel.identity(2)
        per_gate[pair_key] = channel
    readout = None
    if config.noise.readout is not None:
        p01 = float(config.noise.readout.get("p0_to_1", 0.0))
        p10 = float(config.noise.readout.get("p1_to_0", 0.0))
        mat = np.array([[1 - p01, p10], [p01, 1 - p10]])
        readout = tuple(mat.copy() for _ in range(config.model.qubit_count))
    crosstalk = None
    if config.noise.crosstalk is not None:
        spec = dict(config.noise.crosstalk)
        spec.setdefault("qubit_count", 1)
        crosstalk = _channel_from_spec(spec)
    return NoiseModel(per_gate=per_gate, readout=readout, crosstalk=crosstalk)


# ---------------------------------------------------------------------------
# Presets reproducing the benchmarked parameter sets
# ---------------------------------------------------------------------------


def _preset(
    name: str,
    model: HubbardSpec,
    steps: int,
    angle: float,
    initial: tuple[str, ...],
    samples: int,
    pair_fidelities: Mapping[str, float],
) -> ExperimentConfig:
    per_pair = {
        pair: {"kind": "depolarizing", "average_gate_fidelity": favg}
        for pair, favg in pair_fidelities.items()
    }
    return ExperimentConfig(
        name=name,
        model=model,
        trotter=TrotterConfig(steps, angle),
        initial_state=initial,
        noise=NoiseConfig(per_pair=per_pair),
        pec=PecConfig(samples=samples, shots=300, master_seed=11),
    )


def preset(name: str) -> ExperimentConfig:
    builders = {
        "two_spinless": lambda: _preset(
            "two_spinless",
            HubbardSpec(sites=2, components="one", tunneling=1.0, neighbor=2.0),
            steps=8,
            angle=np.pi / 4,
            initial=("11", "10"),
            samples=1000,
            pair_fidelities={"0-1": 0.9811},
        ),
        "three_spinless_v0": lambda: _preset(
            "three_spinless_v0",
            HubbardSpec(sites=3, components="one", tunneling=1.0, neighbor=0.0),
            steps=4,
            angle=np.pi / 8,
            initial=("101", "110"),
            samples=1500,
            pair_fidelities={"0-1": 0.9779, "1-2": 0.9748},
        ),
        "three_spinless_v2": lambda: _preset(
            "three_spinless_v2",
            HubbardSpec(sites=3, components="one", tunneling=1.0, neighbor=2.0),
            steps=4,
            angle=np.pi / 8,
            initial=("101", "110"),
            samples=1500,
            pair_fidelities={"0-1": 0.9779, "1-2": 0.9748},
        ),
        "two_site_spinful_u0": lambda: _preset(
            "two_site_spinful_u0",
            HubbardSpec(sites=2, components="two", tunneling=1.0, onsite=0.0),
            steps=4,
            angle=np.pi / 8,
            initial=("1001", "1010"),
            samples=2000,
            pair_fidelities={"0-1": 0.9755, "2-3": 0.9706, "0-2": 0.9720, "1-3": 0.9744},
        ),
        "two_site_spinful_u2": lambda: _preset(
            "two_site_spinful_u2",
            HubbardSpec(sites=2, components="two", tunneling=1.0, onsite=2.0),
            steps=4,
            angle=np.pi / 8,
            initial=("1001", "1010"),
            samples=2000,
            pair_fidelities={"0-1": 0.9755, "2-3": 0.9706, "0-2": 0.9720, "1-3": 0.9744},
        ),
    }
    if name not in builders:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(builders))}")
    return builders[name]()


def preset_names() -> list[str]:
    return [
        "two_spinless",
        "three_spinless_v0",
        "three_spinless_v2",
        "two_site_spinful_u0",
        "two_site_spinful_u2",
    ]


# ---------------------------------------------------------------------------
# Simulation phase
# ---------------------------------------------------------------------------


@dataclass
class StepData:
    step: int
    ideal: np.ndarray
    model_populations: np.ndarray  # straight noisy transfer-matrix walk
    raw_counts: ShotCounts | None
    raw: np.ndarray
    records: list[PecSampleRecord]
    cost: float


@dataclass
class ResultBundle:
    config: ExperimentConfig
    circuit: Circuit
    sector: SymmetrySector
    gates_per_step: int
    characterizations: dict[str, GateCharacterization]
    decompositions: dict[str, QuasiProbDecomposition]
    steps: list[StepData]
    stages: dict[str, list[np.ndarray]] = field(default_factory=dict)
    stage_errors: dict[str, list[tuple[np.ndarray, np.ndarray]]] = field(default_factory=dict)
    fidelity: dict[str, list[float]] = field(default_factory=dict)
    fidelity_bars: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    fits: dict[str, tuple[float, float]] = field(default_factory=dict)
    fit_bars: dict[str, tuple[float, float]] = field(default_factory=dict)
    spin_charge_series: dict[str, np.ndarray] = field(default_factory=dict)
    leakage: list[float] = field(default_factory=list)

    @property
    def step_count(self) -> int:
        return self.config.trotter.steps

    def cost_summary(self) -> dict:
        per_gate = {gid: d.cost for gid, d in sorted(self.decompositions.items())}
        return {
            "per_gate": per_gate,
            "per_step": [s.cost for s in self.steps],
            "full_circuit": self.steps[-1].cost if self.steps else 1.0,
        }


def _step_seed(master: int, step: int) -> int:
    return master * 100003 + step


def characterize_circuit(
    circuit: Circuit, noise: NoiseModel, config: CharacterizationConfig
) -> dict[str, GateCharacterization]:
    shots = 0 if config.exact_mode else config.shots_per_setting
    out: dict[str, GateCharacterization] = {}
    for index, gate in enumerate(distinct_entanglers(circuit)):
        out[gate.gate_id] = characterize_gate(gate, noise, shots, config.seed + index)
    return out


def simulate_experiment(config: ExperimentConfig, noise: NoiseModel | None = None) -> ResultBundle:
    """Run the measurement phase: characterization plus per-step sampling."""
    if noise is None:
        noise = build_noise_model(config)
    hamiltonian = build_hamiltonian(config.model)
    base = trotter_circuit(hamiltonian, config.total_time(), config.trotter.steps)
    circuit = compile_to_native(base)
    psi0 = config.initial_vector()
    sector = SymmetrySector.from_state(psi0, config.model.components)
    labels = basis_labels(config.model.qubit_count)

    characterizations = characterize_circuit(circuit, noise, config.characterization)
    decompositions = {
        gid: decomposition_from_characterization(char)
        for gid, char in characterizations.items()
    }

    steps: list[StepData] = []
    shots = config.pec.shots
    for k in range(config.trotter.steps + 1):
        prefix = circuit_prefix(circuit, k, config.trotter.steps)
        ideal = run_ideal(prefix, psi0)
        model_pops = populations_from_pauli_vector(
            run_noisy_ptm(prefix, noise, PauliVector.from_state(psi0))
        )
        if shots > 0:
            visible = apply_readout_error(model_pops, noise, "corrupt")
            counts = sample_shots(visible, shots, [config.pec.master_seed, _RAW_STREAM, k])
            raw = apply_readout_error(counts.frequencies(config.model.qubit_count), noise, "correct")
        else:
            counts = None
            raw = model_pops.copy()
        records = collect_sample_records(
            prefix,
            noise,
            decompositions,
            labels,
            psi0,
            config.pec.samples,
            shots,
            _step_seed(config.pec.master_seed, k),
        )
        cost = circuit_cost(decompositions, prefix)
        steps.append(StepData(k, ideal, model_pops, counts, raw, records, cost))

    gates_per_step = len(circuit.entanglers) // config.trotter.steps
    return ResultBundle(
        config=config,
        circuit=circuit,
        sector=sector,
        gates_per_step=gates_per_step,
        characterizations=characterizations,
        decompositions=decompositions,
        steps=steps,
    )


# ---------------------------------------------------------------------------
# Mitigation phase
# ---------------------------------------------------------------------------


def _stage_chain(
    pec_values: np.ndarray, sector: SymmetrySector, post: PostConfig
) -> tuple[np.ndarray, np.ndarray, float]:
    if post.mle:
        projected = mle_project(pec_values)
    else:
        projected, _ = clip_to_simplex(pec_values)
    if post.post_select:
        selected, leakage = post_select(projected, sector)
    else:
        selected, leakage = projected, 0.0
    return projected, selected, leakage


def _mitigation_outputs(
    bundle: ResultBundle,
    raw_per_step: Sequence[np.ndarray],
    records_per_step: Sequence[Sequence[PecSampleRecord]],
) -> dict[str, np.ndarray]:
    """Every bootstrapped quantity from one (possibly resampled) data set."""
    config = bundle.config
    out: dict[str, np.ndarray] = {}
    stage_pops = {stage: [] for stage in ("raw",) + MITIGATED_STAGES}
    for k, step in enumerate(bundle.steps):
        pec_values, _ = combine_records(records_per_step[k], step.cost)
        projected, selected, _ = _stage_chain(pec_values, bundle.sector, config.post)
        stage_pops["raw"].append(raw_per_step[k])
        stage_pops["pec"].append(pec_values)
        stage_pops["mle"].append(projected)
        stage_pops["ps"].append(selected)
    for stage, series in stage_pops.items():
        out[f"pop_{stage}"] = np.stack(series)
        out[f"fid_{stage}"] = np.array(
            [
                population_fidelity(series[k], bundle.steps[k].ideal)
                for k in range(len(series))
            ]
        )
    out["fid_pec_unnormalized"] = np.array(
        [
            population_fidelity(stage_pops["pec"][k], bundle.steps[k].ideal, normalized=False)
            for k in range(len(bundle.steps))
        ]
    )
    for stage in ("raw", "ps"):
        try:
            factor, _ = fit_fidelity_per_gate(out[f"fid_{stage}"], bundle.gates_per_step)
        except Exception:
            factor = float("nan")
        out[f"fit_{stage}"] = np.array([factor])
    if config.model.components == "two":
        for stage in ("raw", "ps"):
            series = np.array(
                [
                    [spin_charge(np.clip(stage_pops[stage][k], 0, None), site)
                     for site in range(config.model.sites)]
                    for k in range(len(bundle.steps))
                ]
            )
            out[f"spin_charge_{stage}"] = series
    return out


def _raw_outcome_pool(step: StepData) -> list[int]:
    if step.raw_counts is None:
        return [-1]  # exact mode: a single degenerate record
    pool: list[int] = []
    for label, count in sorted(step.raw_counts.counts.items()):
        pool.extend([int(label, 2)] * count)
    return pool


def _raw_from_pool(step: StepData, pool: Sequence[int], qubit_count: int, noise: NoiseModel) -> np.ndarray:
    if step.raw_counts is None:
        return step.raw
    vector = np.bincount(np.array(pool), minlength=2**qubit_count).astype(float)
    return apply_readout_error(vector / len(pool), noise, "correct")


def mitigate(bundle: ResultBundle, noise: NoiseModel | None = None) -> ResultBundle:
    """Attach mitigated stages, fidelities, fits and bootstrap bars."""
    config = bundle.config
    if noise is None:
        noise = build_noise_model(config)
    n = config.model.qubit_count
    raw = [s.raw for s in bundle.steps]
    records = [s.records for s in bundle.steps]
    point = _mitigation_outputs(bundle, raw, records)

    for stage in ("raw",) + MITIGATED_STAGES:
        bundle.stages[stage] = list(point[f"pop_{stage}"])
        bundle.fidelity[stage] = [float(x) for x in point[f"fid_{stage}"]]
    bundle.fidelity["pec_unnormalized"] = [float(x) for x in point["fid_pec_unnormalized"]]
    bundle.leakage = []
    for k, step in enumerate(bundle.steps):
        pec_values = bundle.stages["pec"][k]
        _, _, leakage = _stage_chain(pec_values, bundle.sector, config.post)
        bundle.leakage.append(leakage)
    for stage in ("raw",) + MITIGATED_STAGES:
        values = bundle.fidelity[stage]
        try:
            bundle.fits[stage] = fit_fidelity_per_gate(values, bundle.gates_per_step)
        except Exception:
            bundle.fits[stage] = (float("nan"), float("nan"))
    if config.model.components == "two":
        for stage in ("raw", "ps"):
            bundle.spin_charge_series[stage] = point[f"spin_charge_{stage}"]
        bundle.spin_charge_series["ideal"] = np.array(
            [
                [spin_charge(step.ideal, site) for site in range(config.model.sites)]
                for step in bundle.steps
            ]
        )

    replicates = config.post.bootstrap_replicates
    if replicates >= 100:
        pools: dict[str, Sequence] = {}
        for k, step in enumerate(bundle.steps):
            pools[f"raw_{k}"] = _raw_outcome_pool(step)
            pools[f"pec_{k}"] = list(step.records)

        def pipeline(parts: Mapping[str, Sequence]) -> Mapping[str, np.ndarray]:
            raw_series = [
                _raw_from_pool(bundle.steps[k], parts[f"raw_{k}"], n, noise)
                for k in range(len(bundle.steps))
            ]
            record_series = [parts[f"pec_{k}"] for k in range(len(bundle.steps))]
            return _mitigation_outputs(bundle, raw_series, record_series)

        bars = bootstrap_joint(pools, pipeline, replicates, config.post.bootstrap_seed)
        _attach_bars(bundle, bars)
    elif replicates != 0:
        raise InsufficientData(
            f"post.bootstrap_replicates must be 0 (off) or >= 100, got {replicates}"
        )
    else:
        zeros = [np.zeros(2**n) for _ in bundle.steps]
        for stage in ("raw",) + MITIGATED_STAGES:
            bundle.stage_errors[stage] = [(z, z) for z in zeros]
            bundle.fidelity_bars[stage] = [(0.0, 0.0) for _ in bundle.steps]
            bundle.fit_bars[stage] = (0.0, 0.0)
        bundle.fidelity_bars["pec_unnormalized"] = [(0.0, 0.0) for _ in bundle.steps]
    return bundle


def _attach_bars(bundle: ResultBundle, bars: Mapping[str, BootstrapBars]) -> None:
    for stage in ("raw",) + MITIGATED_STAGES:
        pop = bars[f"pop_{stage}"]
        bundle.stage_errors[stage] = [
            (pop.err_lo[k], pop.err_hi[k]) for k in range(len(bundle.steps))
        ]
        fid = bars[f"fid_{stage}"]
        bundle.fidelity_bars[stage] = [
            (float(fid.err_lo[k]), float(fid.err_hi[k])) for k in range(len(bundle.steps))
        ]
    fidu = bars["fid_pec_unnormalized"]
    bundle.fidelity_bars["pec_unnormalized"] = [
        (float(fidu.err_lo[k]), float(fidu.err_hi[k])) for k in range(len(bundle.steps))
    ]
    for stage in ("raw", "ps"):
        fit = bars[f"fit_{stage}"]
        bundle.fit_bars[stage] = (float(fit.err_lo[0]), float(fit.err_hi[0]))


def run_experiment(config: ExperimentConfig, noise: NoiseModel | None = None) -> ResultBundle:
    """Simulate, mitigate and summarise one configured experiment."""
    bundle = simulate_experiment(config, noise)
    return mitigate(bundle, noise)


def population_records(bundle: ResultBundle, stage: str) -> list[PopulationRecord]:
    records = []
    for k in range(len(bundle.steps)):
        if stage == "ideal":
            records.append(PopulationRecord.exact(k, "ideal", bundle.steps[k].ideal))
            continue
        if stage == "ptm_model":
            records.append(PopulationRecord.exact(k, "ptm_model", bundle.steps[k].model_populations))
            continue
        values = bundle.stages[stage][k]
        if bundle.stage_errors.get(stage):
            lo, hi = bundle.stage_errors[stage][k]
        else:
            lo = hi = np.zeros_like(values)
        records.append(PopulationRecord(k, stage, values, lo, hi))
    return records


# ---------------------------------------------------------------------------
# Artifact emission
# ---------------------------------------------------------------------------


def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_json_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_population_csv(path: Path, records: Sequence[PopulationRecord], qubit_count: int) -> None:
    labels = basis_labels(qubit_count)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "stage", "basis_label", "value", "err_lo", "err_hi"])
        for record in records:
            for i, label in enumerate(labels):
                writer.writerow(
                    [
                        record.step,
                        record.stage,
                        label,
                        repr(float(record.values[i])),
                        repr(float(record.err_lo[i])),
                        repr(float(record.err_hi[i])),
                    ]
                )


def read_population_csv(path: Path) -> dict[str, dict[int, dict[str, tuple[float, float, float]]]]:
    out: dict[str, dict[int, dict[str, tuple[float, float, float]]]] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            stage = out.setdefault(row["stage"], {})
            step = stage.setdefault(int(row["step"]), {})
            step[row["basis_label"]] = (
                float(row["value"]),
                float(row["err_lo"]),
                float(row["err_hi"]),
            )
    return out


def save_run_artifacts(bundle: ResultBundle, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    config = bundle.config
    _dump_json(out_dir / "config.json", config.to_json_dict())
    _dump_json(out_dir / "circuit.json", bundle.circuit.to_json_dict())
    _dump_json(out_dir / "sector.json", bundle.sector.to_json_dict())
    for gid, char in sorted(bundle.characterizations.items()):
        _dump_json(out_dir / f"characterization_{gid}.json", char.to_json_dict())
    for gid, decomp in sorted(bundle.decompositions.items()):
        _dump_json(out_dir / f"decomposition_{gid}.json", decomp.to_json_dict())
    _dump_json(out_dir / "costs.json", bundle.cost_summary())
    raw_counts = {
        str(step.step): step.raw_counts.to_json_dict() if step.raw_counts else None
        for step in bundle.steps
    }
    _dump_json(out_dir / "raw_counts.json", raw_counts)
    for step in bundle.steps:
        path = out_dir / f"samples_step{step.step}.jsonl"
        with path.open("w", encoding="utf-8") as handle:
            for record in step.records:
                handle.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")
    manifest = {
        "config_hash": _config_hash(config),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "seeds": {
            "pec_master": config.pec.master_seed,
            "characterization": config.characterization.seed,
            "bootstrap": config.post.bootstrap_seed,
        },
        "steps": config.trotter.steps,
        "qubit_count": config.model.qubit_count,
    }
    _dump_json(out_dir / "manifest.json", manifest)


def save_mitigated(bundle: ResultBundle, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    n = bundle.config.model.qubit_count
    write_population_csv(
        out_dir / "populations_ideal.csv", population_records(bundle, "ideal"), n
    )
    raw_records = population_records(bundle, "raw") + population_records(bundle, "ptm_model")
    write_population_csv(out_dir / "populations_raw.csv", raw_records, n)
    mitigated = []
    for stage in MITIGATED_STAGES:
        mitigated.extend(population_records(bundle, stage))
    write_population_csv(out_dir / "populations_mitigated.csv", mitigated, n)

    with (out_dir / "fidelity.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "stage", "value", "err_lo", "err_hi"])
        for stage, values in sorted(bundle.fidelity.items()):
            bars = bundle.fidelity_bars.get(stage)
            for k, value in enumerate(values):
                lo, hi = bars[k] if bars else (0.0, 0.0)
                writer.writerow([k, stage, repr(float(value)), repr(lo), repr(hi)])

    fits = {
        stage: {
            "per_gate_fidelity": fit[0],
            "fit_standard_error": fit[1],
            "bootstrap_err_lo": bundle.fit_bars.get(stage, (0.0, 0.0))[0],
            "bootstrap_err_hi": bundle.fit_bars.get(stage, (0.0, 0.0))[1],
        }
        for stage, fit in sorted(bundle.fits.items())
    }
    _dump_json(out_dir / "fidelity_fit.json", fits)
    _dump_json(out_dir / "leakage.json", {"per_step": bundle.leakage})

    if bundle.spin_charge_series:
        with (out_dir / "spin_charge.csv").open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["step", "stage", "site", "spin", "charge"])
            for stage, series in sorted(bundle.spin_charge_series.items()):
                for k in range(series.shape[0]):
                    for site in range(series.shape[1]):
                        writer.writerow(
                            [
                                k,
                                stage,
                                site,
                                repr(float(series[k, site, 0])),
                                repr(float(series[k, site, 1])),
                            ]
                        )


def render_report(out_dir: Path) -> list[Path]:
    """Render figures from the delimited outputs already in ``out_dir``."""
    from . import plots

    return plots.render_all(out_dir)


def load_step_records(out_dir: Path, step: int) -> list[PecSampleRecord]:
    path = out_dir / f"samples_step{step}.jsonl"
    records = []
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            records.append(PecSampleRecord.from_json_dict(json.loads(line)))
    return records


def rebuild_bundle(out_dir: Path) -> ResultBundle:
    """Reconstruct the measurement-phase bundle from saved artifacts."""
    config = ExperimentConfig.from_json_dict(
        json.loads((out_dir / "config.json").read_text(encoding="utf-8"))
    )
    noise = build_noise_model(config)
    hamiltonian = build_hamiltonian(config.model)
    circuit = compile_to_native(
        trotter_circuit(hamiltonian, config.total_time(), config.trotter.steps)
    )
    psi0 = config.initial_vector()
    sector = SymmetrySector.from_state(psi0, config.model.components)
    characterizations = {}
    decompositions = {}
    for path in sorted(out_dir.glob("characterization_*.json")):
        char = GateCharacterization.from_json_dict(json.loads(path.read_text(encoding="utf-8")))
        characterizations[char.gate_id] = char
    for path in sorted(out_dir.glob("decomposition_*.json")):
        decomp = QuasiProbDecomposition.from_json_dict(json.loads(path.read_text(encoding="utf-8")))
        decompositions[decomp.gate_id] = decomp
    raw_counts = json.loads((out_dir / "raw_counts.json").read_text(encoding="utf-8"))
    steps = []
    n = config.model.qubit_count
    for k in range(config.trotter.steps + 1):
        prefix = circuit_prefix(circuit, k, config.trotter.steps)
        ideal = run_ideal(prefix, psi0)
        model_pops = populations_from_pauli_vector(
            run_noisy_ptm(prefix, noise, PauliVector.from_state(psi0))
        )
        counts_payload = raw_counts[str(k)]
        counts = ShotCounts.from_json_dict(counts_payload) if counts_payload else None
        if counts is not None:
            raw = apply_readout_error(counts.frequencies(n), noise, "correct")
        else:
            raw = model_pops.copy()
        records = load_step_records(out_dir, k)
        cost = circuit_cost(decompositions, prefix)
        steps.append(StepData(k, ideal, model_pops, counts, raw, records, cost))
    gates_per_step = len(circuit.entanglers) // config.trotter.steps
    return ResultBundle(
        config=config,
        circuit=circuit,
        sector=sector,
        gates_per_step=gates_per_step,
        characterizations=characterizations,
        decompositions=decompositions,
        steps=steps,
    )
