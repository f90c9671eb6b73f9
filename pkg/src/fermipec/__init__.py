"""Quasi-probability error cancellation for Trotterized Fermi-Hubbard circuits."""

__version__ = "0.1.0"

from .errors import FermipecError
from .hubbard import (
    Circuit,
    Entangler,
    HubbardSpec,
    PauliHamiltonian,
    Rotation,
    build_hamiltonian,
    compile_to_native,
    exact_matrix,
    state_from_labels,
    trotter_circuit,
)
from .pauli import (
    PauliChannel,
    PauliString,
    Ptm,
    average_gate_fidelity,
    embed_two_qubit,
    pauli_channel_ptm,
    ptm_compose,
    ptm_from_unitary,
    ptm_inverse,
)
from .simulate import (
    NoiseModel,
    PauliVector,
    ShotCounts,
    apply_readout_error,
    calibrate_channel,
    evolve_exact,
    populations_from_pauli_vector,
    run_ideal,
    run_noisy_density,
    run_noisy_ptm,
    sample_shots,
)
from .characterize import (
    GateCharacterization,
    QuasiProbDecomposition,
    characterize_gate,
    circuit_cost,
    decompose_inverse,
    decomposition_from_characterization,
    error_operator,
)
from .pec import (
    PecEstimate,
    SampledCircuit,
    enumerate_exact,
    estimate,
    pec_exact_oracle,
    sample_circuit,
)
from .postproc import (
    PopulationRecord,
    SymmetrySector,
    bootstrap,
    fit_fidelity_per_gate,
    mle_project,
    population_fidelity,
    post_select,
    spin_charge,
)
from .experiment import (
    ExperimentConfig,
    ResultBundle,
    build_noise_model,
    preset,
    preset_names,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
