"""Exception hierarchy shared by all fermipec modules."""


class FermipecError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(FermipecError):
    """Operands act on different qubit counts or have inconsistent shapes."""


class NonUnitary(FermipecError):
    """A matrix expected to be unitary fails the unitarity tolerance."""


class Singular(FermipecError):
    """A matrix required to be invertible is singular or ill conditioned."""


class IndexOutOfRange(FermipecError):
    """A qubit index or pair is invalid for the requested register width."""


class InvalidWeights(FermipecError):
    """Pauli-channel weights violate the probability-simplex constraints."""


class UnsupportedSize(FermipecError):
    """The requested register is larger than the supported four qubits."""


class InvalidSteps(FermipecError):
    """A step count below one was requested."""


class UnknownGateKind(FermipecError):
    """A circuit contains a gate kind the compiler does not recognise."""


class MissingNoiseEntry(FermipecError):
    """A noisy simulation found no channel for an entangling gate."""


class SingularConfusion(FermipecError):
    """A readout confusion matrix cannot be inverted."""


class NonPauliError(FermipecError):
    """Gate characterization detected an error channel that is not Pauli-diagonal."""


class DegenerateSetting(FermipecError):
    """No preparation gives a usable ideal signal for a tomography component."""


class SingularEigenvalue(FermipecError):
    """An error-channel eigenvalue is too close to zero to invert."""


class NonDiagonal(FermipecError):
    """A matrix required to be diagonal carries significant off-diagonal mass."""


class MissingDecomposition(FermipecError):
    """An entangling gate has no quasi-probability decomposition attached."""


class TooManyGates(FermipecError):
    """Exhaustive enumeration was requested for a circuit that is too deep."""


class InvalidObservable(FermipecError):
    """An observable label is neither a basis projector nor a Pauli string."""


class EmptySector(FermipecError):
    """Post-selection removed all probability mass."""


class BadLayout(FermipecError):
    """Spin/charge observables need the two-component qubit layout."""


class FitDegenerate(FermipecError):
    """The decay fit has too few usable points or failed to converge."""


class InsufficientData(FermipecError):
    """Bootstrap invoked with too few replicates or no records."""


class ConfigError(FermipecError):
    """An experiment configuration is malformed; message names the field."""
