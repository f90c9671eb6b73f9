"""Physicality restoration and statistics for mitigated populations.

Cancellation estimators return pseudo-populations that may dip below zero
and need not sum to one.  The restoration chain is fixed: project onto the
probability simplex (the nearest feasible point in the Euclidean sense,
found by the sort-and-threshold rule), then post-select onto the symmetry
sector of the initial state and renormalize.  Population fidelity is the
squared Bhattacharyya overlap; per-gate decay comes from a least-squares
fit of F(step) = A * f**(gates_per_step * step).

Error bars come from resampling the per-circuit measurement records with
replacement and rerunning the restoration chain on every replicate.  For
bounded quantities like fidelities the replicate spread is split at the
point estimate and each side is summarised separately, which is what the
compressed distributions near 1 require.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.optimize

from .errors import (
    BadLayout,
    DimensionMismatch,
    EmptySector,
    FitDegenerate,
    InsufficientData,
)
from .hubbard import basis_labels

SIMPLEX_TOL = 1e-12


def mle_project(raw: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Already-feasible input is returned unchanged, which also makes the
    projection exactly idempotent.
    """
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise DimensionMismatch("projection input must be finite")
    if np.all(raw >= 0.0) and abs(raw.sum() - 1.0) <= SIMPLEX_TOL:
        return raw.copy()
    descending = np.sort(raw)[::-1]
    cumulative = np.cumsum(descending)
    ranks = np.arange(1, raw.size + 1)
    feasible = descending - (cumulative - 1.0) / ranks > 0
    rho = int(np.nonzero(feasible)[0][-1])
    threshold = (cumulative[rho] - 1.0) / (rho + 1)
    return np.maximum(raw - threshold, 0.0)


@dataclass(frozen=True)
class SymmetrySector:
    """Allowed basis labels carrying the conserved quantum numbers."""

    qubit_count: int
    allowed: frozenset[str]
    description: str = ""

    def __post_init__(self) -> None:
        if not self.allowed:
            raise EmptySector("allowed label set is empty")
        for label in self.allowed:
            if len(label) != self.qubit_count or any(c not in "01" for c in label):
                raise DimensionMismatch(f"bad sector label {label!r}")

    @classmethod
    def from_state(cls, psi: np.ndarray, components: str = "one", tol: float = 1e-12) -> "SymmetrySector":
        """Sector spanned by the particle numbers present in the state.

        For two-component registers the per-spin numbers are conserved
        separately, so labels must match on both counts.
        """
        psi = np.asarray(psi)
        n = int(round(np.log2(psi.size)))
        labels = basis_labels(n)

        def numbers(label: str) -> tuple:
            if components == "two":
                half = n // 2
                return (label[:half].count("1"), label[half:].count("1"))
            return (label.count("1"),)

        present = {numbers(labels[i]) for i in range(psi.size) if abs(psi[i]) ** 2 > tol}
        allowed = frozenset(lab for lab in labels if numbers(lab) in present)
        desc = "n in {" + ", ".join(str(t) for t in sorted(present)) + "}"
        return cls(n, allowed, desc)

    def indices(self) -> np.ndarray:
        return np.array(sorted(int(lab, 2) for lab in self.allowed), dtype=np.int64)

    def to_json_dict(self) -> dict:
        return {
            "qubit_count": self.qubit_count,
            "allowed": sorted(self.allowed),
            "description": self.description,
        }


def post_select(populations: np.ndarray, sector: SymmetrySector) -> tuple[np.ndarray, float]:
    """Zero the out-of-sector entries and renormalize; returns the leakage."""
    populations = np.asarray(populations, dtype=float)
    if populations.size != 2**sector.qubit_count:
        raise DimensionMismatch("population vector does not match the sector register")
    mask = np.zeros(populations.size, dtype=bool)
    mask[sector.indices()] = True
    kept = np.where(mask, populations, 0.0)
    inside = kept.sum()
    if inside < 1e-9:
        raise EmptySector("all probability mass lies outside the sector")
    return kept / inside, float(populations.sum() - inside)


def population_fidelity(p: np.ndarray, ideal: np.ndarray, normalized: bool = True) -> float:
    """Squared Bhattacharyya overlap of two basis distributions.

    With ``normalized`` (the default) both inputs are clipped to zero and
    renormalized, so the result lies in [0, 1] and equals 1 only for equal
    distributions.  The raw mode skips renormalization, reproducing the
    unphysical above-one values a cancellation estimate can show.
    """
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    ideal = np.clip(np.asarray(ideal, dtype=float), 0.0, None)
    if p.shape != ideal.shape:
        raise DimensionMismatch("distributions have different sizes")
    if ideal.sum() <= 0:
        raise DimensionMismatch("reference distribution has no positive mass")
    if p.sum() <= 0:
        return 0.0  # clipped-to-empty pseudo-distribution has no overlap
    if normalized:
        p = p / p.sum()
        ideal = ideal / ideal.sum()
    return float(np.abs(np.sqrt(p) @ np.sqrt(ideal)) ** 2)


def fit_fidelity_per_gate(
    fidelities: Sequence[float],
    gates_per_step: int,
    steps: Sequence[int] | None = None,
) -> tuple[float, float]:
    """Least-squares fit of F(step) = A * f**(gates_per_step * step).

    Returns the per-gate factor f and its standard error from the fit
    covariance.  A constant series is an exact fit with f = 1.
    """
    values = np.asarray(fidelities, dtype=float)
    if steps is None:
        x = np.arange(len(values), dtype=float)
    else:
        x = np.asarray(steps, dtype=float)
    if values.size < 3:
        raise FitDegenerate("need at least three points")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise FitDegenerate("fidelities must be positive and finite")
    if np.max(values) - np.min(values) < 1e-14:
        return 1.0, 0.0

    def model(step, amplitude, factor):
        return amplitude * factor ** (gates_per_step * step)

    try:
        popt, pcov = scipy.optimize.curve_fit(
            model, x, values, p0=(values[0], 0.99), maxfev=10000
        )
    except RuntimeError as exc:
        raise FitDegenerate(f"decay fit failed: {exc}") from exc
    factor = float(popt[1])
    stderr = float(np.sqrt(pcov[1, 1])) if np.all(np.isfinite(pcov)) else float("nan")
    return factor, stderr


def spin_charge(populations: np.ndarray, site: int) -> tuple[float, float]:
    """Per-site spin (n_up - n_down) and charge (n_up + n_down).

    The register is the two-component layout: the first half of the qubits
    holds the spin-up sites in order, the second half the spin-down sites.
    """
    populations = np.asarray(populations, dtype=float)
    n = int(round(np.log2(populations.size)))
    if 2**n != populations.size or n % 2:
        raise BadLayout(f"population vector of size {populations.size} has no spinful layout")
    sites = n // 2
    if not 0 <= site < sites:
        raise BadLayout(f"site {site} out of range for {sites} sites")
    up_bit = n - 1 - site
    down_bit = n - 1 - (sites + site)
    states = np.arange(populations.size)
    n_up = populations[(states >> up_bit) & 1 == 1].sum()
    n_down = populations[(states >> down_bit) & 1 == 1].sum()
    return float(n_up - n_down), float(n_up + n_down)


@dataclass(frozen=True)
class PopulationRecord:
    """Per-step basis populations for one mitigation stage, with error bars."""

    step: int
    stage: str
    values: np.ndarray = field(repr=False)
    err_lo: np.ndarray = field(repr=False)
    err_hi: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        lo = np.asarray(self.err_lo, dtype=float)
        hi = np.asarray(self.err_hi, dtype=float)
        if lo.shape != values.shape or hi.shape != values.shape:
            raise DimensionMismatch("error bars must match the value vector")
        if np.any(lo < 0) or np.any(hi < 0):
            raise DimensionMismatch("error bars must be nonnegative")
        if self.stage in ("mle", "ps"):
            if np.any(values < -1e-12) or abs(values.sum() - 1.0) > 1e-9:
                raise DimensionMismatch(f"stage {self.stage!r} values must lie on the simplex")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "err_lo", lo)
        object.__setattr__(self, "err_hi", hi)

    @classmethod
    def exact(cls, step: int, stage: str, values: np.ndarray) -> "PopulationRecord":
        zeros = np.zeros_like(np.asarray(values, dtype=float))
        return cls(step, stage, values, zeros, zeros)


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapBars:
    """Symmetric and split one-sided deviations around the point estimate."""

    estimate: np.ndarray
    std: np.ndarray
    err_lo: np.ndarray
    err_hi: np.ndarray


def _split_deviations(replicates: np.ndarray, center: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One-sided RMS deviations of the replicates below and above the center."""
    flat_center = center.reshape(-1)
    deltas = replicates.reshape(replicates.shape[0], -1) - flat_center
    lo = np.zeros_like(flat_center)
    hi = np.zeros_like(flat_center)
    for j in range(flat_center.size):
        column = deltas[:, j]
        below = column[column < 0]
        above = column[column > 0]
        lo[j] = np.sqrt(np.mean(below**2)) if below.size else 0.0
        hi[j] = np.sqrt(np.mean(above**2)) if above.size else 0.0
    return lo.reshape(center.shape), hi.reshape(center.shape)


def bootstrap(
    records: Sequence,
    pipeline: Callable[[Sequence], Mapping[str, float | np.ndarray]],
    replicates: int,
    seed: int,
) -> dict[str, BootstrapBars]:
    """Resample ``records`` with replacement and rerun ``pipeline`` each time.

    ``pipeline`` maps a record list to named scalar or vector outputs; bars
    are returned per name, with both the plain standard deviation and the
    above/below split around the unresampled point estimate.
    """
    return bootstrap_joint({"records": records}, lambda parts: pipeline(parts["records"]),
                           replicates, seed)


def bootstrap_joint(
    parts: Mapping[str, Sequence],
    pipeline: Callable[[Mapping[str, Sequence]], Mapping[str, float | np.ndarray]],
    replicates: int,
    seed: int,
) -> dict[str, BootstrapBars]:
    """Bootstrap with several independently resampled record pools."""
    if replicates < 100:
        raise InsufficientData(f"need at least 100 replicates, got {replicates}")
    for name, records in parts.items():
        if len(records) == 0:
            raise InsufficientData(f"record pool {name!r} is empty")

    point = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in pipeline(parts).items()}
    sums: dict[str, list[np.ndarray]] = {k: [] for k in point}
    for r in range(replicates):
        rng = np.random.default_rng([seed, r])
        resampled = {}
        for name, records in parts.items():
            idx = rng.integers(0, len(records), size=len(records))
            resampled[name] = [records[i] for i in idx]
        outputs = pipeline(resampled)
        for k in point:
            sums[k].append(np.atleast_1d(np.asarray(outputs[k], dtype=float)))

    bars: dict[str, BootstrapBars] = {}
    for k, center in point.items():
        stack = np.stack(sums[k])
        lo, hi = _split_deviations(stack, center)
        bars[k] = BootstrapBars(
            estimate=center,
            std=stack.std(axis=0),
            err_lo=lo,
            err_hi=hi,
        )
    return bars
