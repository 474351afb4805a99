"""Readout (SPAM) confusion-matrix mitigation and particle-number shot filtering."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from qdmet.errors import CalibrationError, ContractError, EmptyFilterError, InversionError
from qdmet.qsim.measure import MeasurementGroup, group_value, sample_shots
from qdmet.qsim.noise import NoiseModel, ShotTable
from qdmet.qsim.pauli import PauliSum
from qdmet.qsim.statevector import Circuit, Statevector

logger = logging.getLogger(__name__)

MIN_CALIBRATION_SHOTS = 1000
DET_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Tensor-product readout model; matrices[q][j, i] = p(read j | prepared i)."""

    matrices: np.ndarray  # (n_qubits, 2, 2), columns sum to one
    n_calibration_shots: int = 0

    @property
    def n_qubits(self) -> int:
        return len(self.matrices)

    @classmethod
    def identity(cls, n_qubits) -> ConfusionMatrix:
        return cls(np.tile(np.eye(2), (n_qubits, 1, 1)))

    @classmethod
    def from_flips(cls, flips) -> ConfusionMatrix:
        """From per-qubit (p(1|0), p(0|1)) pairs."""
        mats = [np.array([[1 - p10, p01], [p10, 1 - p01]]) for p10, p01 in flips]
        return cls(np.array(mats))

    def inverses(self):
        out = []
        for q, A in enumerate(self.matrices):
            if abs(np.linalg.det(A)) < DET_THRESHOLD:
                raise InversionError(f"confusion matrix of qubit {q} is singular")
            out.append(np.linalg.inv(A))
        return out

    @property
    def condition_number(self) -> float:
        return float(np.prod([np.linalg.cond(A) for A in self.matrices]))

    def apply(self, probs, inverse=False):
        """Act with the full tensor product (or its inverse) on a 2^n vector."""
        mats = self.inverses() if inverse else list(self.matrices)
        return _tensor_apply(mats, probs)

    def to_json(self):
        return {"matrices": self.matrices.tolist(), "n_calibration_shots": self.n_calibration_shots}


def _tensor_apply(mats, vec):
    n = len(mats)
    t = np.asarray(vec).reshape((2,) * n)
    # axis k of the C-ordered tensor is qubit n - 1 - k
    for q, M in enumerate(mats):
        t = np.moveaxis(np.tensordot(M, t, axes=([1], [n - 1 - q])), 0, n - 1 - q)
    return t.reshape(-1)


def calibrate_spam(noise: NoiseModel | None, n_qubits: int, n_shots: int, seed=None) -> ConfusionMatrix:
    """Estimate per-qubit readout matrices from |0...0> and |1...1> preparations."""
    if n_shots < MIN_CALIBRATION_SHOTS:
        raise CalibrationError(f"calibration needs at least {MIN_CALIBRATION_SHOTS} shots per state")
    rng = np.random.default_rng(seed)
    zero = Statevector.basis_state(n_qubits, 0)
    counts = np.zeros((n_qubits, 2, 2))
    for prep in (0, 1):
        circ = Circuit(n_qubits)
        if prep:
            for q in range(n_qubits):
                circ.append("X", [q])
        table = sample_shots(zero, [()], n_shots, noise, rng, circ)
        for bits, c in table.outcomes.items():
            for q in range(n_qubits):
                counts[q, int(bits[q]), prep] += c
    col = counts.sum(axis=1, keepdims=True)
    if np.any(col == 0):
        raise CalibrationError("a calibration column received no counts")
    return ConfusionMatrix(counts / col, int(n_shots))


def _vector(table: ShotTable):
    n = len(table.basis)
    v = np.zeros(1 << n)
    for bits, c in table.outcomes.items():
        v[int(bits[::-1], 2)] += c
    return v / max(table.n_shots, 1)


def _as_dict(vec, n):
    return {format(i, f"0{n}b")[::-1]: float(p) for i, p in enumerate(vec) if p != 0.0}


@dataclass
class MitigatedDistribution:
    probabilities: np.ndarray  # clipped and renormalized, index bit q = qubit q
    quasi_probabilities: np.ndarray  # raw inverse, may be negative
    clipped_mass: float
    n_shots: int
    basis: str

    def as_dict(self) -> dict:
        return _as_dict(self.probabilities, len(self.basis))


def mitigate_spam(shots: ShotTable, cal: ConfusionMatrix) -> MitigatedDistribution:
    """Per-qubit inverse via the tensor structure, then clip negatives and renormalize."""
    n = len(shots.basis)
    if cal.n_qubits != n:
        raise ContractError("calibration and shot table qubit counts differ")
    quasi = cal.apply(_vector(shots), inverse=True)
    neg = quasi < 0
    clipped = float(-quasi[neg].sum())
    p = np.where(neg, 0.0, quasi)
    total = p.sum()
    if total <= 0:
        raise InversionError("mitigated distribution has no positive mass")
    p = p / total
    if clipped > 0:
        logger.debug("SPAM inversion clipped %.3e negative mass", clipped)
    return MitigatedDistribution(p, quasi, clipped, shots.n_shots, shots.basis)


def spam_covariance(frequencies, cal: ConfusionMatrix, n_shots: int) -> np.ndarray:
    """Covariance of the inverted distribution from multinomial frequencies."""
    f = np.asarray(frequencies, dtype=float)
    cov_f = (np.diag(f) - np.outer(f, f)) / n_shots
    inv = cal.inverses()
    left = np.array([_tensor_apply(inv, col) for col in cov_f.T]).T
    return np.array([_tensor_apply(inv, row) for row in left])


def commutes_with_number(group) -> bool:
    basis = group.basis if isinstance(group, MeasurementGroup) else group
    strings = group.strings if isinstance(group, MeasurementGroup) else None
    if strings is not None:
        return all(p == "Z" for s in strings for _, p in s)
    return set(basis) <= {"Z"}


PMSV_SKIPPED = "pmsv-skipped-non-number-conserving"


def pmsv_filter(shots: ShotTable, n_elec_active: int, basis_group=None) -> ShotTable:
    """Keep only bitstrings with Hamming weight ``n_elec_active``.

    Groups that do not commute with the total number operator are returned
    unchanged with a flag.
    """
    group = basis_group if basis_group is not None else shots.basis
    if not commutes_with_number(group):
        flags = shots.flags if PMSV_SKIPPED in shots.flags else shots.flags + (PMSV_SKIPPED,)
        return ShotTable(dict(shots.outcomes), shots.n_shots, shots.basis, flags)
    kept = {b: c for b, c in shots.outcomes.items() if b.count("1") == n_elec_active}
    total = sum(kept.values())
    if total == 0:
        raise EmptyFilterError(f"no shots with particle number {n_elec_active} in basis {shots.basis}")
    return ShotTable(kept, total, shots.basis, shots.flags)


@dataclass
class MitigationReport:
    scheme: str
    raw_energy: float
    mitigated_energy: float
    seed: object = None
    n_shots: int = 0
    shots_kept: int | None = None
    total_shots: int | None = None
    condition_number: float | None = None
    clipped_mass: float | None = None
    filtered_shots: int | None = None
    flags: list = field(default_factory=list)

    def to_json(self):
        return dict(self.__dict__)


SCHEMES = ("none", "spam", "pmsv")


def mitigated_energy(op: PauliSum, groups, tables, scheme: str, cal: ConfusionMatrix | None = None,
                     n_elec_active: int | None = None, seed=None) -> MitigationReport:
    """Raw and mitigated estimates of ``op`` from the same per-group shot tables."""
    scheme = scheme.lower()
    if scheme not in SCHEMES:
        raise ContractError(f"unknown mitigation scheme {scheme!r}")
    raw = op.constant + sum(group_value(g, t.probabilities()) for g, t in zip(groups, tables))
    total = sum(t.n_shots for t in tables)
    n_shots = tables[0].n_shots if tables else 0
    rep = MitigationReport(scheme, float(raw), float(raw), seed, n_shots, total_shots=total)
    if scheme == "spam":
        if cal is None:
            raise ContractError("SPAM mitigation needs a confusion matrix")
        clipped = 0.0
        value = op.constant
        for g, t in zip(groups, tables):
            md = mitigate_spam(t, cal)
            clipped += md.clipped_mass
            value += group_value(g, md.as_dict())
        rep.mitigated_energy = float(value)
        rep.condition_number = cal.condition_number
        rep.clipped_mass = clipped
    elif scheme == "pmsv":
        if n_elec_active is None:
            raise ContractError("PMSV needs the active electron count")
        kept = filtered = 0
        value = op.constant
        for g, t in zip(groups, tables):
            ft = pmsv_filter(t, n_elec_active, g)
            if PMSV_SKIPPED in ft.flags:
                if PMSV_SKIPPED not in rep.flags:
                    rep.flags.append(PMSV_SKIPPED)
            else:
                kept += ft.n_shots
                filtered += t.n_shots
            value += group_value(g, ft.probabilities())
        rep.mitigated_energy = float(value)
        rep.shots_kept = kept
        rep.filtered_shots = filtered
    return rep


def joint_deviation(estimate, truth, cal: ConfusionMatrix, n_shots: int) -> tuple[float, int]:
    """Squared Mahalanobis distance of an inverted distribution from ``truth``.

    The covariance follows from multinomial sampling of the forward-noised
    truth.  Returns (statistic, degrees of freedom); under correct
    mitigation the statistic is chi-square distributed with that many
    degrees of freedom.
    """
    truth = np.asarray(truth, dtype=float)
    cov = spam_covariance(cal.apply(truth), cal, n_shots)
    d = np.asarray(estimate, dtype=float) - truth
    dof = int(np.linalg.matrix_rank(cov, tol=1e-12))
    return float(d @ np.linalg.pinv(cov, rcond=1e-10, hermitian=True) @ d), dof
