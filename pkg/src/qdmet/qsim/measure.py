"""Measurement grouping, shot sampling with noise, and shot-based estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qdmet.errors import ContractError, GroupingError
from qdmet.qsim.noise import NoiseModel, ShotTable
from qdmet.qsim.pauli import PauliSum, qubitwise_commute
from qdmet.qsim.statevector import Circuit, Gate, Statevector, apply_gate

_PAULI_NAMES = "IXYZ"


@dataclass(frozen=True)
class MeasurementGroup:
    basis: str
    terms: tuple  # ((pauli string, coefficient), ...)

    @property
    def strings(self):
        return [s for s, _ in self.terms]

    @property
    def is_diagonal(self) -> bool:
        return all(p == "Z" for s in self.strings for _, p in s)


def group_qubitwise(op: PauliSum):
    """Greedy qubit-wise commuting grouping, heaviest coefficients first."""
    groups = []
    order = sorted((s for s in op.terms if s), key=lambda s: (-abs(op.terms[s]), s))
    for s in order:
        for g in groups:
            if all(qubitwise_commute(s, t) for t in g):
                g.append(s)
                break
        else:
            groups.append([s])
    out = []
    for g in groups:
        out.append(make_group(g, op.n_qubits, [op.terms[s] for s in g]))
    return out


def make_group(strings, n_qubits, coeffs=None) -> MeasurementGroup:
    basis = ["Z"] * n_qubits
    fixed = {}
    for s in strings:
        for q, p in s:
            if fixed.setdefault(q, p) != p:
                raise GroupingError(f"strings in group do not commute qubit-wise on qubit {q}")
            basis[q] = p
    coeffs = [1.0] * len(strings) if coeffs is None else coeffs
    return MeasurementGroup("".join(basis), tuple(zip(map(tuple, strings), coeffs)))


def basis_change_circuit(basis: str) -> Circuit:
    c = Circuit(len(basis))
    for q, p in enumerate(basis):
        if p == "X":
            c.append("H", [q])
        elif p == "Y":
            c.append("Rz", [q], -np.pi / 2)  # S^dagger up to a global phase
            c.append("H", [q])
    return c


def _error_gate(pauli_index, qubit):
    return Gate(_PAULI_NAMES[pauli_index], (qubit,)) if pauli_index else None


def _gate_error_probs(gates, noise: NoiseModel):
    p = np.zeros(len(gates))
    two = np.zeros(len(gates), dtype=bool)
    for i, g in enumerate(gates):
        if g.kind == "CNOT":
            p[i] = noise.depol_2q[g.qubits[0], g.qubits[1]]
            two[i] = True
        elif g.kind in ("X", "Y", "Z", "H", "Rz", "Ry"):
            p[i] = noise.depol_1q[g.qubits[0]]
        # PEXP is an idealized primitive and carries no gate noise
    return p, two


def _bits_to_strings(indices, n):
    return ["".join("1" if i >> q & 1 else "0" for q in range(n)) for i in indices]


DENSITY_MAX_QUBITS = 8


def sample_shots(state: Statevector, basis_group, n_shots: int, noise: NoiseModel | None = None,
                 rng=None, circuit: Circuit | None = None, method="auto") -> ShotTable:
    """Sample computational-basis outcomes after rotating into ``basis_group``.

    With ``circuit`` given, ``state`` is the initial state and gate noise is
    applied along the circuit; otherwise ``state`` is the prepared state and
    only the basis change carries gate noise.  Gate noise is simulated with
    an exact density matrix (``method="density"``, default up to
    DENSITY_MAX_QUBITS) or with sampled Pauli trajectories
    (``method="trajectory"``); both realise the same channel.  Readout flips
    are applied independently per bit per shot.
    """
    rng = np.random.default_rng(rng)
    n = state.n_qubits
    basis_group = _as_group(basis_group, n)
    if noise is not None and noise.n_qubits != n:
        raise ContractError("noise model qubit count differs from the state")
    if method == "auto":
        method = "density" if n <= DENSITY_MAX_QUBITS else "trajectory"
    if method == "trajectory" and noise is not None and noise.has_gate_noise:
        gates = _gates(basis_group, circuit)
        indices = np.empty(n_shots, dtype=np.int64)
        _trajectories(rng, state.amplitudes, n, gates, noise, indices)
        return _finish(rng, indices, n, n_shots, basis_group.basis, noise)
    probs = outcome_distribution(state, basis_group, noise, circuit)
    return sample_distribution(probs, n_shots, basis_group.basis, noise, rng)


def _as_group(basis_group, n):
    if not isinstance(basis_group, MeasurementGroup):
        basis_group = make_group(list(basis_group), n)
    if len(basis_group.basis) != n:
        raise ContractError("measurement basis does not match the state")
    return basis_group


def _gates(group, circuit):
    gates = list(circuit.gates) if circuit is not None else []
    return gates + basis_change_circuit(group.basis).gates


def outcome_distribution(state: Statevector, basis_group, noise: NoiseModel | None = None,
                         circuit: Circuit | None = None) -> np.ndarray:
    """Exact pre-readout outcome probabilities, gate noise included."""
    n = state.n_qubits
    gates = _gates(_as_group(basis_group, n), circuit)
    if noise is None or not noise.has_gate_noise:
        psi = state.amplitudes
        for g in gates:
            psi = apply_gate(psi, n, g)
        p = np.abs(psi) ** 2
    else:
        p = _density_diagonal(state.amplitudes, n, gates, noise)
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_distribution(probs, n_shots, basis: str, noise: NoiseModel | None = None,
                        rng=None) -> ShotTable:
    """Multinomial draw from ``probs`` followed by per-bit readout flips."""
    rng = np.random.default_rng(rng)
    n = len(basis)
    counts = rng.multinomial(n_shots, probs)
    indices = rng.permutation(np.repeat(np.arange(probs.size), counts))
    return _finish(rng, indices, n, n_shots, basis, noise)


def _finish(rng, indices, n, n_shots, basis, noise):
    if noise is not None:
        ro = np.asarray(noise.readout_flip)
        bits = (indices[:, None] >> np.arange(n)) & 1
        u = rng.random((n_shots, n))
        flip_p = np.where(bits == 1, ro[:, 1], ro[:, 0])
        bits = bits ^ (u < flip_p)
        indices = (bits << np.arange(n)).sum(axis=1)
    values, counts = np.unique(indices, return_counts=True)
    outcomes = dict(zip(_bits_to_strings(values, n), (int(c) for c in counts)))
    return ShotTable(dict(sorted(outcomes.items())), int(n_shots), basis)


def _shifted(g: Gate, n) -> Gate:
    return Gate(g.kind, tuple(q + n for q in g.qubits), g.angle,
                tuple((q + n, p) for q, p in g.pauli))


def _conjugated(g: Gate):
    """Gate whose matrix is conj(U), plus a scalar sign."""
    if g.kind == "Rz":
        return Gate("Rz", g.qubits, -g.angle), 1.0
    if g.kind == "Y":
        return g, -1.0
    if g.kind == "PEXP":
        ny = sum(p == "Y" for _, p in g.pauli)
        return Gate("PEXP", g.qubits, -g.angle * (-1) ** ny, g.pauli), 1.0
    return g, 1.0


def _conjugate_by(rho, n, g: Gate):
    """U rho U^dagger on the row-major vectorised density matrix."""
    rho = apply_gate(rho, 2 * n, _shifted(g, n))
    gc, sign = _conjugated(g)
    return sign * apply_gate(rho, 2 * n, gc)


def _density_diagonal(psi0, n, gates, noise):
    rho = np.outer(psi0, psi0.conj()).reshape(-1)
    p, two = _gate_error_probs(gates, noise)
    for gi, g in enumerate(gates):
        rho = _conjugate_by(rho, n, g)
        if p[gi] == 0.0:
            continue
        if two[gi]:
            errs = [((a, g.qubits[0]), (b, g.qubits[1])) for a in range(4) for b in range(4)][1:]
        else:
            errs = [((a, g.qubits[0]),) for a in range(1, 4)]
        acc = np.zeros_like(rho)
        for ops in errs:
            term = rho
            for idx, q in ops:
                eg = _error_gate(idx, q)
                if eg is not None:
                    term = _conjugate_by(term, n, eg)
            acc += term
        rho = (1.0 - p[gi]) * rho + (p[gi] / len(errs)) * acc
    dim = 1 << n
    return rho.reshape(dim, dim).diagonal().real.copy()


def _draw(rng, psi, k):
    p = np.abs(psi) ** 2
    p = p / p.sum()
    counts = rng.multinomial(k, p)
    return np.repeat(np.arange(p.size), counts)


def _trajectories(rng, psi0, n, gates, noise, out):
    n_shots = out.size
    p, two = _gate_error_probs(gates, noise)
    hit = rng.random((n_shots, len(gates))) < p
    choice = np.where(two, rng.integers(1, 16, size=(n_shots, len(gates))),
                      rng.integers(1, 4, size=(n_shots, len(gates))))
    patterns = {}
    for shot in range(n_shots):
        cols = np.flatnonzero(hit[shot])
        key = tuple((int(c), int(choice[shot, c])) for c in cols)
        patterns.setdefault(key, []).append(shot)
    # clean prefix states let each trajectory start at its first error
    prefix = [psi0]
    psi = psi0
    for g in gates:
        psi = apply_gate(psi, n, g)
        prefix.append(psi)
    for key in sorted(patterns):
        shots = patterns[key]
        if not key:
            final = prefix[-1]
        else:
            errs = dict(key)
            start = key[0][0]
            psi = prefix[start + 1]
            for gi in range(start, len(gates)):
                if gi > start:
                    psi = apply_gate(psi, n, gates[gi])
                if gi in errs:
                    g = gates[gi]
                    if two[gi]:
                        a, b = divmod(errs[gi], 4)
                        ops = ((a, g.qubits[0]), (b, g.qubits[1]))
                    else:
                        ops = ((errs[gi], g.qubits[0]),)
                    for idx, q in ops:
                        eg = _error_gate(idx, q)
                        if eg is not None:
                            psi = apply_gate(psi, n, eg)
            final = psi
        out[shots] = rng.permutation(_draw(rng, final, len(shots)))


def term_expectation(probs: dict, string) -> float:
    """<P> from an outcome distribution measured in a basis diagonalizing P."""
    total = 0.0
    qubits = [q for q, _ in string]
    for bits, pr in probs.items():
        par = sum(bits[q] == "1" for q in qubits) & 1
        total += -pr if par else pr
    return total


def group_value(group: MeasurementGroup, probs: dict) -> float:
    return sum(c * term_expectation(probs, s) for s, c in group.terms)


def estimate_energy(op: PauliSum, groups, distributions) -> float:
    """Constant plus per-group estimates; ``distributions`` aligned with ``groups``."""
    return op.constant + sum(group_value(g, d) for g, d in zip(groups, distributions))


def group_variance(state: Statevector, group: MeasurementGroup) -> float:
    """Exact single-shot variance of the group observable on ``state``."""
    from qdmet.qsim.statevector import expectation

    op = PauliSum.from_terms(state.n_qubits, [(c, s) for s, c in group.terms])
    mean = expectation(state, op)
    mat = op.to_sparse()
    v = mat @ state.amplitudes
    second = float(np.vdot(v, v).real)
    return second - mean**2


def estimator_variance(state: Statevector, groups, n_shots: int) -> float:
    """Variance of estimate_energy with ``n_shots`` independent shots per group."""
    return sum(group_variance(state, g) for g in groups) / n_shots
