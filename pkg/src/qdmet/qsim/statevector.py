"""Dense statevector simulation.

Basis index bit ``q`` is qubit ``q``.  Bitstrings are written qubit 0 first.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from qdmet.errors import ContractError, HermiticityError
from qdmet.qsim.pauli import PauliSum, apply_string, masks, parity

GATE_KINDS = ("X", "Y", "Z", "H", "Rz", "Ry", "CNOT", "PEXP")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_FIXED = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0 + 0j, -1.0]),
    "H": _H,
}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0
    pauli: tuple = ()  # Pauli string for PEXP: exp(-i angle P / 2)

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ContractError(f"unknown gate kind {self.kind!r}")


@dataclass
class Circuit:
    n_qubits: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, g):
        if any(q < 0 or q >= self.n_qubits for q in g.qubits):
            raise ContractError(f"gate {g} addresses a qubit outside 0..{self.n_qubits - 1}")

    def append(self, kind, qubits, angle=0.0, pauli=()):
        g = Gate(kind, tuple(qubits), float(angle), tuple(pauli))
        self._check(g)
        self.gates.append(g)
        return self

    def extend(self, other: Circuit):
        for g in other.gates:
            self._check(g)
            self.gates.append(g)
        return self

    def __len__(self):
        return len(self.gates)

    def count(self, kind):
        return sum(g.kind == kind for g in self.gates)


@dataclass(eq=False)
class Statevector:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ContractError("amplitude vector does not match qubit count")

    @classmethod
    def basis_state(cls, n_qubits, bits=0) -> Statevector:
        if isinstance(bits, str):
            bits = sum(1 << q for q, c in enumerate(bits) if c == "1")
        amp = np.zeros(1 << n_qubits, dtype=complex)
        amp[bits] = 1.0
        return cls(amp, n_qubits)

    def copy(self) -> Statevector:
        return Statevector(self.amplitudes.copy(), self.n_qubits)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()


def _apply_1q(psi, n, q, U):
    v = psi.reshape(1 << (n - q - 1), 2, 1 << q)
    return np.einsum("ab,ibj->iaj", U, v).reshape(-1)


def _rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _apply_cnot(psi, n, control, target):
    idx = np.arange(1 << n)
    src = np.where(idx >> control & 1, idx ^ (1 << target), idx)
    return psi[src]


def pauli_exponential(psi, n, string, theta):
    """exp(-i theta P / 2) psi."""
    return np.cos(theta / 2) * psi - 1j * np.sin(theta / 2) * apply_string(string, psi, n)


def apply_gate(psi, n, g: Gate):
    k = g.kind
    if k in _FIXED:
        return _apply_1q(psi, n, g.qubits[0], _FIXED[k])
    if k == "Rz":
        return _apply_1q(psi, n, g.qubits[0], _rz(g.angle))
    if k == "Ry":
        return _apply_1q(psi, n, g.qubits[0], _ry(g.angle))
    if k == "CNOT":
        return _apply_cnot(psi, n, g.qubits[0], g.qubits[1])
    return pauli_exponential(psi, n, g.pauli, g.angle)


def apply_circuit(state: Statevector, circuit: Circuit) -> Statevector:
    if circuit.n_qubits != state.n_qubits:
        raise ContractError("circuit and state qubit counts differ")
    psi = state.amplitudes
    n = state.n_qubits
    for g in circuit.gates:
        psi = apply_gate(psi, n, g)
    return Statevector(psi, n)


IMAG_TOL = 1e-10


def expectation(state: Statevector, op: PauliSum) -> float:
    if op.n_qubits != state.n_qubits:
        raise ContractError("operator and state qubit counts differ")
    psi = state.amplitudes
    total = 0.0 + 0.0j
    for string, c in op.items():
        total += c * np.vdot(psi, apply_string(string, psi, state.n_qubits))
    if abs(total.imag) >= IMAG_TOL:
        raise HermiticityError(f"expectation has imaginary part {total.imag:.3e}")
    return float(total.real)


def z_expectation_from_bits(probs, string):
    """<P> for a diagonal (post-rotation) Pauli string given basis probabilities."""
    _, z, _ = masks(tuple((q, "Z") for q, _ in string))
    idx = np.arange(probs.size)
    return float(np.sum(probs * (1 - 2 * parity(idx & z))))
