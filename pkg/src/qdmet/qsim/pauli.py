"""Pauli strings and real-coefficient Pauli sums.

A Pauli string is a sorted tuple of ``(qubit, "X"|"Y"|"Z")`` pairs; the empty
tuple is the identity.  Qubit ``q`` is bit ``1 << q`` of a basis-state index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from qdmet.errors import HermiticityError

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def masks(string):
    """(x_mask, z_mask, n_y) with Y contributing to both masks."""
    x = z = 0
    ny = 0
    for q, p in string:
        if p in "XY":
            x |= 1 << q
        if p in "ZY":
            z |= 1 << q
        if p == "Y":
            ny += 1
    return x, z, ny


def parse_label(label: str):
    """``"XIZY"`` (qubit 0 first) -> Pauli string."""
    return tuple((q, c) for q, c in enumerate(label.upper()) if c != "I")


def to_label(string, n_qubits):
    chars = ["I"] * n_qubits
    for q, p in string:
        chars[q] = p
    return "".join(chars)


def parity(values):
    """Bit parity of each non-negative integer in an array."""
    v = np.asarray(values, dtype=np.uint64)
    return (np.bitwise_count(v) & 1).astype(np.int8)


def apply_string(string, psi, n_qubits):
    """P |psi> for a single Pauli string."""
    x, z, ny = masks(string)
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    src = idx ^ x
    phase = (1j) ** ny * (1 - 2 * parity(src & z))
    return phase * psi[src]


def qubitwise_commute(a, b):
    da, db = dict(a), dict(b)
    return all(da[q] == db[q] for q in set(da) & set(db))


def commute(a, b):
    xa, za, _ = masks(a)
    xb, zb, _ = masks(b)
    return (bin(xa & zb).count("1") + bin(za & xb).count("1")) % 2 == 0


@dataclass(frozen=True, eq=False)
class PauliSum:
    n_qubits: int
    terms: dict  # pauli string -> real coefficient

    @classmethod
    def from_terms(cls, n_qubits, items, atol=1e-12, real_tol=1e-10):
        """Merge duplicate strings; complex residues above ``real_tol`` are rejected."""
        acc = {}
        for coeff, string in items:
            key = tuple(sorted(string))
            acc[key] = acc.get(key, 0.0) + coeff
        terms = {}
        for key in sorted(acc, key=lambda s: (len(s), s)):
            c = complex(acc[key])
            if abs(c.imag) > real_tol:
                raise HermiticityError(f"term {key} has imaginary coefficient {c.imag:.3e}")
            if abs(c.real) > atol:
                terms[key] = float(c.real)
        return cls(n_qubits, terms)

    @property
    def constant(self) -> float:
        return self.terms.get((), 0.0)

    def __len__(self):
        return len(self.terms)

    def items(self):
        return self.terms.items()

    def to_sparse(self):
        dim = 1 << self.n_qubits
        rows = np.arange(dim, dtype=np.int64)
        by_x = {}
        for string, c in self.terms.items():
            x, z, ny = masks(string)
            # column b contributes to row b ^ x with phase i^ny (-1)^{b.z}
            vals = c * (1j) ** ny * (1 - 2 * parity(rows & z))
            by_x[x] = by_x.get(x, 0) + vals
        data, rr, cc = [], [], []
        for x, vals in by_x.items():
            data.append(vals)
            cc.append(rows)
            rr.append(rows ^ x)
        if not data:
            return sp.csr_matrix((dim, dim), dtype=complex)
        mat = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rr), np.concatenate(cc))), shape=(dim, dim)
        )
        mat.eliminate_zeros()
        return mat

    def to_dense(self):
        return self.to_sparse().toarray()

    def to_json(self):
        return {
            "n_qubits": self.n_qubits,
            "terms": [[to_label(s, self.n_qubits), c] for s, c in self.terms.items()],
        }

    @classmethod
    def from_json(cls, data):
        return cls.from_terms(
            data["n_qubits"], [(c, parse_label(lbl)) for lbl, c in data["terms"]]
        )


def kron_string(string, n_qubits):
    """Dense matrix of a Pauli string (qubit 0 is the least significant bit)."""
    d = dict(string)
    out = np.array([[1.0 + 0j]])
    for q in reversed(range(n_qubits)):
        out = np.kron(out, PAULI_MATRICES[d.get(q, "I")])
    return out
