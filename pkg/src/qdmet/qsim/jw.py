"""Jordan-Wigner encoding with interleaved spin orbitals.

Spatial orbital p maps to qubits 2p (alpha) and 2p+1 (beta).  Occupied
modes are |1>, so a_j = Z_0 ... Z_{j-1} (X_j + i Y_j) / 2 and the particle
number of a basis state is its Hamming weight.

Operators are manipulated as dicts {(x_mask, z_mask): coeff} standing for
coeff * prod_q X_q^x_q Z_q^z_q, which multiply with a single popcount.
"""
from __future__ import annotations

import numpy as np

from qdmet.errors import CapacityError
from qdmet.qsim.pauli import PauliSum

MAX_QUBITS = 32
DESK_QUBITS = 16


def _mul(a, b):
    out = {}
    for (x1, z1), c1 in a.items():
        for (x2, z2), c2 in b.items():
            sign = -1 if bin(z1 & x2).count("1") & 1 else 1
            key = (x1 ^ x2, z1 ^ z2)
            out[key] = out.get(key, 0) + sign * c1 * c2
    return out


def _add(acc, d, scale=1.0):
    for k, v in d.items():
        acc[k] = acc.get(k, 0) + scale * v


def annihilation(j):
    zs = (1 << j) - 1
    x = 1 << j
    return {(x, zs): 0.5, (x, zs | x): -0.5}


def creation(j):
    zs = (1 << j) - 1
    x = 1 << j
    return {(x, zs): 0.5, (x, zs | x): 0.5}


def to_pauli_sum(op, n_qubits, hermitian_part=False):
    items = []
    for (x, z), c in op.items():
        y = x & z
        c = c * (-1j) ** bin(y).count("1")
        string = []
        for q in range(n_qubits):
            bx, bz = x >> q & 1, z >> q & 1
            if bx and bz:
                string.append((q, "Y"))
            elif bx:
                string.append((q, "X"))
            elif bz:
                string.append((q, "Z"))
        items.append((c.real if hermitian_part else c, tuple(string)))
    return PauliSum.from_terms(n_qubits, items)


def fermion_operator_matrix(op, n_qubits):
    """Dense matrix of an XZ-dict operator (brute-force checks only)."""
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Z = np.diag([1.0 + 0j, -1.0])
    I = np.eye(2, dtype=complex)
    dim = 1 << n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for (x, z), c in op.items():
        mat = np.array([[1.0 + 0j]])
        for q in reversed(range(n_qubits)):
            f = (X if x >> q & 1 else I) @ (Z if z >> q & 1 else I)
            mat = np.kron(mat, f)
        out += c * mat
    return out


def _one_body_tables(n_modes):
    cre = [creation(j) for j in range(n_modes)]
    ann = [annihilation(j) for j in range(n_modes)]
    return {(P, Q): _mul(cre[P], ann[Q]) for P in range(n_modes) for Q in range(n_modes)}


def jordan_wigner_operator(h, V, e_const=0.0, tol=1e-14):
    """XZ-dict of sum h E_pq + 1/2 sum V_pqrs a+_p a+_r a_s a_q (spin summed).

    ``h`` and ``V`` need not be symmetric; callers wanting a hermitian
    operator from non-symmetric weights take its hermitian part.
    """
    h = np.asarray(h)
    n = h.shape[0]
    m = 2 * n
    if m > MAX_QUBITS:
        raise CapacityError(f"{m} qubits exceed the hard cap of {MAX_QUBITS}")
    ob = _one_body_tables(m)
    op = {(0, 0): complex(e_const)}
    for p in range(n):
        for q in range(n):
            if abs(h[p, q]) > tol:
                for s in (0, 1):
                    _add(op, ob[2 * p + s, 2 * q + s], h[p, q])
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s_ in range(n):
                    v = V[p, q, r, s_]
                    if abs(v) <= tol:
                        continue
                    for a in (0, 1):
                        P, Q = 2 * p + a, 2 * q + a
                        for b in (0, 1):
                            R, S = 2 * r + b, 2 * s_ + b
                            if P == R or Q == S:
                                continue  # Pauli exclusion
                            # a+_P a+_R a_S a_Q = a+_P a_Q a+_R a_S - d_QR a+_P a_S
                            _add(op, _mul(ob[P, Q], ob[R, S]), 0.5 * v)
                            if Q == R:
                                _add(op, ob[P, S], -0.5 * v)
    return op


def jordan_wigner(h_emb, V_emb, e_const=0.0, hermitian_part=False, max_qubits=DESK_QUBITS):
    n_qubits = 2 * np.asarray(h_emb).shape[0]
    if n_qubits > max_qubits:
        raise CapacityError(f"{n_qubits} qubits exceed the limit of {max_qubits}")
    op = jordan_wigner_operator(h_emb, V_emb, e_const)
    return to_pauli_sum(op, n_qubits, hermitian_part=hermitian_part)


def excitation_generator(creators, annihilators):
    """XZ-dict of T - T^dagger for T = a+_c1 a+_c2 ... a_a2 a_a1 (ordered as given)."""
    T = {(0, 0): 1.0}
    for c in creators:
        T = _mul(T, creation(c))
    for a in reversed(annihilators):
        T = _mul(T, annihilation(a))
    Td = {(0, 0): 1.0}
    for a in annihilators:
        Td = _mul(Td, creation(a))
    for c in reversed(creators):
        Td = _mul(Td, annihilation(c))
    out = dict(T)
    _add(out, Td, -1.0)
    return {k: v for k, v in out.items() if abs(v) > 1e-14}


def number_operator(n_qubits):
    op = {}
    for j in range(n_qubits):
        _add(op, _mul(creation(j), annihilation(j)))
    return to_pauli_sum(op, n_qubits)
