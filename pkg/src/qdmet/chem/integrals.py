"""One- and two-electron integrals over contracted Cartesian Gaussians.

McMurchie-Davidson scheme: products of Gaussians are expanded in Hermite
Gaussians (coefficients ``E``) and Coulomb-type integrals reduce to the
Hermite integrals ``R`` built from the Boys function.  Every kernel is
vectorized over primitive pairs.  Lengths are bohr internally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qdmet.chem.basis import BasisSet, primitive_norm, sto3g
from qdmet.chem.boys import boys_table
from qdmet.chem.molecule import Molecule
from qdmet.errors import ConditioningError

LINDEP_THRESHOLD = 1e-8


@dataclass(frozen=True, eq=False)
class IntegralSet:
    S: np.ndarray
    T: np.ndarray
    Vne: np.ndarray
    ERI: np.ndarray  # chemist's notation (ij|kl)
    E_nuc: float

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def hcore(self) -> np.ndarray:
        return self.T + self.Vne


def hermite_coefficients(imax, jmax, a, b, Q):
    """E[i, j, t] for 1-D Gaussian products, arrays broadcast over primitives.

    ``Q`` is A_x - B_x.  Returns shape ``(imax+1, jmax+1, imax+jmax+1) + shape``.
    """
    a, b, Q = np.broadcast_arrays(a, b, Q)
    p = a + b
    q = a * b / p
    tmax = imax + jmax
    E = np.zeros((imax + 1, jmax + 1, tmax + 2) + a.shape)
    E[0, 0, 0] = np.exp(-q * Q * Q)
    XPA = -b / p * Q
    XPB = a / p * Q
    inv2p = 0.5 / p
    for i in range(imax + 1):
        for j in range(jmax + 1):
            if i == 0 and j == 0:
                continue
            for t in range(i + j + 1):
                if i > 0:
                    prev = E[i - 1, j]
                    val = XPA * prev[t] + (t + 1) * prev[t + 1]
                    if t > 0:
                        val = val + inv2p * prev[t - 1]
                else:
                    prev = E[i, j - 1]
                    val = XPB * prev[t] + (t + 1) * prev[t + 1]
                    if t > 0:
                        val = val + inv2p * prev[t - 1]
                E[i, j, t] = val
    return E[:, :, : tmax + 1]


def hermite_integrals(L, p, PC):
    """R[t, u, v] for t+u+v <= L; ``PC`` has trailing axis of length 3."""
    X, Y, Z = PC[..., 0], PC[..., 1], PC[..., 2]
    T = p * (X * X + Y * Y + Z * Z)
    F = boys_table(L, T)
    shape = np.shape(T)
    # Rn[n][t][u][v]
    Rn = np.zeros((L + 1, L + 1, L + 1, L + 1) + shape)
    fac = np.ones(shape)
    for n in range(L + 1):
        Rn[n, 0, 0, 0] = fac * F[n]
        fac = fac * (-2.0 * p)
    for n in range(L - 1, -1, -1):
        order = L - n
        for t in range(order + 1):
            for u in range(order + 1 - t):
                for v in range(order + 1 - t - u):
                    if t == u == v == 0:
                        continue
                    if t > 0:
                        val = X * Rn[n + 1, t - 1, u, v]
                        if t > 1:
                            val = val + (t - 1) * Rn[n + 1, t - 2, u, v]
                    elif u > 0:
                        val = Y * Rn[n + 1, t, u - 1, v]
                        if u > 1:
                            val = val + (u - 1) * Rn[n + 1, t, u - 2, v]
                    else:
                        val = Z * Rn[n + 1, t, u, v - 1]
                        if v > 1:
                            val = val + (v - 1) * Rn[n + 1, t, u, v - 2]
                    Rn[n, t, u, v] = val
    return Rn[0]


class _Pair:
    """Primitive-pair data for one pair of contracted basis functions."""

    def __init__(self, basis, centers, i, j, extra=0):
        fi, fj = basis.functions[i], basis.functions[j]
        si, sj = basis.shells[fi.shell], basis.shells[fj.shell]
        A, B = centers[fi.center], centers[fj.center]
        a = np.asarray(si.exponents)[:, None]
        b = np.asarray(sj.exponents)[None, :]
        ca = np.asarray(si.coefficients) * primitive_norm(np.asarray(si.exponents), si.l) * si.norm
        cb = np.asarray(sj.coefficients) * primitive_norm(np.asarray(sj.exponents), sj.l) * sj.norm
        self.a, self.b = np.broadcast_arrays(a, b)
        self.p = self.a + self.b
        self.c = ca[:, None] * cb[None, :]
        self.P = (self.a[..., None] * A + self.b[..., None] * B) / self.p[..., None]
        self.li, self.lj = fi.powers, fj.powers
        self.E = [
            hermite_coefficients(self.li[d], self.lj[d] + extra, self.a, self.b, A[d] - B[d])
            for d in range(3)
        ]

    def hermite_expansion(self):
        """(t, u, v) -> coefficient array, for the pair's own angular momenta."""
        ex, ey, ez = (self.E[d][self.li[d], self.lj[d]] for d in range(3))
        out = {}
        for t in range(self.li[0] + self.lj[0] + 1):
            for u in range(self.li[1] + self.lj[1] + 1):
                for v in range(self.li[2] + self.lj[2] + 1):
                    out[(t, u, v)] = ex[t] * ey[u] * ez[v]
        return out


def _one_electron(basis, centers, charges):
    n = basis.n
    S = np.zeros((n, n))
    T = np.zeros((n, n))
    V = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            pr = _Pair(basis, centers, i, j, extra=2)
            root = np.sqrt(np.pi / pr.p)
            s1 = [pr.E[d][pr.li[d], pr.lj[d], 0] * root for d in range(3)]
            S[i, j] = np.sum(pr.c * s1[0] * s1[1] * s1[2])
            kin = []
            for d in range(3):
                lj = pr.lj[d]
                Ed = pr.E[d][pr.li[d]]
                term = -2.0 * pr.b * (2 * lj + 1) * Ed[lj, 0] + 4.0 * pr.b**2 * Ed[lj + 2, 0]
                if lj >= 2:
                    term = term + lj * (lj - 1) * Ed[lj - 2, 0]
                kin.append(term * root)
            tval = kin[0] * s1[1] * s1[2] + s1[0] * kin[1] * s1[2] + s1[0] * s1[1] * kin[2]
            T[i, j] = -0.5 * np.sum(pr.c * tval)
            herm = pr.hermite_expansion()
            L = sum(pr.li) + sum(pr.lj)
            acc = np.zeros_like(pr.p)
            for C, Z in zip(centers, charges):
                R = hermite_integrals(L, pr.p, pr.P - C)
                for (t, u, v), coef in herm.items():
                    acc = acc - Z * coef * R[t, u, v]
            V[i, j] = np.sum(pr.c * 2.0 * np.pi / pr.p * acc)
            S[j, i], T[j, i], V[j, i] = S[i, j], T[i, j], V[i, j]
    return S, T, V


def _eri(basis, centers):
    n = basis.n
    pairs = {}
    for i in range(n):
        for j in range(i + 1):
            pr = _Pair(basis, centers, i, j)
            pairs[(i, j)] = (pr, pr.hermite_expansion(), sum(pr.li) + sum(pr.lj))
    keys = list(pairs)
    eri = np.zeros((n, n, n, n))
    for ab_idx, ab in enumerate(keys):
        pab, hab, lab = pairs[ab]
        p = pab.p.ravel()[:, None]
        P = pab.P.reshape(-1, 3)[:, None, :]
        cab = pab.c.ravel()[:, None]
        for cd in keys[: ab_idx + 1]:
            pcd, hcd, lcd = pairs[cd]
            q = pcd.p.ravel()[None, :]
            Q = pcd.P.reshape(-1, 3)[None, :, :]
            alpha = p * q / (p + q)
            R = hermite_integrals(lab + lcd, alpha, P - Q)
            acc = 0.0
            for (t, u, v), e1 in hab.items():
                e1 = e1.ravel()[:, None]
                inner = 0.0
                for (tau, nu, phi), e2 in hcd.items():
                    sign = -1.0 if (tau + nu + phi) % 2 else 1.0
                    inner = inner + sign * e2.ravel()[None, :] * R[t + tau, u + nu, v + phi]
                acc = acc + e1 * inner
            pref = 2.0 * np.pi**2.5 / (p * q * np.sqrt(p + q))
            val = np.sum(cab * pcd.c.ravel()[None, :] * pref * acc)
            (i, j), (k, l) = ab, cd
            for a_, b_, c_, d_ in (
                (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
            ):
                eri[a_, b_, c_, d_] = val
    return eri


def nuclear_repulsion(mol: Molecule) -> float:
    R = mol.positions_bohr
    Z = mol.charges
    e = 0.0
    for a in range(len(Z)):
        for b in range(a):
            e += Z[a] * Z[b] / np.linalg.norm(R[a] - R[b])
    return float(e)


def compute_integrals(mol: Molecule, basis: BasisSet | None = None) -> IntegralSet:
    if basis is None:
        basis = sto3g(mol)
    if basis.n_atoms != len(mol.atoms):
        raise ValueError("basis was built for a different molecule")
    centers = mol.positions_bohr
    S, T, V = _one_electron(basis, centers, mol.charges)
    smallest = np.linalg.eigvalsh(S)[0]
    if smallest < LINDEP_THRESHOLD:
        raise ConditioningError(
            f"overlap matrix is linearly dependent (smallest eigenvalue {smallest:.3e})"
        )
    return IntegralSet(S, T, V, _eri(basis, centers), nuclear_repulsion(mol))
