"""One-shot density matrix embedding theory.

The correlation potential is fixed at zero; only the global chemical
potential is adjusted so that fragment electron counts add up to the total.

Embedding orbitals are ordered fragment first, then bath, so fragment
indices of an :class:`EmbeddingProblem` are ``range(n_frag_orbitals)``.
All densities are spin summed.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from qdmet.errors import (
    ContractError,
    ConvergenceError,
    FragmentationError,
    RootNotBracketedError,
)
from qdmet.mf.fci import run_fci
from qdmet.mf.localize import LocalBasis, transform_eri
from qdmet.mf.mp2 import _cross_two_rdm, _mf_two_rdm, mp2_rdms
from qdmet.mf.rhf import coulomb_exchange, solve_rhf

logger = logging.getLogger(__name__)

BATH_EPS = 1e-10
PARITY_TOL = 0.1


class Solver(str, enum.Enum):
    MEAN_FIELD = "mf"
    MP2 = "mp2"
    FCI = "fci"
    VQE = "vqe"

    @classmethod
    def parse(cls, value) -> Solver:
        if isinstance(value, Solver):
            return value
        aliases = {"mean-field": "mf", "rhf": "mf", "hf": "mf", "uccsd": "vqe",
                   "uccsd-vqe": "vqe"}
        key = str(value).lower()
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class FragmentSpec:
    label: str
    orbital_indices: tuple[int, ...]
    solver: Solver = Solver.FCI
    active_space: tuple[int, int] | None = None  # (n_occ_active, n_virt_active)
    solver_options: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "orbital_indices", tuple(sorted(int(i) for i in self.orbital_indices)))
        object.__setattr__(self, "solver", Solver.parse(self.solver))


def validate_partition(fragments, n):
    seen = []
    for f in fragments:
        if not f.orbital_indices:
            raise FragmentationError(f"fragment {f.label!r} has no orbitals")
        seen.extend(f.orbital_indices)
    if sorted(seen) != list(range(n)):
        dup = sorted({i for i in seen if seen.count(i) > 1})
        missing = sorted(set(range(n)) - set(seen))
        raise FragmentationError(
            f"fragments must partition 0..{n - 1}: duplicated {dup}, missing {missing}"
        )
    labels = [f.label for f in fragments]
    if len(set(labels)) != len(labels):
        raise FragmentationError(f"fragment labels not unique: {labels}")


@dataclass(frozen=True, eq=False)
class Bath:
    transform: np.ndarray  # n_lo x (n_frag + n_bath)
    D_env: np.ndarray  # n_lo x n_lo, fully occupied environment
    n_elec_emb: int
    n_frag: int
    n_bath: int
    frag_indices: tuple[int, ...]
    bath_occupations: np.ndarray


def schmidt_bath(local: LocalBasis, frag: FragmentSpec, eps=BATH_EPS) -> Bath:
    n = local.n
    A = list(frag.orbital_indices)
    env = [i for i in range(n) if i not in set(A)]
    D = local.D_lo
    occ = np.zeros(0)
    bath_vecs = np.zeros((len(env), 0))
    core_vecs = np.zeros((len(env), 0))
    if env:
        occ, U = np.linalg.eigh(D[np.ix_(env, env)])
        fractional = (occ > eps) & (occ < 2.0 - eps)
        if fractional.sum() > len(A):
            # rank bound: at most |A| genuine bath orbitals; keep the most entangled
            dist = np.minimum(occ, 2.0 - occ)
            keep = np.argsort(-dist)[: len(A)]
            logger.warning("fragment %s: %d fractional environment orbitals, keeping %d",
                           frag.label, int(fractional.sum()), len(A))
            fractional = np.zeros_like(fractional)
            fractional[keep] = True
        bath_vecs = U[:, fractional]
        core_vecs = U[:, (~fractional) & (occ >= 2.0 - eps)]
        occ = occ[fractional]
    T = np.zeros((n, len(A) + bath_vecs.shape[1]))
    T[A, np.arange(len(A))] = 1.0
    T[np.ix_(env, range(len(A), T.shape[1]))] = bath_vecs
    C_core = np.zeros((n, core_vecs.shape[1]))
    C_core[env, :] = core_vecs
    D_env = 2.0 * C_core @ C_core.T
    n_proj = float(np.trace(T.T @ D @ T))
    n_even = 2 * int(round(n_proj / 2.0))
    if abs(n_proj - n_even) > PARITY_TOL:
        raise FragmentationError(
            f"fragment {frag.label!r}: embedding holds {n_proj:.4f} electrons, "
            "not close to an even integer (open-shell fragment+bath)"
        )
    return Bath(T, D_env, n_even, len(A), bath_vecs.shape[1], tuple(A), occ)


@dataclass(frozen=True, eq=False)
class EmbeddingProblem:
    h_emb: np.ndarray  # includes environment mean field and -mu on fragment diagonal
    V_emb: np.ndarray
    veff_env: np.ndarray  # environment J - K/2 in the embedding basis
    n_frag_orbitals: int
    n_bath_orbitals: int
    n_elec_emb: int
    e_core: float
    mu: float
    frag_index_map: tuple[int, ...]
    dm_mf: np.ndarray  # mean-field 1-RDM projected into the embedding space

    @property
    def n_orbitals(self) -> int:
        return self.h_emb.shape[0]

    @property
    def mu_term(self) -> np.ndarray:
        d = np.zeros(self.n_orbitals)
        d[: self.n_frag_orbitals] = -self.mu
        return d

    @property
    def h_nomu(self) -> np.ndarray:
        return self.h_emb - np.diag(self.mu_term)

    def with_mu(self, mu) -> EmbeddingProblem:
        h = self.h_nomu.copy()
        h[np.arange(self.n_frag_orbitals), np.arange(self.n_frag_orbitals)] -= mu
        return replace(self, h_emb=h, mu=float(mu))


def build_embedding_hamiltonian(local: LocalBasis, bath: Bath, mu=0.0) -> EmbeddingProblem:
    T = bath.transform
    veff_lo = coulomb_exchange(local.eri_lo, bath.D_env)
    veff = T.T @ veff_lo @ T
    h = T.T @ local.h_lo @ T + veff
    h = 0.5 * (h + h.T)
    e_core = float(np.sum((local.h_lo + 0.5 * veff_lo) * bath.D_env))
    prob = EmbeddingProblem(
        h_emb=h,
        V_emb=transform_eri(local.eri_lo, T),
        veff_env=0.5 * (veff + veff.T),
        n_frag_orbitals=bath.n_frag,
        n_bath_orbitals=bath.n_bath,
        n_elec_emb=bath.n_elec_emb,
        e_core=e_core,
        mu=0.0,
        frag_index_map=bath.frag_indices,
        dm_mf=T.T @ local.D_lo @ T,
    )
    return prob.with_mu(mu) if mu else prob


@dataclass(frozen=True, eq=False)
class FragmentSolution:
    energy_frag: float
    one_rdm: np.ndarray
    two_rdm: np.ndarray
    n_x: float
    e_embedding: float  # ground-state energy of the embedding Hamiltonian without -mu N
    converged: bool = True
    details: dict = field(default_factory=dict)


def fragment_energy(prob: EmbeddingProblem, P, G) -> float:
    """Democratic-mixing fragment energy; rows restricted to fragment orbitals.

    The -mu N term steers the charge only and is not part of the energy.
    """
    nf = prob.n_frag_orbitals
    h_half = prob.h_nomu - 0.5 * prob.veff_env
    one = np.sum(h_half[:nf] * P[:nf])
    two = 0.5 * np.sum(prob.V_emb[:nf] * G[:nf])
    return float(one + two)


def energy_weights(prob: EmbeddingProblem):
    """(W1, W2) such that fragment_energy = sum(W1 P) + 1/2 sum(W2 G)."""
    nf = prob.n_frag_orbitals
    W1 = np.zeros_like(prob.h_emb)
    W1[:nf] = (prob.h_nomu - 0.5 * prob.veff_env)[:nf]
    W2 = np.zeros_like(prob.V_emb)
    W2[:nf] = prob.V_emb[:nf]
    return W1, W2


def _embedding_rhf(prob, **opts):
    res = solve_rhf(prob.h_emb, prob.V_emb, prob.n_elec_emb, dm0=prob.dm_mf, **opts)
    if not res.converged:
        res = solve_rhf(prob.h_emb, prob.V_emb, prob.n_elec_emb, **opts)
    return res.require_converged()


def _full_energy(prob, P, G):
    return float(np.sum(prob.h_nomu * P) + 0.5 * np.sum(prob.V_emb * G))


def solve_fragment(prob: EmbeddingProblem, solver, active_space=None, options=None) -> FragmentSolution:
    solver = Solver.parse(solver)
    options = dict(options or {})
    details = {}
    converged = True
    if solver is Solver.MEAN_FIELD:
        scf = _embedding_rhf(prob)
        P = scf.density
        G = _mf_two_rdm(P)
    elif solver is Solver.MP2:
        scf = _embedding_rhf(prob)
        C = scf.mo_coeffs
        Pm, Gm = mp2_rdms(scf.mo_energies, transform_eri(prob.V_emb, C), scf.n_occ)
        P = C @ Pm @ C.T
        G = transform_eri(Gm, C.T)
    elif solver is Solver.FCI:
        if active_space is None:
            sol = run_fci(prob.h_emb, prob.V_emb, prob.n_elec_emb)
            P, G = sol.one_rdm, sol.two_rdm
            details["n_determinants"] = sol.n_determinants
        else:
            P, G, details = _active_space_solve(prob, active_space, _fci_kernel)
    elif solver is Solver.VQE:
        from qdmet.vqe import vqe_kernel

        if active_space is None:
            active_space = "all"
        P, G, details = _active_space_solve(prob, active_space, vqe_kernel, options)
        converged = bool(details.get("converged", True))
    else:  # pragma: no cover
        raise ContractError(f"unknown solver {solver}")
    P = 0.5 * (P + P.T)
    n_x = float(np.trace(P[: prob.n_frag_orbitals, : prob.n_frag_orbitals]))
    return FragmentSolution(
        energy_frag=fragment_energy(prob, P, G),
        one_rdm=P,
        two_rdm=G,
        n_x=n_x,
        e_embedding=_full_energy(prob, P, G),
        converged=converged,
        details=details,
    )


def _fci_kernel(h, V, n_elec, e_const, context, options=None):
    sol = run_fci(h, V, n_elec, e_const)
    return sol.one_rdm, sol.two_rdm, {"n_determinants": sol.n_determinants}


@dataclass(frozen=True, eq=False)
class ActiveContext:
    """Embedding-problem data handed to active-space kernels."""

    problem: EmbeddingProblem
    mo_coeffs: np.ndarray
    mo_energies: np.ndarray
    core: list
    active: list
    n_active_occ: int
    D_core_mo: np.ndarray


def _active_space_solve(prob, active_space, kernel, options=None):
    """Freeze orbitals of the embedding RHF and solve the active window.

    Frozen occupied orbitals enter 1- and 2-RDMs as a closed-shell
    determinant; frozen virtuals are empty.
    """
    from qdmet.vqe import select_active_space

    scf = _embedding_rhf(prob)
    C = scf.mo_coeffs
    n = C.shape[1]
    space = select_active_space(scf, active_space)
    core = list(space.frozen_occupied)
    act = list(space.active_occupied) + list(space.active_virtual)
    h_mo = C.T @ prob.h_emb @ C
    V_mo = transform_eri(prob.V_emb, C)
    D_core = np.zeros((n, n))
    D_core[core, core] = 2.0
    veff_core = coulomb_exchange(V_mo, D_core)
    e_frozen = float(np.sum((h_mo + 0.5 * veff_core) * D_core))
    h_act = (h_mo + veff_core)[np.ix_(act, act)]
    V_act = V_mo[np.ix_(act, act, act, act)]
    n_act_el = prob.n_elec_emb - 2 * len(core)
    ctx = ActiveContext(prob, C, scf.mo_energies, core, act,
                        len(space.active_occupied), D_core)
    P_act, G_act, details = kernel(h_act, V_act, n_act_el, e_frozen, ctx, options)
    P_a = np.zeros((n, n))
    P_a[np.ix_(act, act)] = P_act
    G_mo = np.zeros((n,) * 4)
    G_mo[np.ix_(act, act, act, act)] = G_act
    G_mo += _mf_two_rdm(D_core) + _cross_two_rdm(D_core, P_a)
    P_mo = D_core + P_a
    details["active_space"] = space
    return C @ P_mo @ C.T, transform_eri(G_mo, C.T), details


def active_energy_operator(ctx: ActiveContext):
    """Fragment-energy weights folded onto the active orbitals.

    Returns (w1, w2, const) with fragment_energy = const + sum(w1 P_act)
    + 1/2 sum(w2 G_act), valid for any active RDMs (frozen blocks fixed).
    """
    C = ctx.mo_coeffs
    W1, W2 = energy_weights(ctx.problem)
    W1 = C.T @ W1 @ C
    W2 = transform_eri(W2, C)
    Dc = ctx.D_core_mo
    act = ctx.active
    const = float(np.sum(W1 * Dc) + 0.5 * np.sum(W2 * _mf_two_rdm(Dc)))
    # 1/2 W2 . cross(Dc, Pa) written as a linear form in Pa
    lin = 0.5 * (np.einsum("ijkl,ij->kl", W2, Dc) + np.einsum("ijkl,kl->ij", W2, Dc)
                 - 0.5 * np.einsum("ijkl,il->kj", W2, Dc) - 0.5 * np.einsum("ijkl,kj->il", W2, Dc))
    w1 = (W1 + lin)[np.ix_(act, act)]
    w2 = W2[np.ix_(act, act, act, act)]
    return w1, w2, const


@dataclass(frozen=True, eq=False)
class DmetResult:
    e_total: float
    mu_global: float
    fragment_solutions: dict
    n_total: float
    residual: float
    E_nuc: float
    mu_table: list = field(default_factory=list)

    @property
    def fragment_energies(self) -> dict:
        return {k: s.energy_frag for k, s in self.fragment_solutions.items()}

    @property
    def fragment_electrons(self) -> dict:
        return {k: s.n_x for k, s in self.fragment_solutions.items()}

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.fragment_solutions.values())


class _Embedding:
    """Per-fragment embedding problems, cached at mu = 0, with memoized solves."""

    def __init__(self, local, fragments):
        validate_partition(fragments, local.n)
        self.local = local
        self.fragments = list(fragments)
        self.problems = {}
        for f in self.fragments:
            bath = schmidt_bath(local, f)
            self.problems[f.label] = build_embedding_hamiltonian(local, bath)
        self._cache = {}

    def solve(self, mu):
        key = float(mu)
        if key not in self._cache:
            sols = {}
            for f in self.fragments:
                prob = self.problems[f.label].with_mu(mu)
                try:
                    sols[f.label] = solve_fragment(prob, f.solver, f.active_space, f.solver_options)
                except Exception:
                    logger.error("solver failed for fragment %r at mu=%+.6f", f.label, mu)
                    raise
            self._cache[key] = sols
        return self._cache[key]

    def n_total(self, mu):
        return sum(s.n_x for s in self.solve(mu).values())


def mean_field_partition_trace(local, fragments):
    return sum(float(np.trace(local.D_lo[np.ix_(f.orbital_indices, f.orbital_indices)]))
               for f in fragments)


def optimize_chemical_potential(local: LocalBasis, fragments, N_e=None, tol=1e-6,
                                max_iter=100, bracket=0.5, max_bracket=4.0) -> DmetResult:
    N_e = local.n_electrons if N_e is None else N_e
    emb = _Embedding(local, fragments)
    table = []

    def resid(mu):
        n = emb.n_total(mu)
        table.append((float(mu), n))
        return n - N_e

    f0 = resid(0.0)
    if abs(f0) <= tol:
        mu = 0.0
    else:
        b = bracket
        lo, hi = -b, b
        flo, fhi = resid(lo), resid(hi)
        while flo * fhi > 0 and b < max_bracket:
            b *= 2.0
            lo, hi = -b, b
            flo, fhi = resid(lo), resid(hi)
        if flo * fhi > 0:
            raise RootNotBracketedError(
                f"no sign change of N(mu) - {N_e} within [-{b}, {b}] Ha; "
                + ", ".join(f"mu={m:+.4f}: N={n:.6f}" for m, n in sorted(table)),
                sorted(table),
            )
        # tighten the bracket with the mu = 0 point
        if f0 * flo < 0:
            hi = 0.0
        else:
            lo = 0.0
        mu = brentq(resid, lo, hi, xtol=1e-12, rtol=1e-14, maxiter=max_iter)
    sols = emb.solve(mu)
    n_total = sum(s.n_x for s in sols.values())
    residual = abs(n_total - N_e)
    if residual > tol:
        raise ConvergenceError(f"chemical potential search stalled: |N - N_e| = {residual:.3e}")
    e_total = sum(s.energy_frag for s in sols.values()) + local.E_nuc
    return DmetResult(float(e_total), float(mu), sols, float(n_total), float(residual),
                      local.E_nuc, sorted(table))


def particle_number_scan(local: LocalBasis, fragments, mu_grid):
    """Rows of (mu, {label: <N_x>}, sum) over a finite grid of chemical potentials."""
    emb = _Embedding(local, fragments)
    rows = []
    for mu in mu_grid:
        if not np.isfinite(mu):
            raise ContractError(f"non-finite mu {mu}")
        sols = emb.solve(mu)
        per = {k: s.n_x for k, s in sols.items()}
        rows.append((float(mu), per, float(sum(per.values()))))
    return rows
