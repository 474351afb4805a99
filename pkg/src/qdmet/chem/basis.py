"""Embedded STO-3G basis for H through Ar.

Every STO-3G shell is a fixed three-primitive least-squares fit to a Slater
function with unit exponent, rescaled by the element's Slater exponent
squared.  Only the universal fits and the per-element exponents are stored.

Normalization convention: each primitive carries its own Cartesian
normalization, and the contraction is then rescaled so the contracted
function has unit self-overlap.  p shells use the same constant for x, y, z.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qdmet.chem.molecule import Molecule
from qdmet.errors import GeometryError

# Unit-exponent expansions (exponents, s coefficients, p coefficients).
_FIT_1S = (
    (2.227660584, 0.4057711562, 0.1098175104),
    (0.1543289673, 0.5353281423, 0.4446345422),
    None,
)
_FIT_2SP = (
    (0.9942027296, 0.2310313333, 0.07513856000),
    (-0.09996722919, 0.3995128261, 0.7001154689),
    (0.1559162750, 0.6076837186, 0.3919573931),
)
_FIT_3SP = (
    (0.4828540806, 0.1347150629, 0.05272656258),
    (-0.2196203690, 0.2255954336, 0.9003984260),
    (0.01058760429, 0.5951670053, 0.4620010120),
)

# Slater exponents per shell: (1s, 2sp, 3sp)
_ZETA = {
    "H": (1.24,), "He": (1.69,),
    "Li": (2.69, 0.80), "Be": (3.68, 1.15), "B": (4.68, 1.50), "C": (5.67, 1.72),
    "N": (6.67, 1.95), "O": (7.66, 2.25), "F": (8.65, 2.55), "Ne": (9.64, 2.88),
    "Na": (10.61, 3.48, 1.75), "Mg": (11.59, 3.90, 1.70), "Al": (12.56, 4.36, 1.70),
    "Si": (13.53, 4.83, 1.75), "P": (14.50, 5.31, 1.90), "S": (15.47, 5.79, 2.05),
    "Cl": (16.43, 6.26, 2.10), "Ar": (17.40, 6.74, 2.33),
}

_CARTESIAN = {0: ((0, 0, 0),), 1: ((1, 0, 0), (0, 1, 0), (0, 0, 1))}


@dataclass(frozen=True)
class Shell:
    center: int
    l: int
    exponents: tuple[float, ...]
    coefficients: tuple[float, ...]
    norm: float  # contracted normalization on top of primitive normalization


@dataclass(frozen=True)
class BasisFunction:
    shell: int
    center: int
    powers: tuple[int, int, int]


@dataclass(frozen=True)
class BasisSet:
    shells: tuple[Shell, ...]
    functions: tuple[BasisFunction, ...]
    n_atoms: int

    @property
    def n(self) -> int:
        return len(self.functions)

    def atom_functions(self, atom: int) -> list[int]:
        return [i for i, f in enumerate(self.functions) if f.center == atom]


def primitive_norm(alpha, l):
    """Cartesian Gaussian normalization for l <= 1 (same for every component)."""
    return (2.0 * alpha / np.pi) ** 0.75 * (4.0 * alpha) ** (l / 2.0)


def _contracted_norm(exps, coefs, l):
    exps = np.asarray(exps)
    c = np.asarray(coefs) * primitive_norm(exps, l)
    p = exps[:, None] + exps[None, :]
    # one Cartesian component of self-overlap, unnormalized primitives
    ovl = (np.pi / p) ** 1.5 * (1.0 / (2.0 * p)) ** l
    return 1.0 / np.sqrt(c @ ovl @ c)


def _element_shells(symbol):
    try:
        zetas = _ZETA[symbol]
    except KeyError:
        raise GeometryError(f"no STO-3G data for element {symbol!r}") from None
    fits = (_FIT_1S, _FIT_2SP, _FIT_3SP)
    out = []
    for zeta, (base, cs, cp) in zip(zetas, fits):
        exps = tuple(a * zeta**2 for a in base)
        out.append((0, exps, cs))
        if cp is not None:
            out.append((1, exps, cp))
    return out


def sto3g(mol: Molecule) -> BasisSet:
    shells, funcs = [], []
    for ia, atom in enumerate(mol.atoms):
        for l, exps, coefs in _element_shells(atom.symbol):
            norm = _contracted_norm(exps, coefs, l)
            shells.append(Shell(ia, l, exps, tuple(coefs), float(norm)))
            for powers in _CARTESIAN[l]:
                funcs.append(BasisFunction(len(shells) - 1, ia, powers))
    return BasisSet(tuple(shells), tuple(funcs), len(mol.atoms))
