"""Molecular geometry and XYZ parsing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qdmet.errors import GeometryError, ParseError

ANGSTROM_TO_BOHR = 1.8897259886

ELEMENTS = (
    "H", "He",
    "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar",
)
ATOMIC_NUMBER = {sym: z for z, sym in enumerate(ELEMENTS, start=1)}


@dataclass(frozen=True)
class Atom:
    symbol: str
    Z: int
    position: tuple[float, float, float]  # Angstrom


@dataclass(frozen=True)
class Molecule:
    atoms: tuple[Atom, ...]
    charge: int = 0

    def __post_init__(self):
        if not self.atoms:
            raise GeometryError("molecule has no atoms")
        pos = self.positions
        for i in range(len(pos)):
            for j in range(i):
                if np.linalg.norm(pos[i] - pos[j]) < 1e-8:
                    raise GeometryError(f"atoms {j} and {i} share a position")
        if self.n_electrons < 1:
            raise GeometryError(f"charge {self.charge} leaves no electrons")

    @classmethod
    def from_atoms(cls, entries, charge=0) -> Molecule:
        """Build from ``[(symbol, (x, y, z)), ...]`` in Angstrom."""
        atoms = []
        for sym, xyz in entries:
            sym = _normalize_symbol(sym)
            if sym not in ATOMIC_NUMBER:
                raise GeometryError(f"unknown element {sym!r}")
            atoms.append(Atom(sym, ATOMIC_NUMBER[sym], tuple(float(c) for c in xyz)))
        return cls(tuple(atoms), charge)

    @property
    def n_electrons(self) -> int:
        return sum(a.Z for a in self.atoms) - self.charge

    @property
    def positions(self) -> np.ndarray:
        """Atom positions in Angstrom, shape (natm, 3)."""
        return np.array([a.position for a in self.atoms], dtype=float)

    @property
    def positions_bohr(self) -> np.ndarray:
        return self.positions * ANGSTROM_TO_BOHR

    @property
    def charges(self) -> np.ndarray:
        return np.array([a.Z for a in self.atoms], dtype=float)

    def with_positions(self, positions) -> Molecule:
        positions = np.asarray(positions, dtype=float)
        atoms = tuple(
            Atom(a.symbol, a.Z, tuple(float(c) for c in p))
            for a, p in zip(self.atoms, positions)
        )
        return Molecule(atoms, self.charge)

    def to_xyz(self, comment="") -> str:
        lines = [str(len(self.atoms)), comment]
        for a in self.atoms:
            x, y, z = a.position
            lines.append(f"{a.symbol} {x:.10f} {y:.10f} {z:.10f}")
        return "\n".join(lines) + "\n"


def _normalize_symbol(sym: str) -> str:
    return sym[:1].upper() + sym[1:].lower()


def parse_xyz(text: str, charge: int = 0) -> Molecule:
    """Parse a standard XYZ block (count line, comment line, atom lines)."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("line 1: empty input")
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"line 1: expected atom count, got {lines[0]!r}") from None
    body = [(n, ln) for n, ln in enumerate(lines[2:], start=3) if ln.strip()]
    if len(body) != count:
        raise ParseError(
            f"line 1: atom count {count} does not match {len(body)} atom lines"
        )
    entries = []
    for n, ln in body:
        fields = ln.split()
        if len(fields) < 4:
            raise ParseError(f"line {n}: expected 'symbol x y z', got {ln!r}")
        sym = _normalize_symbol(fields[0])
        if sym not in ATOMIC_NUMBER:
            raise ParseError(f"line {n}: unknown element {fields[0]!r}")
        try:
            xyz = tuple(float(v) for v in fields[1:4])
        except ValueError:
            raise ParseError(f"line {n}: bad coordinate in {ln!r}") from None
        entries.append((sym, xyz))
    try:
        return Molecule.from_atoms(entries, charge)
    except GeometryError as exc:
        raise ParseError(str(exc)) from exc
