"""Run configuration: TOML loading, validation and hashing."""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qdmet.chem.basis import sto3g
from qdmet.chem.molecule import Molecule, parse_xyz
from qdmet.dmet import FragmentSpec, Solver, validate_partition
from qdmet.errors import ConfigError, QdmetError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

SCAN_KINDS = ("distance", "angle", "mu", "shots")
DEFAULT_R0 = 2.0
DEFAULT_PLATEAU = 5e-4  # Ha per Angstrom
DEFAULT_SHOTS = [2**k for k in range(6, 15)]
DEFAULT_SEEDS = [0, 1, 2, 3]


@dataclass
class ScanConfig:
    molecule: Molecule
    kind: str
    grid: list
    moving: tuple = ()
    anchor: tuple | None = None
    axis: tuple | None = None
    pivot: tuple | None = None
    pivot_atom: int | None = None
    normal: tuple = (0.0, 0.0, 1.0)
    r0: float | None = None
    plateau_threshold: float = DEFAULT_PLATEAU
    mu_grid: list = field(default_factory=list)
    fragmentations: dict = field(default_factory=dict)  # name -> list of fragment definitions
    solvers: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    mitigation: dict = field(default_factory=dict)
    shots: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    workers: int = 1
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    def fragment_specs(self, name: str, mol: Molecule | None = None) -> list[FragmentSpec]:
        """FragmentSpecs of one named fragmentation, atoms mapped to localized-orbital indices."""
        mol = self.molecule if mol is None else mol
        basis = sto3g(mol)
        specs = []
        for d in self.fragmentations[name]:
            if "orbitals" in d:
                orbs = [int(i) for i in d["orbitals"]]
            else:
                orbs = [i for a in d["atoms"] for i in basis.atom_functions(int(a))]
            solver = Solver.parse(d.get("solver", self.solvers.get("default", "fci")))
            active = d.get("active_space", self.solvers.get("active_space"))
            if isinstance(active, list):
                active = tuple(active)
            opts = dict(self.solvers.get(solver.value, {})) if isinstance(
                self.solvers.get(solver.value), dict) else {}
            specs.append(FragmentSpec(d["label"], tuple(orbs), solver, active, opts))
        validate_partition(specs, basis.n)
        return specs

    def solver_label(self, name: str) -> str:
        default = self.solvers.get("default", "fci")
        return "+".join(f"{d['label']}:{Solver.parse(d.get('solver', default)).value}"
                        for d in self.fragmentations[name])


def config_hash(raw: dict) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _strictly_monotone(values) -> bool:
    d = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(d > 0) or np.all(d < 0))


def _floats(values, what):
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a list of numbers") from None
    if not all(np.isfinite(out)):
        raise ConfigError(f"{what} contains non-finite values")
    return out


def _load_molecule(section, base: Path) -> Molecule:
    charge = int(section.get("charge", 0))
    if "xyz" in section:
        text = section["xyz"]
    elif "file" in section:
        path = Path(section["file"])
        path = path if path.is_absolute() else base / path
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read molecule file {path}: {exc}") from None
    elif "atoms" in section:
        return Molecule.from_atoms([(a[0], a[1:4]) for a in section["atoms"]], charge)
    else:
        raise ConfigError("[molecule] needs one of xyz, file or atoms")
    return parse_xyz(text, charge)


def parse_config(raw: dict, base_dir=".") -> ScanConfig:
    raw = copy.deepcopy(raw)
    base = Path(base_dir)
    unknown = set(raw) - {"molecule", "scan", "fragments", "solvers", "noise", "mitigation",
                          "shots", "output"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if "molecule" not in raw:
        raise ConfigError("missing [molecule] section")
    try:
        mol = _load_molecule(raw["molecule"], base)
    except ConfigError:
        raise
    except QdmetError as exc:
        raise ConfigError(f"[molecule]: {exc}") from exc
    scan = raw.get("scan", {})
    kind = scan.get("kind", "distance")
    if kind not in SCAN_KINDS:
        raise ConfigError(f"scan.kind must be one of {SCAN_KINDS}, got {kind!r}")
    moving = tuple(int(i) for i in scan.get("moving", ()))
    if any(i < 0 or i >= len(mol.atoms) for i in moving):
        raise ConfigError("scan.moving references atoms outside the molecule")
    grid = _floats(scan.get("grid", []), "scan.grid")
    r0 = scan.get("r0")
    if kind in ("distance", "angle"):
        if not grid:
            raise ConfigError("scan.grid must be nonempty")
        if not moving:
            raise ConfigError("geometric scans need a nonempty scan.moving group")
        if len(moving) == len(mol.atoms):
            raise ConfigError("scan.moving cannot contain every atom")
        if not _strictly_monotone(grid) and len(grid) > 1:
            raise ConfigError("scan.grid must be strictly monotone")
        if kind == "distance":
            r0 = DEFAULT_R0 if r0 is None else float(r0)
            if not any(abs(g - r0) < 1e-12 for g in grid):
                grid = sorted(grid + [r0], reverse=len(grid) > 1 and grid[0] > grid[-1])
        else:
            r0 = grid[0] if r0 is None else float(r0)
            if not any(abs(g - r0) < 1e-12 for g in grid):
                raise ConfigError("scan.r0 must be one of the angle grid values")
    elif grid and len(grid) > 1 and not _strictly_monotone(grid):
        raise ConfigError("scan.grid must be strictly monotone")
    mu_grid = _floats(scan.get("mu_grid", []), "scan.mu_grid")
    if kind == "mu":
        if not mu_grid:
            raise ConfigError("mu scans need a nonempty scan.mu_grid")
        if len(mu_grid) > 1 and not _strictly_monotone(mu_grid):
            raise ConfigError("scan.mu_grid must be strictly monotone")
    frags = {}
    for name, table in sorted(raw.get("fragments", {}).items()):
        if not isinstance(table, dict) or not table:
            raise ConfigError(f"fragmentation {name!r} must map labels to fragment tables")
        defs = []
        for label, d in sorted(table.items()):
            if not isinstance(d, dict) or not ({"atoms", "orbitals"} & set(d)):
                raise ConfigError(f"fragment {name}.{label} needs atoms or orbitals")
            defs.append(dict(d, label=label))
        frags[name] = defs
    if not frags:
        raise ConfigError("at least one fragmentation is required under [fragments]")
    shots = dict(raw.get("shots", {}))
    shots.setdefault("counts", DEFAULT_SHOTS)
    shots.setdefault("seeds", DEFAULT_SEEDS)
    geoms = shots.get("geometries")
    if geoms is None and grid:
        geoms = [DEFAULT_R0 if r0 is None else float(r0), grid[-1]]
    if geoms is not None:
        if len(geoms) != 2:
            raise ConfigError("shots.geometries must hold exactly two distances")
        geoms = _floats(geoms, "shots.geometries")
    shots["geometries"] = geoms
    if kind == "shots":
        if geoms is None:
            raise ConfigError("shots sweeps need shots.geometries or scan.grid")
        if not moving:
            raise ConfigError("shots sweeps need scan.moving to place the two geometries")
    def vec(key):
        v = scan.get(key)
        return None if v is None else tuple(_floats(v, f"scan.{key}"))
    cfg = ScanConfig(
        molecule=mol, kind=kind, grid=grid, moving=moving,
        anchor=tuple(int(i) for i in scan["anchor"]) if "anchor" in scan else None,
        axis=vec("axis"), pivot=vec("pivot"),
        pivot_atom=int(scan["pivot_atom"]) if "pivot_atom" in scan else None,
        normal=vec("normal") or (0.0, 0.0, 1.0),
        r0=None if r0 is None else float(r0),
        plateau_threshold=float(scan.get("plateau_threshold", DEFAULT_PLATEAU)),
        mu_grid=mu_grid, fragmentations=frags, solvers=dict(raw.get("solvers", {})),
        noise=dict(raw.get("noise", {})), mitigation=dict(raw.get("mitigation", {})),
        shots=shots, output=dict(raw.get("output", {})), workers=int(scan.get("workers", 1)),
        raw=raw,
    )
    # every fragmentation is validated before anything is solved
    for name in frags:
        try:
            cfg.fragment_specs(name)
        except QdmetError as exc:
            raise ConfigError(f"fragmentation {name!r}: {exc}") from exc
    return cfg


def load_config(path) -> ScanConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, path.parent)
