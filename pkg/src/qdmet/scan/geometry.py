"""Rigid-body geometry transforms for distance and angle scans."""
from __future__ import annotations

import numpy as np

from qdmet.chem.molecule import Molecule
from qdmet.errors import ContractError, GeometryError

MIN_SEPARATION = 0.3  # Angstrom between any moved and fixed atom


def _groups(mol: Molecule, moving):
    moving = sorted(set(moving))
    fixed = [i for i in range(len(mol.atoms)) if i not in moving]
    if not moving or not fixed:
        raise ContractError("rigid scans need nonempty moving and fixed groups")
    return moving, fixed


def _reference_points(pos, moving, fixed, anchor):
    if anchor is not None:
        return pos[anchor[0]], pos[anchor[1]]
    return pos[fixed].mean(axis=0), pos[moving].mean(axis=0)


def _check_overlap(pos, moving, fixed):
    d = np.linalg.norm(pos[moving][:, None, :] - pos[fixed][None, :, :], axis=-1)
    if d.min() < MIN_SEPARATION:
        raise GeometryError(f"moved atoms come within {d.min():.3f} A of fixed atoms")


def translate_group(mol: Molecule, moving, distance, axis=None, anchor=None) -> Molecule:
    """Move the group along ``axis`` so its separation projected on the axis equals ``distance``."""
    moving, fixed = _groups(mol, moving)
    pos = mol.positions.copy()
    a, b = _reference_points(pos, moving, fixed, anchor)
    if axis is None:
        axis = b - a
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        raise GeometryError("scan axis is undefined (groups share a reference point)")
    axis = axis / norm
    shift = (float(distance) - float(np.dot(b - a, axis))) * axis
    pos[moving] += shift
    _check_overlap(pos, moving, fixed)
    return mol.with_positions(pos)


def rotation_matrix(normal, angle_deg) -> np.ndarray:
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    t = np.deg2rad(angle_deg)
    K = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + np.sin(t) * K + (1 - np.cos(t)) * (K @ K)


def rotate_group(mol: Molecule, moving, angle_deg, pivot=None, normal=(0, 0, 1),
                 anchor=None) -> Molecule:
    """Rotate the group in-plane about ``pivot`` (default: fixed-group reference point)."""
    moving, fixed = _groups(mol, moving)
    pos = mol.positions.copy()
    if pivot is None:
        pivot = _reference_points(pos, moving, fixed, anchor)[0]
    pivot = np.asarray(pivot, dtype=float)
    R = rotation_matrix(normal, angle_deg)
    pos[moving] = (pos[moving] - pivot) @ R.T + pivot
    _check_overlap(pos, moving, fixed)
    return mol.with_positions(pos)


def build_scan_geometries(config, values=None) -> list[tuple[float, Molecule]]:
    """(grid value, geometry) pairs of a distance or angle scan."""
    values = config.grid if values is None else values
    mol = config.molecule
    out = []
    for v in values:
        if config.kind == "angle":
            pivot = config.pivot
            if pivot is None and config.pivot_atom is not None:
                pivot = mol.positions[config.pivot_atom]
            g = rotate_group(mol, config.moving, v, pivot, config.normal, config.anchor)
        else:
            g = translate_group(mol, config.moving, v, config.axis, config.anchor)
        out.append((float(v), g))
    return out
