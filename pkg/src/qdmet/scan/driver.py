"""Scan drivers: dissociation curves, chemical-potential scans and shot sweeps."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations

import numpy as np

from qdmet.chem.integrals import compute_integrals
from qdmet.dmet import optimize_chemical_potential, particle_number_scan
from qdmet.errors import ConfigError, EmptyFilterError, QdmetError
from qdmet.mf.localize import lowdin_localize
from qdmet.mf.rhf import run_rhf
from qdmet.mitigation import calibrate_spam, mitigated_energy
from qdmet.qsim.noise import NoiseModel
from qdmet.scan.geometry import build_scan_geometries
from qdmet.scan.results import Row, ScanResult
from qdmet.vqe import NoisyEvaluator

logger = logging.getLogger(__name__)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def local_basis(mol):
    ints = compute_integrals(mol)
    scf = run_rhf(ints, mol.n_electrons)
    scf.require_converged()
    return lowdin_localize(ints, scf)


def _error_flag(exc) -> str:
    return f"error:{type(exc).__name__}:{exc}".replace("\n", " ")


def _dmet_row(config, name, param, mol, local, kind):
    t0 = time.perf_counter()
    base = dict(kind=kind, geom_param=param, fragmentation=name,
                solver=config.solver_label(name), config_hash=config.config_hash)
    try:
        specs = config.fragment_specs(name, mol)
        res = optimize_chemical_potential(local, specs)
    except QdmetError as exc:
        logger.warning("%s at %s failed: %s", name, param, exc)
        return Row(**base, flags=[_error_flag(exc)], timing_s=time.perf_counter() - t0), None
    flags = [] if res.converged else ["unconverged"]
    row = Row(**base, e_total_ha=res.e_total, mu_ha=res.mu_global,
              n_frag=dict(sorted(res.fragment_electrons.items())), flags=flags,
              timing_s=time.perf_counter() - t0)
    return row, res


def run_single_point(config) -> ScanResult:
    """One-shot DMET with mu optimization on the input geometry, every fragmentation."""
    local = local_basis(config.molecule)
    rows = [_dmet_row(config, name, None, config.molecule, local, "dmet")[0]
            for name in config.fragmentations]
    return ScanResult("dmet", rows, config.raw, config.config_hash)


def run_dissociation(config, workers=None) -> ScanResult:
    """DMET energies over a rigid distance or angle grid with dE relative to r0."""
    if config.kind not in ("distance", "angle"):
        raise ConfigError(f"dissociation scans need kind distance or angle, not {config.kind}")
    geoms = build_scan_geometries(config)
    workers = config.workers if workers is None else workers

    def cell(item):
        param, mol = item
        try:
            local = local_basis(mol)
        except QdmetError as exc:
            return [Row("dissociation", param, name, config.solver_label(name),
                        flags=[_error_flag(exc)], config_hash=config.config_hash)
                    for name in config.fragmentations]
        return [_dmet_row(config, name, param, mol, local, "dissociation")[0]
                for name in config.fragmentations]

    rows = [r for block in _map(cell, geoms, workers) for r in block]
    summary = {"plateau": {}, "r0": config.r0}
    extra = []
    for name in config.fragmentations:
        frows = sorted((r for r in rows if r.fragmentation == name), key=lambda r: r.geom_param)
        ref = [r for r in frows if abs(r.geom_param - config.r0) < 1e-12 and not r.failed]
        if ref:
            e_ref = ref[0].e_total_ha
            for r in frows:
                if not r.failed:
                    r.delta_e_ha = r.e_total_ha - e_ref
        else:
            for r in frows:
                r.flags.append("no-reference")
        ok = [r for r in frows if r.delta_e_ha is not None]
        if len(ok) >= 2:
            a, b = ok[-2], ok[-1]
            grad = abs(b.delta_e_ha - a.delta_e_ha) / abs(b.geom_param - a.geom_param)
            plateau = grad < config.plateau_threshold
            summary["plateau"][name] = {"gradient_ha_per_unit": grad, "plateau": plateau}
            if plateau:
                b.flags.append("plateau")
        ok_n = [r for r in frows if r.n_frag is not None]
        if len(ok_n) >= 2:
            near, far = ok_n[0], ok_n[-1]
            dn = {k: far.n_frag[k] - near.n_frag[k] for k in sorted(far.n_frag)}
            extra.append(Row("charge_transfer", far.geom_param, name, far.solver,
                             n_frag=dn, flags=[f"from={near.geom_param!r}"],
                             config_hash=config.config_hash))
            summary.setdefault("charge_transfer_sum", {})[name] = float(sum(dn.values()))
    return ScanResult("dissociation", rows + extra, config.raw, config.config_hash, summary)


CROSSING_TOL = 1e-8


def _crossings(curves, mu_grid, tol=CROSSING_TOL):
    """Linear-interpolated mu where pairs of N(mu) curves change order.

    Differences within ``tol`` count as coincident, not as crossings, so
    curves that agree to round-off do not report spurious crossings.
    """
    out = []
    mu = np.asarray(mu_grid)
    for (ka, a), (kb, b) in combinations(sorted(curves.items()), 2):
        d = np.asarray(a) - np.asarray(b)
        idx = [i for i in range(len(d)) if abs(d[i]) > tol]
        for i, j in zip(idx, idx[1:]):
            if d[i] * d[j] < 0:
                t = d[i] / (d[i] - d[j])
                out.append((ka, kb, float(mu[i] + t * (mu[j] - mu[i]))))
    return out


def run_mu_scan(config, workers=None) -> ScanResult:
    """Local particle numbers over the mu grid, plus the optimized-mu point and crossings."""
    if config.grid and config.moving:
        geoms = build_scan_geometries(config)
    else:
        geoms = [(None, config.molecule)]
    workers = config.workers if workers is None else workers

    def cell(item):
        param, mol = item
        rows = []
        curves = {}
        try:
            local = local_basis(mol)
        except QdmetError as exc:
            return [Row("mu_scan", param, name, config.solver_label(name),
                        flags=[_error_flag(exc)], config_hash=config.config_hash)
                    for name in config.fragmentations], curves
        for name in config.fragmentations:
            solver = config.solver_label(name)
            try:
                specs = config.fragment_specs(name, mol)
                table = particle_number_scan(local, specs, config.mu_grid)
            except QdmetError as exc:
                rows.append(Row("mu_scan", param, name, solver, flags=[_error_flag(exc)],
                                config_hash=config.config_hash))
                continue
            for mu, per, total in table:
                rows.append(Row("mu_scan", param, name, solver, mu_ha=mu,
                                n_frag=dict(sorted(per.items())), flags=[f"sum={total!r}"],
                                config_hash=config.config_hash))
            for label in sorted(table[0][1]):
                curves[(name, label, param)] = [per[label] for _, per, _ in table]
            opt, _ = _dmet_row(config, name, param, mol, local, "mu_optimized")
            rows.append(opt)
        return rows, curves

    rows = []
    curves = {}
    for r, c in _map(cell, geoms, workers):
        rows.extend(r)
        curves.update(c)
    summary = {"crossings": []}
    for name in config.fragmentations:
        sub = {f"{lab}@{p}": v for (n, lab, p), v in curves.items() if n == name}
        for ka, kb, mu in _crossings(sub, config.mu_grid):
            rows.append(Row("mu_crossing", None, name, config.solver_label(name), mu_ha=mu,
                            flags=[ka, kb], config_hash=config.config_hash))
            summary["crossings"].append({"fragmentation": name, "curves": [ka, kb], "mu": mu})
    return ScanResult("mu", rows, config.raw, config.config_hash, summary)


def _seed_rng(*entropy):
    return np.random.default_rng(np.random.SeedSequence([int(e) for e in entropy]))


def run_shots_sweep(config, workers=None) -> ScanResult:
    """Noisy fixed-parameter re-evaluation of converged VQE fragments at two geometries.

    Every (seed, n_shots) cell draws one set of raw shots per geometry and
    fragment; the raw, SPAM and PMSV estimates all come from those same shots.
    """
    shots = config.shots
    g_values = shots.get("geometries")
    if g_values is None or not config.moving:
        raise ConfigError("shots sweeps need two geometries and a moving group")
    counts = [int(c) for c in shots["counts"]]
    seeds = [int(s) for s in shots["seeds"]]
    schemes = ["raw"] + [s.lower() for s in config.mitigation.get("schemes", ["spam", "pmsv"])]
    cal_shots = int(config.mitigation.get("calibration_shots", 10_000))
    workers = config.workers if workers is None else workers
    geoms = build_scan_geometries(config, g_values)
    rows = []
    summary = {"ideal_delta_e": {}}
    for name in config.fragmentations:
        solver = config.solver_label(name)
        ideal = []
        for gi, (param, mol) in enumerate(geoms):
            row, res = _dmet_row(config, name, param, mol, local_basis(mol), "shots_ideal")
            rows.append(row)
            ideal.append(res)
        if any(r is None for r in ideal):
            continue
        e_ideal = [r.e_total for r in ideal]
        summary["ideal_delta_e"][name] = e_ideal[1] - e_ideal[0]
        # per geometry: fixed contribution plus one evaluator per VQE fragment
        setups = []
        for res in ideal:
            fixed = res.E_nuc
            evals = []
            for label, sol in sorted(res.fragment_solutions.items()):
                d = sol.details
                if "vqe" not in d:
                    fixed += sol.energy_frag
                    continue
                op = d["energy_operator"]
                noise = NoiseModel.from_config(config.noise, op.n_qubits)
                ev = NoisyEvaluator(op, d["ansatz"], d["vqe"].theta_opt, noise)
                evals.append((label, ev, d["n_elec_active"], noise))
            setups.append((fixed, evals))
        if not any(evals for _, evals in setups):
            raise ConfigError(f"fragmentation {name!r} has no VQE fragment to re-evaluate")

        def cell(job):
            seed, n_shots = job
            totals = {s: [] for s in schemes}
            flags = {s: [] for s in schemes}
            for gi, (fixed, evals) in enumerate(setups):
                acc = {s: fixed for s in schemes}
                for fi, (label, ev, n_el, noise) in enumerate(evals):
                    tables = ev.sample(n_shots, _seed_rng(seed, gi, fi, n_shots))
                    cal = calibrate_spam(noise, ev.ansatz.n_qubits, cal_shots,
                                         _seed_rng(seed, gi, fi, 0)) if "spam" in schemes else None
                    for s in schemes:
                        if acc[s] is None:
                            continue
                        try:
                            rep = mitigated_energy(ev.problem, ev.groups, tables,
                                                   "none" if s == "raw" else s, cal, n_el, seed)
                        except EmptyFilterError as exc:
                            flags[s].append(_error_flag(exc))
                            acc[s] = None
                            continue
                        acc[s] += rep.mitigated_energy
                        for f in rep.flags:
                            if f not in flags[s]:
                                flags[s].append(f)
                        if rep.shots_kept is not None:
                            flags[s].append(f"kept[{gi}:{label}]={rep.shots_kept}/{rep.filtered_shots}")
                for s in schemes:
                    totals[s].append(acc[s])
            out = []
            for s in schemes:
                e = totals[s]
                ok = all(v is not None for v in e)
                out.append(Row("shots", g_values[1], name, solver,
                               e_total_ha=e[1] if ok else None,
                               delta_e_ha=(e[1] - e[0]) if ok else None,
                               mu_ha=ideal[1].mu_global, seed=seed, scheme=s, n_shots=n_shots,
                               flags=flags[s], config_hash=config.config_hash))
            return out

        jobs = [(s, n) for s in seeds for n in counts]
        for block in _map(cell, jobs, workers):
            rows.extend(block)
    return ScanResult("shots", rows, config.raw, config.config_hash, summary)


def run_config(config, workers=None) -> ScanResult:
    if config.kind in ("distance", "angle"):
        return run_dissociation(config, workers)
    if config.kind == "mu":
        return run_mu_scan(config, workers)
    return run_shots_sweep(config, workers)



