"""Command-line entry point: ``qdmet <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from qdmet.errors import QdmetError

EXIT_OK, EXIT_HARD, EXIT_PARTIAL = 0, 1, 2


def _cmd_scf(args):
    from qdmet.chem import compute_integrals
    from qdmet.chem.molecule import parse_xyz
    from qdmet.mf import run_fci, run_mp2, run_rhf
    from qdmet.mf.localize import transform_eri

    mol = parse_xyz(Path(args.xyz).read_text(), args.charge)
    ints = compute_integrals(mol)
    scf = run_rhf(ints, mol.n_electrons)
    out = {"e_rhf": scf.e_total, "converged": scf.converged, "n_iterations": scf.n_iterations,
           "n_basis": ints.n, "mo_energies": [float(e) for e in scf.mo_energies]}
    if args.mp2:
        out["e_mp2_corr"] = run_mp2(scf, ints)
    if args.fci:
        C = scf.mo_coeffs
        fci = run_fci(C.T @ ints.hcore @ C, transform_eri(ints.ERI, C), mol.n_electrons,
                      ints.E_nuc)
        out["e_fci"] = fci.energy
    print(json.dumps(out, indent=1))
    return EXIT_OK if scf.converged else EXIT_PARTIAL


def _write(result, config, args):
    from qdmet.scan import emit_results

    out = config.output
    directory = Path(args.out_dir or out.get("dir", "results"))
    name = out.get("name", result.kind)
    written = [emit_results(result, fmt, directory / f"{name}.{fmt}")
               for fmt in out.get("formats", ["csv", "json"])]
    for p in written:
        print(f"wrote {p}")


def _summarise(result):
    for r in result.sorted_rows():
        if r.kind in ("dissociation", "dmet", "mu_optimized", "shots_ideal"):
            de = "" if r.delta_e_ha is None else f" dE={r.delta_e_ha:+.8f}"
            e = "failed" if r.e_total_ha is None else f"E={r.e_total_ha:.10f}"
            geom = "" if r.geom_param is None else f"{r.geom_param:8.3f} "
            print(f"{r.kind:13s} {geom}{r.fragmentation:12s} {e}{de} {';'.join(r.flags)}")
    if result.summary:
        print(json.dumps(result.summary, indent=1, default=str))
    if result.n_failed:
        print(f"{result.n_failed} row(s) failed", file=sys.stderr)


def _run(args, runner):
    from qdmet.scan import load_config

    config = load_config(args.config)
    result = runner(config, args.workers) if args.workers is not None else runner(config)
    _summarise(result)
    _write(result, config, args)
    return EXIT_PARTIAL if result.n_failed else EXIT_OK


def _cmd_dmet(args):
    from qdmet.scan import run_single_point

    return _run(args, lambda cfg, *w: run_single_point(cfg))


def _cmd_scan(args):
    from qdmet.scan import run_config

    return _run(args, run_config)


def _cmd_mu_scan(args):
    from qdmet.scan import run_mu_scan

    return _run(args, run_mu_scan)


def _cmd_shots(args):
    from qdmet.scan import run_shots_sweep

    return _run(args, run_shots_sweep)


def _cmd_emit(args):
    from qdmet.scan import emit_results, load_results

    result = load_results(args.result)
    print(f"wrote {emit_results(result, args.format, args.out)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdmet", description="DMET with quantum-emulated fragment solvers")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scf", help="RHF (optionally MP2 / FCI) on an xyz file")
    s.add_argument("xyz")
    s.add_argument("--charge", type=int, default=0)
    s.add_argument("--mp2", action="store_true")
    s.add_argument("--fci", action="store_true")
    s.set_defaults(func=_cmd_scf)

    for name, func, text in (("dmet", _cmd_dmet, "single-point DMET for every fragmentation"),
                             ("scan", _cmd_scan, "run the scan named by scan.kind"),
                             ("mu-scan", _cmd_mu_scan, "local particle number over the mu grid"),
                             ("shots", _cmd_shots, "noisy shot sweep with SPAM and PMSV")):
        s = sub.add_parser(name, help=text)
        s.add_argument("config")
        s.add_argument("--out-dir", default=None, help="override output.dir")
        s.add_argument("--workers", type=int, default=None, help="parallel scan cells")
        s.set_defaults(func=func)

    s = sub.add_parser("emit", help="re-emit a saved JSON result")
    s.add_argument("result")
    s.add_argument("--format", choices=("csv", "json"), required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_emit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except QdmetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HARD
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HARD


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
