"""Experiment drivers and their configuration and output formats."""
from qdmet.scan.config import ScanConfig, config_hash, load_config, parse_config
from qdmet.scan.driver import (
    local_basis,
    run_config,
    run_dissociation,
    run_mu_scan,
    run_shots_sweep,
    run_single_point,
)
from qdmet.scan.geometry import build_scan_geometries, rotate_group, translate_group
from qdmet.scan.results import CSV_COLUMNS, Row, ScanResult, emit_results, load_results

__all__ = [
    "ScanConfig", "config_hash", "load_config", "parse_config", "local_basis", "run_config",
    "run_dissociation", "run_mu_scan", "run_shots_sweep", "run_single_point",
    "build_scan_geometries", "rotate_group", "translate_group", "CSV_COLUMNS", "Row",
    "ScanResult", "emit_results", "load_results",
]
