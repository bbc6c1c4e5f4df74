"""Scenario files, seeded sweeps, real-data studies and the command line."""

from .realdata import CODON_RULES, MICE_RULES, RealDataReport, compare_methods, run_realdata
from .runner import (
    CSV_HEADER,
    ExperimentRecord,
    OraclePoint,
    derive_seed,
    emit_csv,
    emit_plotdata,
    plotdata,
    read_records,
    records_csv,
    run_oracle_curve,
    run_scenario,
)
from .scenario import RealDataScenario, Scenario, bundled_names, dump_scenario, load_scenario, parse_scenario

__all__ = [
    "CODON_RULES", "CSV_HEADER", "ExperimentRecord", "MICE_RULES", "OraclePoint", "RealDataReport",
    "RealDataScenario", "Scenario", "bundled_names", "compare_methods", "derive_seed", "dump_scenario",
    "emit_csv", "emit_plotdata", "load_scenario", "parse_scenario", "plotdata", "read_records",
    "records_csv", "run_oracle_curve", "run_realdata", "run_scenario",
]
