"""SVR runaway workbench: radial power flow, SVR control and three time-domain engines."""

from svrsim.compare import ComparisonReport, compare
from svrsim.engines import ENGINES, RunResult, run_clf, run_dynamic, run_engine, run_qsts
from svrsim.netmodel import Feeder, bundled_path, load_feeder, parse_feeder
from svrsim.powerflow import PowerFlowSolution, SolverSettings, solve
from svrsim.scenarios import RampProfile, Scenario, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "ENGINES",
    "ComparisonReport",
    "Feeder",
    "PowerFlowSolution",
    "RampProfile",
    "RunResult",
    "Scenario",
    "SolverSettings",
    "bundled_path",
    "compare",
    "load_feeder",
    "load_scenario",
    "parse_feeder",
    "parse_scenario",
    "run_clf",
    "run_dynamic",
    "run_engine",
    "run_qsts",
    "solve",
]
