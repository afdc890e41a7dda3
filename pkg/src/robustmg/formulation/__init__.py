"""Constraint builders for the master and recourse models."""

from .indexer import MASTER, RECOURSE, ModelBuilder, VariableIndexer, render_key
from .master import (CutRecord, MasterModel, MasterOptions, MasterSolution, add_cut, build_master,
                     extract_master_solution, nominal_loads, solve_master)
from .power_flow import PowerFlowOptions, build_power_flow, lindist_matrices, polygon_directions
from .subproblem import NOMINAL, ExtremeScenario, SubproblemModel, build_subproblem, extract_cut
from .topology import block_cycles, build_coloring, build_generation_limits, build_radiality

__all__ = [
    "MASTER", "RECOURSE", "ModelBuilder", "VariableIndexer", "render_key",
    "CutRecord", "MasterModel", "MasterOptions", "MasterSolution", "add_cut", "build_master",
    "extract_master_solution", "nominal_loads", "solve_master",
    "PowerFlowOptions", "build_power_flow", "lindist_matrices", "polygon_directions",
    "NOMINAL", "ExtremeScenario", "SubproblemModel", "build_subproblem", "extract_cut",
    "block_cycles", "build_coloring", "build_generation_limits", "build_radiality",
]
