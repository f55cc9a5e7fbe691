"""Recurrent ternary logic gate networks as hardware-ready monitors for bounded STL."""

from .cell import CellConfig, SoftCell, TrainConfig, build_cell, train, unroll
from .circuit import HardCircuit, InputMask, MonitorState, circuit_step, run
from .experiment import ExperimentConfig, run_experiment
from .harden import DistillConfig, DistillReport, harden
from .metrics import EvalReport, accuracy, lattice_compliance, preservation
from .stl import parse_formula, robustness_trace, state_complexity
from .ternary import GateTable, Trit, census

__version__ = "0.1.0"

__all__ = [
    "CellConfig",
    "DistillConfig",
    "DistillReport",
    "EvalReport",
    "ExperimentConfig",
    "GateTable",
    "HardCircuit",
    "InputMask",
    "MonitorState",
    "SoftCell",
    "TrainConfig",
    "Trit",
    "accuracy",
    "build_cell",
    "census",
    "circuit_step",
    "harden",
    "lattice_compliance",
    "parse_formula",
    "preservation",
    "robustness_trace",
    "run",
    "run_experiment",
    "state_complexity",
    "train",
    "unroll",
]
