"""
deephvi modules package.

Provides the differentiation tape, network ansatz, problem catalog, sampling,
energy functional, optimizer, training algorithms, evaluation and run management.
"""

from .evaluation import (
    ReferenceSolution,
    energy_norm,
    export_field,
    relative_error,
    write_export,
)
from .network import ParamVector, init_params
from .preset_manager import PresetManager
from .problems import ProblemSpec, get_problem
from .run_manager import RunManager
from .trainer import RunRecord, Trainer

__all__ = [
    "ParamVector",
    "PresetManager",
    "ProblemSpec",
    "ReferenceSolution",
    "RunManager",
    "RunRecord",
    "Trainer",
    "energy_norm",
    "export_field",
    "get_problem",
    "init_params",
    "relative_error",
    "write_export",
]
