"""
deephvi - Deep learning solvers for elliptic hemivariational inequalities.

Trains residual network displacement fields for 2D frictional contact problems
by minimizing their nonsmooth energy, with basic, blockwise and adaptive
multigrid training algorithms.
"""

__version__ = "1.0.0"
__author__ = "deephvi Team"
__description__ = "Deep learning solvers for elliptic hemivariational inequalities"

from .config import Algorithm, ExperimentPreset, NetworkArch, TrainConfig
from .main import app
from .modules import PresetManager, RunManager, Trainer, get_problem

__all__ = [
    "app",
    "Algorithm",
    "ExperimentPreset",
    "NetworkArch",
    "PresetManager",
    "RunManager",
    "TrainConfig",
    "Trainer",
    "get_problem",
]
