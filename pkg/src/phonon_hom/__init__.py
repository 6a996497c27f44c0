"""Phonon-dephased Lambda-system photon sources and their two-photon interference."""

from .jump_space import build_extended_space
from .lambda_model import DressedSystem, LambdaParams, Mode, dressed_system
from .observables import (
    RunResult,
    SweepSpec,
    final_probabilities,
    hom_visibility,
    production_rate,
    rate_at_indistinguishability,
    run_once,
    sweep,
)
from .trajectories import sample_trajectories

__version__ = "0.1.0"

__all__ = [
    "DressedSystem",
    "LambdaParams",
    "Mode",
    "RunResult",
    "SweepSpec",
    "build_extended_space",
    "dressed_system",
    "final_probabilities",
    "hom_visibility",
    "production_rate",
    "rate_at_indistinguishability",
    "run_once",
    "sample_trajectories",
    "sweep",
]
