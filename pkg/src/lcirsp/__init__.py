"""lcirsp: lane-change intention recognition and status prediction.

Trajectory ingestion -> kinematic indicators -> labeled feature windows ->
TCN / LSTM / TCN-LSTM classifiers and single-/multi-task regressors ->
evaluation reports, on a from-scratch differentiable-tensor core.
"""

__version__ = "0.1.0"

from . import (
    evaluation,
    features,
    kinematics,
    labeling,
    models,
    nn_core,
    storage,
    synth,
    training,
    trajectory_io,
)

__all__ = [
    "evaluation", "features", "kinematics", "labeling", "models",
    "nn_core", "storage", "synth", "training", "trajectory_io",
]
