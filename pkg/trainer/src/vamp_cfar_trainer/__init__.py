"""Gradient-based training of unfolded-VAMP layer parameters.

Consumes the detection toolkit only through its external interfaces:
the JSON parameter-file schema and CLI-exported fixture batches (used
by the parity tests). The differentiable forward pass mirrors the
toolkit's recovery loop to < 1e-6.
"""

__version__ = "0.1.0"

from .config import TrainerConfigError, TrainingConfig, config_from_dict, load_config
from .data import Batch, generate_batch, generate_sample, load_fixtures
from .model import (
    TrainingDegenerateError,
    UnfoldedVampNet,
    export_params,
    load_params_file,
    matched_alpha,
    nmse_loss,
)
from .train import TrainResult, evaluate, evaluate_batch, train, validation_seed
