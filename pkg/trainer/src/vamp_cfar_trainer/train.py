"""Training loop: Adam on recovery NMSE with best-checkpoint export.

Training batches take trial-seed blocks ``seed + step * batch_size``;
the held-out validation batch sits in the block right after all
training seeds, so it is never trained on.  The exported file is the
best validation checkpoint, with the matched initialization itself as
the first candidate, so exported parameters never score worse than the
hand-tuned baseline on the validation batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .config import TrainerConfigError, TrainingConfig
from .data import Batch, generate_batch
from .model import UnfoldedVampNet, export_params, nmse_loss

__all__ = ["TrainResult", "evaluate", "evaluate_batch", "train"]


@dataclass
class TrainResult:
    init_val_nmse: float
    best_val_nmse: float
    best_step: int
    train_losses: list = field(default_factory=list)
    params: dict = None


def _to_tensors(batch: Batch):
    return (torch.from_numpy(batch.y_ri), torch.from_numpy(batch.a_ri),
            torch.from_numpy(batch.x0_ri))


def evaluate_batch(net: UnfoldedVampNet, batch: Batch) -> float:
    """Mean validation NMSE of the current parameters on a batch."""
    y, a, x0 = _to_tensors(batch)
    with torch.no_grad():
        _, xhat = net(y, a)
        return float(nmse_loss(xhat, x0))


def evaluate(cfg: TrainingConfig, net: UnfoldedVampNet, seed: int,
             batch_size=None) -> float:
    """Evaluate-only entry point (no optimizer step)."""
    cfg.validate()
    batch = generate_batch(cfg, seed, batch_size=batch_size)
    return evaluate_batch(net, batch)


def _train_span(cfg: TrainingConfig) -> int:
    stages = cfg.k_layers + 1 if cfg.layerwise else 1
    return cfg.seed + stages * cfg.steps * cfg.batch_size


def validation_seed(cfg: TrainingConfig) -> int:
    """First trial seed of the held-out block."""
    return _train_span(cfg)


def train(cfg: TrainingConfig, out_path=None) -> TrainResult:
    """Minimize mean recovery NMSE over the layer parameters.

    With ``layerwise`` set, each depth-truncated subnetwork first
    trains its own deepest layer for ``steps`` steps, then the full
    network fine-tunes end to end for another ``steps``.  Writes the
    best-validation parameter file to ``out_path`` when given.

    Raises
    ------
    TrainingDegenerateError
        If the forward pass degenerates (all-zero/all-pass denoiser or
        non-finite state); diagnostics name the layer.
    """
    cfg.validate()
    if cfg.k_targets == 0:
        raise TrainerConfigError("training needs k_targets >= 1 (NMSE undefined)")
    torch.manual_seed(cfg.seed)
    net = UnfoldedVampNet.matched(cfg.k_layers, cfg.k_targets / cfg.n, cfg.noise_var)
    val_batch = generate_batch(cfg, validation_seed(cfg), batch_size=cfg.val_batch_size)

    init_val = evaluate_batch(net, val_batch)
    best_val, best_step, best_params = init_val, -1, net.to_params()
    losses = []
    data_seed = cfg.seed

    def run_stage(step_count, depth, parameters):
        nonlocal data_seed, best_val, best_step, best_params
        optimizer = torch.optim.Adam(parameters, lr=cfg.learning_rate)
        for step in range(step_count):
            batch = generate_batch(cfg, data_seed)
            data_seed += cfg.batch_size
            y, a, x0 = _to_tensors(batch)
            optimizer.zero_grad()
            _, xhat = net(y, a, depth=depth)
            loss = nmse_loss(xhat, x0)
            if not torch.isfinite(loss):
                raise FloatingPointError(
                    f"training loss diverged (non-finite) at step {len(losses)}"
                )
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
            global_step = len(losses)
            if depth == net.k_layers and (
                global_step % cfg.checkpoint_every == 0 or step == step_count - 1
            ):
                val = evaluate_batch(net, val_batch)
                if val < best_val:
                    best_val, best_step = val, global_step
                    best_params = net.to_params()

    if cfg.layerwise:
        for depth in range(1, cfg.k_layers + 1):
            stage_params = [net.raw_alpha, net.raw_theta, net.raw_gamma_w]
            run_stage(cfg.steps, depth, stage_params)
        run_stage(cfg.steps, cfg.k_layers, net.parameters())
    else:
        run_stage(cfg.steps, cfg.k_layers, net.parameters())

    result = TrainResult(init_val_nmse=init_val, best_val_nmse=best_val,
                         best_step=best_step, train_losses=losses,
                         params=best_params)
    if out_path is not None:
        export_params(best_params, out_path)
    return result
