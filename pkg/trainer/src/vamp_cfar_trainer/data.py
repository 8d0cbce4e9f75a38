"""Synthetic batch generation mirroring the detection toolkit.

The toolkit's conventions, reproduced here so training data matches the
deployment data exactly (and verified against CLI-exported fixtures):

* observation matrix: ``m`` distinct rows of the unitary n-point DFT
  (entries ``exp(-2j*pi*k*l/n) / sqrt(n)``), row indices drawn sorted
  without replacement from ``default_rng(seed)``;
* scene: ``k`` sorted random support bins, target magnitude
  ``sqrt(noise_var * 10**(snr_db/10))``, uniform random phases;
* measurement: ``y = A x + noise`` with i.i.d. real/imaginary noise
  components of variance ``noise_var / 2`` each;
* real stacking: vectors ``[Re; Im]``, matrices
  ``[[Re, -Im], [Im, Re]]``;
* sample ``t`` of a batch seeded with ``seed`` derives its matrix,
  scene and noise streams from ``SeedSequence((seed + t, j))`` for
  ``j = 0, 1, 2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .config import TrainingConfig

__all__ = ["Batch", "generate_sample", "generate_batch", "load_fixtures"]


@dataclass(frozen=True)
class Batch:
    """Stacked per-sample arrays ready for the differentiable forward."""

    a_ri: np.ndarray    # (B, 2m, 2n)
    y_ri: np.ndarray    # (B, 2m)
    x0_ri: np.ndarray   # (B, 2n)
    selected_rows: list  # per-sample DFT row indices
    seeds: list


def _stack_vector(v: np.ndarray) -> np.ndarray:
    return np.concatenate([np.real(v), np.imag(v)]).astype(float)


def _stack_matrix(a: np.ndarray) -> np.ndarray:
    re, im = np.real(a), np.imag(a)
    return np.block([[re, -im], [im, re]])


def generate_sample(cfg: TrainingConfig, seed: int):
    """One (A_ri, y_ri, x0_ri, rows) tuple for trial seed ``seed``."""
    mat_rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    scene_rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    noise_rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))

    rows = np.sort(mat_rng.choice(cfg.n, size=cfg.m, replace=False))
    cols = np.arange(cfg.n)
    a = np.exp(-2j * np.pi * np.outer(rows, cols) / cfg.n) / np.sqrt(cfg.n)

    x0 = np.zeros(cfg.n, dtype=complex)
    if cfg.k_targets > 0:
        support = np.sort(scene_rng.choice(cfg.n, size=cfg.k_targets, replace=False))
        magnitude = np.sqrt(cfg.noise_var * 10.0 ** (cfg.snr_db / 10.0))
        phases = scene_rng.uniform(0.0, 2.0 * np.pi, size=cfg.k_targets)
        x0[support] = magnitude * np.exp(1j * phases)

    y = a @ x0
    if cfg.noise_var > 0:
        sigma = np.sqrt(cfg.noise_var / 2.0)
        y = y + sigma * noise_rng.standard_normal(cfg.m) \
              + 1j * sigma * noise_rng.standard_normal(cfg.m)
    return _stack_matrix(a), _stack_vector(y), _stack_vector(x0), rows


def generate_batch(cfg: TrainingConfig, seed: int, batch_size=None) -> Batch:
    """Batch of ``batch_size`` samples with trial seeds ``seed + t``."""
    size = cfg.batch_size if batch_size is None else batch_size
    mats, ys, x0s, rows_list, seeds = [], [], [], [], []
    for t in range(size):
        a_ri, y_ri, x0_ri, rows = generate_sample(cfg, seed + t)
        mats.append(a_ri)
        ys.append(y_ri)
        x0s.append(x0_ri)
        rows_list.append(rows)
        seeds.append(seed + t)
    return Batch(a_ri=np.stack(mats), y_ri=np.stack(ys), x0_ri=np.stack(x0s),
                 selected_rows=rows_list, seeds=seeds)


def load_fixtures(path) -> dict:
    """Parse a fixture CSV exported by the detection toolkit's CLI.

    Returns ``{sample: {"seed": int, "<vector>": np.ndarray, ...}}``
    with vectors ``selected_rows``, ``y_ri``, ``x0_ri``, ``r_ri``,
    ``xhat_ri``; the long-form rows are (sample, seed, vector, index,
    value).
    """
    staged: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            sample = int(row["sample"])
            entry = staged.setdefault(sample, {"seed": int(row["seed"])})
            entry.setdefault(row["vector"], []).append(
                (int(row["index"]), float(row["value"]))
            )
    fixtures = {}
    for sample, entry in staged.items():
        parsed = {"seed": entry["seed"]}
        for name, pairs in entry.items():
            if name == "seed":
                continue
            pairs.sort()
            values = np.array([v for _, v in pairs])
            parsed[name] = values.astype(int) if name == "selected_rows" else values
        fixtures[sample] = parsed
    return fixtures
