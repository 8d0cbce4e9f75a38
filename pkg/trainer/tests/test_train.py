"""Training behavior, export round trips, and the unfolding-benefit gate."""

import math
import subprocess
import sys

import numpy as np
import pytest
import torch

from vamp_cfar_trainer import (
    TrainerConfigError,
    TrainingConfig,
    UnfoldedVampNet,
    evaluate_batch,
    generate_batch,
    load_params_file,
    nmse_loss,
    train,
    validation_seed,
)

SMALL_CFG = TrainingConfig(m=24, n=48, k_targets=3, snr_db=22.0, noise_var=1.0,
                           k_layers=4, batch_size=6, steps=25, learning_rate=0.02,
                           seed=1, val_batch_size=16, checkpoint_every=5)


class TestTrainingLoop:
    def test_overfit_single_repeated_batch(self):
        torch.manual_seed(0)
        cfg = SMALL_CFG
        batch = generate_batch(cfg, 123, batch_size=6)
        y, a, x0 = (torch.from_numpy(batch.y_ri), torch.from_numpy(batch.a_ri),
                    torch.from_numpy(batch.x0_ri))
        net = UnfoldedVampNet.matched(cfg.k_layers, cfg.k_targets / cfg.n,
                                      cfg.noise_var)
        optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
        first = last = None
        for _ in range(30):
            optimizer.zero_grad()
            _, xhat = net(y, a)
            loss = nmse_loss(xhat, x0)
            loss.backward()
            optimizer.step()
            last = float(loss.detach())
            if first is None:
                first = last
        assert last < first

    def test_train_exports_best_checkpoint(self, tmp_path):
        out = tmp_path / "learned.json"
        result = train(SMALL_CFG, out_path=out)
        assert result.best_val_nmse <= result.init_val_nmse
        assert len(result.train_losses) == SMALL_CFG.steps
        params = load_params_file(out)
        assert params["provenance"] == "learned"
        assert params["k_layers"] == SMALL_CFG.k_layers

    def test_layerwise_schedule_runs(self, tmp_path):
        cfg = TrainingConfig(m=16, n=32, k_targets=2, snr_db=20.0, noise_var=1.0,
                             k_layers=3, batch_size=4, steps=4, learning_rate=0.02,
                             layerwise=True, seed=2, val_batch_size=8,
                             checkpoint_every=2)
        result = train(cfg, out_path=tmp_path / "lw.json")
        # one stage per depth plus the end-to-end stage
        assert len(result.train_losses) == cfg.steps * (cfg.k_layers + 1)
        assert result.best_val_nmse <= result.init_val_nmse

    def test_validation_block_disjoint_from_training_seeds(self):
        cfg = SMALL_CFG
        last_train_seed = cfg.seed + cfg.steps * cfg.batch_size - 1
        assert validation_seed(cfg) > last_train_seed

    def test_zero_targets_rejected(self):
        cfg = TrainingConfig(m=8, n=12, k_targets=0, snr_db=10.0, noise_var=1.0,
                             k_layers=2, batch_size=2, steps=1, learning_rate=1e-2)
        with pytest.raises(TrainerConfigError):
            train(cfg)


class TestExportConsumedByToolkit:
    def test_toolkit_cli_accepts_exported_file(self, tmp_path):
        if subprocess.run([sys.executable, "-c", "import vamp_cfar.cli"],
                          capture_output=True).returncode != 0:
            pytest.skip("detection toolkit CLI not installed")
        out = tmp_path / "learned.json"
        train(SMALL_CFG, out_path=out)
        config = tmp_path / "cfg.toml"
        config.write_text("""
m = 24
n = 48
k_targets = 3
snr_db = 22.0
noise_var = 1.0
k_layers = 4
param_mode = "matched"
trials = 2
base_seed = 0
pfa_grid = [0.01]
detectors = ["pcd", "vamp_eq8"]

[pcd]
pfa = 0.01
""")
        proc = subprocess.run(
            [sys.executable, "-m", "vamp_cfar.cli", "roc",
             "--config", str(config), "--out", str(tmp_path / "roc"),
             "--params", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr


class TestUnfoldingBenefit:
    def test_criterion_9_learned_beats_matched_with_parity(self, toolkit_fixtures):
        # held-out NMSE of trained parameters must not exceed the
        # matched baseline at the wide-aperture recovery config, and the
        # forward pass must track the toolkit's recovery to < 1e-6
        from vamp_cfar_trainer import load_fixtures

        fixtures = load_fixtures(toolkit_fixtures / "fixtures.csv")
        params = load_params_file(toolkit_fixtures / "params.json")
        net = UnfoldedVampNet.from_params(params)
        fx_cfg = TrainingConfig(m=10, n=16, k_targets=2, snr_db=18.0,
                                noise_var=1.0, k_layers=4, batch_size=3,
                                steps=1, learning_rate=1e-2, seed=0)
        batch = generate_batch(fx_cfg, 0)
        r, xhat = net(torch.from_numpy(batch.y_ri), torch.from_numpy(batch.a_ri))
        parity = max(
            float(np.max(np.abs(r[s].detach().numpy() - entry["r_ri"])))
            for s, entry in fixtures.items()
        )
        parity_ok = parity < 1e-6

        cfg = TrainingConfig(m=600, n=1000, k_targets=10, snr_db=30.0,
                             noise_var=1.0, k_layers=15, batch_size=4, steps=60,
                             learning_rate=0.02, seed=0, val_batch_size=24,
                             checkpoint_every=10)
        result = train(cfg)
        benefit_ok = result.best_val_nmse <= result.init_val_nmse
        line = (
            f"ACCEPTANCE 9 (unfolding-benefit): "
            f"{'PASS' if benefit_ok and parity_ok else 'FAIL'} - "
            f"held-out NMSE {result.best_val_nmse:.5f} "
            f"({10 * math.log10(result.best_val_nmse):.2f} dB) vs matched "
            f"{result.init_val_nmse:.5f} "
            f"({10 * math.log10(result.init_val_nmse):.2f} dB); "
            f"forward-pass parity {parity:.2e} (< 1e-6)"
        )
        print(line)
        assert benefit_ok and parity_ok, line
