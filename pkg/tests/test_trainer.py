"""
Tests for the alternating training loop.
"""
import csv
import dataclasses
import json
import os

import pytest
import torch

from dataset.paired import PairedDataset
from tests.conftest import make_micro_config
from training.checkpoint import list_checkpoints, load_checkpoint
from training.trainer import LOG_FIELDS, LOSS_LOG_FILE, SNAPSHOT_FILE, Trainer, train_loop
from utils.exceptions import TrainingDivergedError


def read_log(out_dir):
    with open(os.path.join(out_dir, LOSS_LOG_FILE), newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def dataset(prepared, micro_config):
    return PairedDataset(prepared.manifest, micro_config)


class TestSchedule:
    """Update counts, loss log and checkpoints."""

    def test_one_short_epoch(self, dataset, micro_config, tmp_path):
        out = str(tmp_path / "run")
        history = train_loop(micro_config, dataset, out)
        assert history.d_updates == 6
        assert history.g_updates == 3
        rows = read_log(out)
        assert len(rows) == 3
        assert tuple(rows[0]) == LOG_FIELDS
        assert [int(r["iteration"]) for r in rows] == [1, 2, 3]
        assert [epoch for epoch, _ in list_checkpoints(out)] == [1]

    def test_two_epochs_of_five_iterations(self, prepared, tmp_path):
        config = make_micro_config(epochs=2, iterations_per_epoch=5)
        out = str(tmp_path / "run")
        history = train_loop(config, PairedDataset(prepared.manifest, config), out)
        assert history.d_updates == 20
        assert history.g_updates == 10
        assert len(read_log(out)) == 10
        checkpoints = sorted(n for n in os.listdir(out) if n.endswith(".pt"))
        assert checkpoints == ["ckpt_epoch_1.pt", "ckpt_epoch_2.pt"]

    def test_checkpoint_contents(self, dataset, micro_config, tmp_path):
        out = str(tmp_path / "run")
        train_loop(micro_config, dataset, out)
        payload = load_checkpoint(list_checkpoints(out)[0][1])
        assert set(payload["models"]) == {"generator", "d1", "d2"}
        assert set(payload["optimizers"]) == {"generator", "d1", "d2"}
        assert payload["config"]["train"]["iterations_per_epoch"] == 3
        assert payload["history"]["g_updates"] == 3

    def test_adam_settings(self, dataset, micro_config, tmp_path):
        trainer = Trainer(micro_config, dataset, str(tmp_path))
        for optimizer in trainer.optimizers.values():
            group = optimizer.param_groups[0]
            assert group["lr"] == 2e-4
            assert group["betas"] == (0.5, 0.999)

    def test_fixed_seed_is_deterministic(self, dataset, micro_config, tmp_path):
        train_loop(micro_config, dataset, str(tmp_path / "a"))
        train_loop(micro_config, dataset, str(tmp_path / "b"))
        assert read_log(str(tmp_path / "a")) == read_log(str(tmp_path / "b"))


def test_resume_matches_uninterrupted_run(prepared, tmp_path):
    config = make_micro_config(epochs=2, iterations_per_epoch=2)
    dataset = PairedDataset(prepared.manifest, config)

    straight = Trainer(config, dataset, str(tmp_path / "straight"))
    straight.train()

    first = Trainer(config, dataset, str(tmp_path / "resumed"))
    first.train(epochs=1)
    second = Trainer(config, dataset, str(tmp_path / "resumed"))
    assert second.resume()
    assert second.start_epoch == 2
    second.train()

    assert read_log(str(tmp_path / "straight")) == read_log(str(tmp_path / "resumed"))
    for a, b in zip(straight.generator.parameters(), second.generator.parameters()):
        assert torch.equal(a, b)
    assert second.history.g_updates == 4


def test_resume_truncates_log(prepared, tmp_path):
    config = make_micro_config(epochs=2, iterations_per_epoch=2)
    dataset = PairedDataset(prepared.manifest, config)
    out = str(tmp_path / "run")
    Trainer(config, dataset, out).train()
    os.remove(os.path.join(out, "ckpt_epoch_2.pt"))
    trainer = Trainer(config, dataset, out)
    trainer.resume()
    assert {int(r["epoch"]) for r in read_log(out)} == {1}


def test_divergence_writes_snapshot(dataset, micro_config, tmp_path):
    out = str(tmp_path / "run")
    trainer = Trainer(micro_config, dataset, out)
    original = trainer.discriminator_step

    def diverging_step(batch):
        values = original(batch)
        values["d1"] = float("nan")
        return values

    trainer.discriminator_step = diverging_step
    with pytest.raises(TrainingDivergedError) as info:
        trainer.train()
    with open(os.path.join(out, SNAPSHOT_FILE), encoding="utf-8") as f:
        snapshot = json.load(f)
    assert snapshot["iteration"] == 1
    assert snapshot["epoch"] == 1
    assert "d1" in snapshot["losses"] and "generator" in snapshot["grad_norms"]
    assert info.value.snapshot["iteration"] == 1


def test_overfits_tiny_dataset(prepared, tmp_path):
    """L1 halves on four pairs. The reconstruction weight is raised to 10 because at 0.01
    the adversarial terms dominate a 300-iteration run and L1 barely moves."""
    config = make_micro_config(epochs=3, iterations_per_epoch=100, lambda2=10.0)
    config.model.base_channels = 8
    manifest = dataclasses.replace(prepared.manifest, pairs=prepared.manifest.pairs[:4])
    history = Trainer(config, PairedDataset(manifest, config), str(tmp_path / "run")).train()
    assert history.epoch_l1[3] <= 0.5 * history.epoch_l1[1]
