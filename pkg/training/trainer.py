"""
Alternating adversarial training of the generator and both discriminators.

Every iteration runs ``d_steps_per_g_step`` discriminator steps (D1 and D2 each
updated on a fresh batch) followed by one generator step. A checkpoint is
written after every epoch and every iteration appends one row to the loss log.
"""
import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import torch
from torch.utils.data import DataLoader, Dataset
from tqdm import tqdm

from config import AppConfig, config_to_dict
from dataset.paired import EpochSampler
from models.discriminator import D1_CHANNELS, D2_CHANNELS, DiscriminatorSpec, PatchDiscriminator, conditional_bundle
from models.wnet import GeneratorSpec, WNetGenerator
from training.checkpoint import latest_checkpoint, load_checkpoint, restore_modules, save_checkpoint
from training.losses import cgan_loss, discriminator_loss, gan_loss, generator_objective
from utils.exceptions import TrainingDivergedError
from utils.logger import get_logger

logger = get_logger(__name__)

LOSS_LOG_FILE = "loss_log.csv"
SNAPSHOT_FILE = "divergence_snapshot.json"
LOG_FIELDS = ("epoch", "iteration", "cgan", "gan", "l1", "g_total", "d1", "d2")


def build_models(config: AppConfig) -> Tuple[WNetGenerator, PatchDiscriminator, PatchDiscriminator]:
    """Generator and the two discriminators for a configuration."""
    model = config.model
    generator = WNetGenerator(GeneratorSpec.from_config(model))
    d1 = PatchDiscriminator(DiscriminatorSpec(D1_CHANNELS, model.base_channels, model.init_std))
    d2 = PatchDiscriminator(DiscriminatorSpec(D2_CHANNELS, model.base_channels, model.init_std))
    return generator, d1, d2


@dataclass
class TrainingHistory:
    """Update counters and per-epoch L1 means."""
    d_updates: int = 0
    g_updates: int = 0
    epoch_l1: Dict[int, float] = field(default_factory=dict)
    checkpoints: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"d_updates": self.d_updates, "g_updates": self.g_updates,
                "epoch_l1": {str(k): v for k, v in self.epoch_l1.items()}}

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingHistory":
        return cls(d_updates=int(data.get("d_updates", 0)), g_updates=int(data.get("g_updates", 0)),
                   epoch_l1={int(k): float(v) for k, v in data.get("epoch_l1", {}).items()})


def grad_norm(module: torch.nn.Module) -> float:
    total = 0.0
    for p in module.parameters():
        if p.grad is not None:
            total += float(p.grad.detach().double().pow(2).sum())
    return math.sqrt(total)


class Trainer:
    """Owns the three networks, their Adam optimizers and the output directory."""

    def __init__(self, config: AppConfig, dataset: Dataset, out_dir: str):
        self.config = config
        self.dataset = dataset
        self.out_dir = out_dir
        self.device = torch.device(config.train.device)
        train = config.train

        torch.manual_seed(train.seed)
        self.generator, self.d1, self.d2 = (m.to(self.device) for m in build_models(config))
        betas = (train.beta1, train.beta2)
        self.optimizers = {
            "generator": torch.optim.Adam(self.generator.parameters(), lr=train.lr, betas=betas),
            "d1": torch.optim.Adam(self.d1.parameters(), lr=train.lr, betas=betas),
            "d2": torch.optim.Adam(self.d2.parameters(), lr=train.lr, betas=betas),
        }
        batches_per_epoch = train.iterations_per_epoch * (train.d_steps_per_g_step + 1)
        self.sampler = EpochSampler(len(dataset), batches_per_epoch * train.batch_size, train.seed,
                                    replacement=train.sample_with_replacement)
        self.loader = DataLoader(dataset, batch_size=train.batch_size, sampler=self.sampler,
                                 num_workers=train.num_workers)
        self.history = TrainingHistory()
        self.start_epoch = 1

    @property
    def models(self) -> Dict[str, torch.nn.Module]:
        return {"generator": self.generator, "d1": self.d1, "d2": self.d2}

    @property
    def log_path(self) -> str:
        return os.path.join(self.out_dir, LOSS_LOG_FILE)

    # ----------------------- Resume -----------------------
    def resume(self, checkpoint_path: Optional[str] = None) -> bool:
        """
        Restore the latest (or the given) checkpoint and truncate the loss log to it.

        Returns:
            True when a checkpoint was restored
        """
        path = checkpoint_path or latest_checkpoint(self.out_dir)
        if path is None:
            return False
        payload = load_checkpoint(path, map_location=str(self.device))
        epoch = restore_modules(payload, self.models, self.optimizers)
        if "rng_state" in payload:
            torch.set_rng_state(payload["rng_state"])
        self.history = TrainingHistory.from_dict(payload.get("history", {}))
        self.start_epoch = epoch + 1
        self._truncate_log(epoch)
        logger.info(f"Resumed from {path} at epoch {epoch}")
        return True

    def _truncate_log(self, epoch: int) -> None:
        if not os.path.isfile(self.log_path):
            return
        with open(self.log_path, "r", newline="", encoding="utf-8") as f:
            rows = [row for row in csv.DictReader(f) if int(row["epoch"]) <= epoch]
        with open(self.log_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=LOG_FIELDS)
            writer.writeheader()
            writer.writerows(rows)

    # ----------------------- Steps ------------------------
    def _to_device(self, batch: Dict[str, torch.Tensor]) -> Dict[str, torch.Tensor]:
        return {k: v.to(self.device) for k, v in batch.items()}

    def _generate(self, batch: Dict[str, torch.Tensor]) -> torch.Tensor:
        self.generator.train()
        return self.generator(batch["src_in"], batch["tgt_in"], batch["part_masks"], batch["affines"])

    def discriminator_step(self, batch: Dict[str, torch.Tensor]) -> Dict[str, float]:
        """One update of D1 and one of D2 against a detached generator output."""
        eps = self.config.train.score_epsilon
        with torch.no_grad():
            fake = self._generate(batch)
        real_bundle = conditional_bundle(batch["src_image"], batch["src_heat"], batch["tgt_image"], batch["tgt_heat"])
        fake_bundle = conditional_bundle(batch["src_image"], batch["src_heat"], fake, batch["tgt_heat"])

        loss_d1 = discriminator_loss(self.d1(real_bundle), self.d1(fake_bundle), eps)
        self.optimizers["d1"].zero_grad()
        loss_d1.backward()
        self.optimizers["d1"].step()

        loss_d2 = discriminator_loss(self.d2(batch["tgt_image"]), self.d2(fake), eps)
        self.optimizers["d2"].zero_grad()
        loss_d2.backward()
        self.optimizers["d2"].step()

        self.history.d_updates += 1
        return {"d1": float(loss_d1), "d2": float(loss_d2),
                "grad_d1": grad_norm(self.d1), "grad_d2": grad_norm(self.d2)}

    def generator_step(self, batch: Dict[str, torch.Tensor]) -> Dict[str, float]:
        """One generator update; also reports both adversarial values of the current discriminators."""
        train = self.config.train
        fake = self._generate(batch)
        real_bundle = conditional_bundle(batch["src_image"], batch["src_heat"], batch["tgt_image"], batch["tgt_heat"])
        fake_bundle = conditional_bundle(batch["src_image"], batch["src_heat"], fake, batch["tgt_heat"])
        d1_fake = self.d1(fake_bundle)
        d2_fake = self.d2(fake)
        parts = generator_objective(d1_fake, d2_fake, fake, batch["tgt_image"],
                                    train.lambda1, train.lambda2, train.score_epsilon)
        self.optimizers["generator"].zero_grad()
        parts["total"].backward()
        self.optimizers["generator"].step()

        with torch.no_grad():
            cgan = cgan_loss(self.d1(real_bundle), d1_fake.detach(), train.score_epsilon)
            gan = gan_loss(self.d2(batch["tgt_image"]), d2_fake.detach(), train.score_epsilon)
        self.history.g_updates += 1
        return {"cgan": float(cgan), "gan": float(gan), "l1": float(parts["l1"]),
                "g_total": float(parts["total"]), "grad_generator": grad_norm(self.generator)}

    def _check_finite(self, epoch: int, iteration: int, values: Dict[str, float]) -> None:
        if all(math.isfinite(v) for v in values.values()):
            return
        snapshot = {
            "epoch": epoch,
            "iteration": iteration,
            "losses": {k: v for k, v in values.items() if not k.startswith("grad_")},
            "grad_norms": {k[len("grad_"):]: v for k, v in values.items() if k.startswith("grad_")},
        }
        path = os.path.join(self.out_dir, SNAPSHOT_FILE)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(snapshot, f, indent=2, default=str)
        logger.error(f"Non-finite loss at epoch {epoch}, iteration {iteration}; snapshot written to {path}")
        raise TrainingDivergedError(f"Non-finite loss at epoch {epoch}, iteration {iteration}", snapshot)

    # ----------------------- Loop -------------------------
    def _open_log(self):
        fresh = not os.path.isfile(self.log_path) or self.start_epoch == 1
        handle = open(self.log_path, "w" if fresh else "a", newline="", encoding="utf-8")
        writer = csv.DictWriter(handle, fieldnames=LOG_FIELDS)
        if fresh:
            writer.writeheader()
        return handle, writer

    def _run_epoch(self, epoch: int, writer: csv.DictWriter, handle) -> None:
        train = self.config.train
        self.sampler.set_epoch(epoch)
        batches: Iterator[Dict[str, torch.Tensor]] = iter(self.loader)
        l1_values = []
        progress = tqdm(range(1, train.iterations_per_epoch + 1), desc=f"epoch {epoch}/{train.epochs}",
                        leave=False, disable=train.iterations_per_epoch < train.log_every)
        for iteration in progress:
            d_values: Dict[str, float] = {}
            for _ in range(train.d_steps_per_g_step):
                d_values = self.discriminator_step(self._to_device(next(batches)))
            g_values = self.generator_step(self._to_device(next(batches)))
            values = {**d_values, **g_values}
            self._check_finite(epoch, iteration, values)
            writer.writerow({"epoch": epoch, "iteration": iteration,
                             **{k: repr(values[k]) for k in LOG_FIELDS[2:]}})
            handle.flush()
            l1_values.append(values["l1"])
            if iteration % train.log_every == 0:
                logger.info(f"epoch {epoch} iter {iteration}: l1={values['l1']:.4f} "
                            f"g={values['g_total']:.4f} d1={values['d1']:.4f} d2={values['d2']:.4f}")
        self.history.epoch_l1[epoch] = sum(l1_values) / len(l1_values)

    def train(self, epochs: Optional[int] = None) -> TrainingHistory:
        """
        Run epochs ``start_epoch .. epochs`` and checkpoint after each.

        Raises:
            TrainingDivergedError: On a non-finite loss
        """
        last_epoch = epochs if epochs is not None else self.config.train.epochs
        os.makedirs(self.out_dir, exist_ok=True)
        handle, writer = self._open_log()
        try:
            for epoch in range(self.start_epoch, last_epoch + 1):
                self._run_epoch(epoch, writer, handle)
                path = save_checkpoint(self.out_dir, epoch, self.models, self.optimizers, extra={
                    "config": config_to_dict(self.config),
                    "rng_state": torch.get_rng_state(),
                    "history": self.history.to_dict(),
                })
                self.history.checkpoints.append(path)
                logger.info(f"Epoch {epoch} done, mean L1 {self.history.epoch_l1[epoch]:.4f}")
                self.start_epoch = epoch + 1
        finally:
            handle.close()
        return self.history


def train_loop(config: AppConfig, dataset: Dataset, out_dir: str, resume: bool = True) -> TrainingHistory:
    """Train on a dataset, continuing from the latest checkpoint in ``out_dir`` when asked."""
    trainer = Trainer(config, dataset, out_dir)
    if resume:
        trainer.resume()
    return trainer.train()
