"""
PersonSynthTool: Unified API and CLI for pose-guided person image synthesis

Public API (importable):
- PersonSynthTool(config)  # holds the resolved configuration
- prepare(dataset_root, out_root) -> PrepareResult
- train(manifest_path, out_dir, resume=True) -> TrainingHistory
- generate(checkpoint, manifest_path, src_id, tgt_id, out_path) -> str
- evaluate(dir_generated, dir_real, out_path, mask_dir=None) -> list of MetricRecord
- partition_debug(manifest_path, sample_id, out_dir) -> list of paths

CLI:
  python main.py prepare --dataset data/raw --out data/prepared
  python main.py train --manifest data/prepared --out runs/market --set train.epochs=2
  python main.py generate --checkpoint runs/market/ckpt_epoch_2.pt --manifest data/prepared \
      --src p000_0 --tgt p000_1 --out out/p000.png
  python main.py evaluate --generated out/ --real data/prepared/images --out out/metrics.jsonl
  python main.py partition-debug --manifest data/prepared --sample p000_0 --out out/debug
"""
from __future__ import annotations

import argparse
import json
import logging
import os
from typing import List, Optional, Sequence

import torch

from config import AppConfig, config_from_dict, config_hash, resolve_config, save_config
from dataset.io import denormalize_image, write_image
from dataset.manifest import DatasetManifest, PairRecord, load_manifest
from dataset.paired import FeatureCache, PairedDataset, build_training_example, load_image_record, load_pair
from dataset.prepare import PrepareResult, prepare_dataset
from evaluation.backends import get_backend
from evaluation.report import MetricRecord, evaluate_directories, write_report
from models.wnet import GeneratorSpec, WNetGenerator, generator_forward
from training.checkpoint import load_checkpoint, restore_modules
from training.trainer import TrainingHistory, Trainer
from utils.exceptions import ConfigError, DataLoadError, InvalidArgumentError
from utils.logger import add_file_handler, get_logger, setup_logger
from visualization.partition_debug import write_partition_debug

logger = get_logger(__name__)


class PersonSynthTool:
    def __init__(self, config: Optional[AppConfig] = None) -> None:
        self.config = config or AppConfig()

    def _start(self, out_dir: str, command: str, **paths: str):
        """Echo the configuration and mirror the log into the output directory."""
        os.makedirs(out_dir, exist_ok=True)
        save_config(self.config, out_dir)
        handler = add_file_handler(setup_logger(None, self.config.log_level), os.path.join(out_dir, f"{command}.log"))
        logger.info(f"{command}: " + ", ".join(f"{k}={os.path.abspath(v)}" for k, v in paths.items() if v))
        return handler

    @staticmethod
    def _stop(handler) -> None:
        logging.getLogger().removeHandler(handler)
        handler.close()

    def _check_manifest(self, manifest: DatasetManifest) -> None:
        """Refuse configurations whose generator does not fit the prepared resolution."""
        model = self.config.model
        if tuple(manifest.resolution) != tuple(model.image_size):
            raise ConfigError(
                f"Manifest resolution {tuple(manifest.resolution)} does not match model.image_size "
                f"{tuple(model.image_size)} (depth {model.depth})")
        try:
            GeneratorSpec.from_config(model)
        except InvalidArgumentError as e:
            raise ConfigError(str(e))
        if not manifest.pairs:
            raise ConfigError("Manifest has no pairs to train on")

    # ----------------------- Prepare ----------------------
    def prepare(self, dataset_root: str, out_root: str) -> PrepareResult:
        handler = self._start(out_root, "prepare", dataset=dataset_root, out=out_root)
        try:
            return prepare_dataset(dataset_root, out_root, self.config)
        finally:
            self._stop(handler)

    # ----------------------- Train ------------------------
    def train(self, manifest_path: str, out_dir: str, resume: bool = True) -> TrainingHistory:
        manifest = load_manifest(manifest_path)
        self._check_manifest(manifest)
        handler = self._start(out_dir, "train", manifest=manifest_path, out=out_dir)
        try:
            trainer = Trainer(self.config, PairedDataset(manifest, self.config), out_dir)
            if resume:
                trainer.resume()
            return trainer.train()
        finally:
            self._stop(handler)

    # ----------------------- Generate ---------------------
    def generate(self, checkpoint: str, manifest_path: str, src_id: str, tgt_id: str, out_path: str) -> str:
        """
        Render the source person in the target pose and background.

        Also writes ``<out_path>.json`` with the checkpoint, sample ids and config hash.
        """
        out_dir = os.path.dirname(os.path.abspath(out_path))
        handler = self._start(out_dir, "generate", checkpoint=checkpoint, manifest=manifest_path, out=out_path)
        try:
            payload = load_checkpoint(checkpoint)
            model_config = self.config.model
            if "config" in payload:
                trained = config_from_dict(payload["config"])
                model_config = trained.model
            generator = WNetGenerator(GeneratorSpec.from_config(model_config))
            restore_modules({"models": {"generator": payload["models"]["generator"]}, "epoch": payload["epoch"]},
                            {"generator": generator})

            manifest = load_manifest(manifest_path)
            sample = load_pair(manifest.root, PairRecord(src_id, tgt_id), self.config.partition.mask_threshold)
            if sample.src_image.shape[:2] != tuple(model_config.image_size):
                raise ConfigError(f"Sample size {sample.src_image.shape[:2]} does not match the trained "
                                  f"generator {tuple(model_config.image_size)}")
            cache = FeatureCache(manifest.cache_dir)
            src = cache.get(src_id, sample.src_landmarks, sample.src_mask, self.config)
            tgt = cache.get(tgt_id, sample.tgt_landmarks, sample.tgt_mask, self.config)
            example = build_training_example(sample, src, tgt, self.config)
            with torch.no_grad():
                output = generator_forward(generator, example["src_in"][None], example["tgt_in"][None],
                                           example["part_masks"][None], example["affines"][None], training=False)
            image = denormalize_image(output[0].permute(1, 2, 0).numpy())
            write_image(out_path, image)
            provenance = {"checkpoint": os.path.abspath(checkpoint), "epoch": int(payload["epoch"]),
                          "src_id": src_id, "tgt_id": tgt_id, "config_hash": config_hash(self.config)}
            with open(out_path + ".json", "w", encoding="utf-8") as f:
                json.dump(provenance, f, indent=2, sort_keys=True)
            logger.info(f"Wrote {out_path}")
            return out_path
        finally:
            self._stop(handler)

    # ----------------------- Evaluate ---------------------
    def evaluate(self, dir_generated: str, dir_real: str, out_path: str,
                 mask_dir: Optional[str] = None, backend: Optional[str] = None) -> List[MetricRecord]:
        out_dir = os.path.dirname(os.path.abspath(out_path))
        handler = self._start(out_dir, "evaluate", generated=dir_generated, real=dir_real,
                              masks=mask_dir or "", out=out_path)
        try:
            metrics = self.config.metrics
            backend_impl = get_backend(backend or metrics.backend, metrics, self.config.train.device)
            records = evaluate_directories(dir_generated, dir_real, backend_impl, metrics.splits,
                                           mask_dir, config_hash(self.config))
            write_report(out_path, records)
            return records
        finally:
            self._stop(handler)

    # ----------------------- Partition debug --------------
    def partition_debug(self, manifest_path: str, sample_id: str, out_dir: str) -> List[str]:
        handler = self._start(out_dir, "partition_debug", manifest=manifest_path, out=out_dir)
        try:
            manifest = load_manifest(manifest_path)
            if sample_id not in manifest.image_ids:
                raise DataLoadError(manifest_path, "sample", f"'{sample_id}' is not a prepared sample")
            image, landmarks, body = load_image_record(manifest.root, sample_id, self.config.partition.mask_threshold)
            features = FeatureCache(manifest.cache_dir).get(sample_id, landmarks, body, self.config)
            return write_partition_debug(out_dir, image, features, self.config)
        finally:
            self._stop(handler)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="person-synth", description="Pose-guided person image synthesis")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="Override a configuration value (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="Validate, filter and cache a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="Train from a prepared manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-resume", action="store_true", help="Ignore existing checkpoints")

    p = sub.add_parser("generate", help="Generate one image from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="Compute IS, mask-IS and FID")
    p.add_argument("--generated", required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--masks")
    p.add_argument("--backend")
    p.add_argument("--out", required=True)

    p = sub.add_parser("partition-debug", help="Dump the body partition of one sample")
    p.add_argument("--manifest", required=True)
    p.add_argument("--sample", required=True)
    p.add_argument("--out", required=True)
    return parser


def run(argv: Optional[Sequence[str]] = None):
    """Parse arguments, resolve the configuration and dispatch one command."""
    args = build_parser().parse_args(argv)
    config = resolve_config(args.config, args.overrides)
    setup_logger(None, config.log_level)
    tool = PersonSynthTool(config)
    if args.command == "prepare":
        return tool.prepare(args.dataset, args.out)
    if args.command == "train":
        return tool.train(args.manifest, args.out, resume=not args.no_resume)
    if args.command == "generate":
        return tool.generate(args.checkpoint, args.manifest, args.src, args.tgt, args.out)
    if args.command == "evaluate":
        return tool.evaluate(args.generated, args.real, args.out, args.masks, args.backend)
    return tool.partition_debug(args.manifest, args.sample, args.out)
