"""
Checkpoint files ``ckpt_epoch_<n>.pt``.
"""
import os
import re
from typing import Any, Dict, List, Optional, Tuple

import torch

from utils.exceptions import CheckpointError
from utils.logger import get_logger

logger = get_logger(__name__)

_CHECKPOINT_RE = re.compile(r"^ckpt_epoch_(\d+)\.pt$")


def checkpoint_name(epoch: int) -> str:
    return f"ckpt_epoch_{epoch}.pt"


def save_checkpoint(directory: str, epoch: int, models: Dict[str, torch.nn.Module],
                    optimizers: Dict[str, torch.optim.Optimizer],
                    extra: Optional[Dict[str, Any]] = None) -> str:
    """
    Write model and optimizer states for an epoch.

    Args:
        directory: Output directory
        epoch: Completed epoch number
        models: Modules keyed by name ('generator', 'd1', 'd2')
        optimizers: Optimizers keyed by the same names
        extra: Additional plain values (config, RNG state, history)

    Returns:
        Path of the written checkpoint
    """
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, checkpoint_name(epoch))
    payload = {
        "epoch": epoch,
        "models": {name: model.state_dict() for name, model in models.items()},
        "optimizers": {name: opt.state_dict() for name, opt in optimizers.items()},
    }
    payload.update(extra or {})
    tmp_path = path + ".tmp"
    try:
        torch.save(payload, tmp_path)
        os.replace(tmp_path, path)
    except OSError as e:
        raise CheckpointError(f"Cannot write checkpoint '{path}': {e}")
    logger.info(f"Saved checkpoint {path}")
    return path


def load_checkpoint(path: str, map_location: str = "cpu") -> Dict[str, Any]:
    """Read a checkpoint written by save_checkpoint."""
    if not os.path.isfile(path):
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location=map_location)
    except Exception as e:
        raise CheckpointError(f"Cannot read checkpoint '{path}': {e}")
    if not isinstance(payload, dict) or "models" not in payload or "epoch" not in payload:
        raise CheckpointError(f"'{path}' is not a checkpoint")
    return payload


def restore_modules(payload: Dict[str, Any], models: Dict[str, torch.nn.Module],
                    optimizers: Optional[Dict[str, torch.optim.Optimizer]] = None) -> int:
    """
    Load states into modules (and optimizers) in place.

    Returns:
        The checkpoint's epoch
    """
    try:
        for name, model in models.items():
            model.load_state_dict(payload["models"][name])
        for name, opt in (optimizers or {}).items():
            opt.load_state_dict(payload["optimizers"][name])
    except (KeyError, RuntimeError, ValueError) as e:
        raise CheckpointError(f"Checkpoint does not match the model: {e}")
    return int(payload["epoch"])


def list_checkpoints(directory: str) -> List[Tuple[int, str]]:
    """(epoch, path) pairs sorted by epoch."""
    if not os.path.isdir(directory):
        return []
    found = []
    for name in os.listdir(directory):
        match = _CHECKPOINT_RE.match(name)
        if match:
            found.append((int(match.group(1)), os.path.join(directory, name)))
    return sorted(found)


def latest_checkpoint(directory: str) -> Optional[str]:
    checkpoints = list_checkpoints(directory)
    return checkpoints[-1][1] if checkpoints else None
