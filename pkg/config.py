"""
Configuration management for the person image synthesis application.

Precedence: defaults < config file < environment < command-line overrides.
"""
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Tuple

from utils.exceptions import ConfigError

PRESETS: Dict[str, Dict[str, Any]] = {
    "market": {"depth": 6, "image_size": (128, 64)},
    "fashion": {"depth": 7, "image_size": (256, 256)},
}


@dataclass
class GeometryConfig:
    """Heat-map and body-part region parameters."""
    sigma: float = 6.0
    squared_distance: bool = False
    head_scale: float = 0.8
    limb_width_scale: float = 0.3
    torso_dilation_scale: float = 0.15
    # d_s = ratio * image height when a shoulder or hip is missing
    fallback_body_shape_ratio: float = 0.25


@dataclass
class PartitionConfig:
    """Foreground/background split and skip-connection masking."""
    masked_value: float = 0.0
    mask_threshold: int = 128
    skip_mask_mode: str = "refined"


@dataclass
class ModelConfig:
    """Generator and discriminator layout."""
    preset: str = "market"
    depth: int = 6
    image_size: Tuple[int, int] = (128, 64)
    base_channels: int = 64
    skip_depth: int = 4
    dropout: float = 0.5
    init_std: float = 0.02


@dataclass
class TrainConfig:
    """Optimizer, schedule and objective weights."""
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epochs: int = 90
    iterations_per_epoch: int = 500
    d_steps_per_g_step: int = 2
    lambda1: float = 1.0
    lambda2: float = 0.01
    batch_size: int = 4
    seed: int = 0
    score_epsilon: float = 1e-7
    device: str = "cpu"
    num_workers: int = 0
    sample_with_replacement: bool = True
    log_every: int = 10


@dataclass
class DataConfig:
    """Dataset preprocessing and pairing."""
    crop_target: Tuple[int, int] = (128, 64)
    emit_reverse_pairs: bool = False
    cache_dirname: str = "cache"


@dataclass
class MetricsConfig:
    """Evaluation metrics."""
    splits: int = 10
    backend: str = "synthetic"
    inception_weights: Optional[str] = None
    batch_size: int = 32


@dataclass
class AppConfig:
    """Main application configuration."""
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    log_level: str = "INFO"
    working_directory: Optional[str] = None
    cache_root: Optional[str] = None

    def __post_init__(self):
        """Set working directory if not provided."""
        if self.working_directory is None:
            self.working_directory = os.getcwd()


def get_default_config() -> AppConfig:
    """Get the default application configuration."""
    return AppConfig()


def load_config_from_env(config: Optional[AppConfig] = None) -> AppConfig:
    """Load configuration overrides from environment variables."""
    config = config or get_default_config()

    if os.getenv("PERSON_SYNTH_LOG_LEVEL"):
        config.log_level = os.getenv("PERSON_SYNTH_LOG_LEVEL")
    if os.getenv("PERSON_SYNTH_CACHE_ROOT"):
        config.cache_root = os.getenv("PERSON_SYNTH_CACHE_ROOT")
    if os.getenv("PERSON_SYNTH_DEVICE"):
        config.train.device = os.getenv("PERSON_SYNTH_DEVICE")

    return config


def config_to_dict(config: AppConfig) -> Dict[str, Any]:
    """Convert a configuration into plain JSON-compatible values."""
    data = dataclasses.asdict(config)
    data.pop("working_directory", None)
    return json.loads(json.dumps(data))


def _coerce(name: str, current: Any, value: Any) -> Any:
    """Coerce a raw value to the type of the field's current value."""
    try:
        if isinstance(current, bool):
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return lowered in ("true", "1", "yes")
            return bool(value)
        if isinstance(current, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(current, float):
            return float(value)
        if isinstance(current, tuple):
            if isinstance(value, str):
                value = [v for v in value.replace("x", ",").split(",") if v.strip()]
            items = tuple(type(current[0])(v) for v in value)
            if len(items) != len(current):
                raise ValueError(value)
            return items
        if value is None or (isinstance(value, str) and value.lower() in ("none", "null")):
            return None
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Invalid value for '{name}': {value!r}")


def _update_dataclass(target: Any, values: Dict[str, Any], prefix: str = "") -> None:
    known = {f.name: f for f in dataclasses.fields(target)}
    for key, value in values.items():
        name = f"{prefix}{key}"
        if key not in known:
            raise ConfigError(f"Unknown configuration key: '{name}'")
        current = getattr(target, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"Configuration section '{name}' must be a mapping")
            _update_dataclass(current, value, prefix=f"{name}.")
        else:
            setattr(target, key, _coerce(name, current, value))


def config_from_dict(values: Dict[str, Any], base: Optional[AppConfig] = None) -> AppConfig:
    """
    Build a configuration from a nested mapping.

    Args:
        values: Nested mapping of sections and keys
        base: Configuration to update (defaults are used when omitted)

    Returns:
        Updated configuration

    Raises:
        ConfigError: If a key is unknown or a value cannot be coerced
    """
    config = base or get_default_config()
    _update_dataclass(config, values)
    _apply_preset_defaults(config, values.get("model", {}))
    _follow_model_size(config, values)
    validate_config(config)
    return config


def _apply_preset_defaults(config: AppConfig, model_values: Dict[str, Any]) -> None:
    """Fill depth and image size from the preset unless they were set explicitly."""
    preset = PRESETS.get(config.model.preset)
    if preset is None:
        raise ConfigError(f"Unknown model preset '{config.model.preset}', expected one of {sorted(PRESETS)}")
    if "preset" in model_values:
        if "depth" not in model_values:
            config.model.depth = preset["depth"]
        if "image_size" not in model_values:
            config.model.image_size = tuple(preset["image_size"])


def _follow_model_size(config: AppConfig, values: Dict[str, Any]) -> None:
    """Crop to the generator resolution unless a crop target was given explicitly."""
    model_values = values.get("model", {})
    if "crop_target" in values.get("data", {}):
        return
    if "image_size" in model_values or "preset" in model_values:
        config.data.crop_target = tuple(config.model.image_size)


def validate_config(config: AppConfig) -> None:
    """Check value ranges that the dataclass types cannot express."""
    positive = {
        "geometry.sigma": config.geometry.sigma,
        "train.lr": config.train.lr,
        "train.epochs": config.train.epochs,
        "train.iterations_per_epoch": config.train.iterations_per_epoch,
        "train.d_steps_per_g_step": config.train.d_steps_per_g_step,
        "train.batch_size": config.train.batch_size,
        "train.score_epsilon": config.train.score_epsilon,
        "model.base_channels": config.model.base_channels,
        "metrics.splits": config.metrics.splits,
    }
    for name, value in positive.items():
        if value <= 0:
            raise ConfigError(f"'{name}' must be positive, got {value}")
    for name, value in (("train.lambda1", config.train.lambda1), ("train.lambda2", config.train.lambda2)):
        if value < 0:
            raise ConfigError(f"'{name}' must be non-negative, got {value}")
    if config.model.depth not in (6, 7):
        raise ConfigError(f"'model.depth' must be 6 or 7, got {config.model.depth}")
    if config.partition.skip_mask_mode not in ("refined", "region"):
        raise ConfigError(f"'partition.skip_mask_mode' must be 'refined' or 'region', "
                          f"got '{config.partition.skip_mask_mode}'")
    if tuple(config.data.crop_target) != tuple(config.model.image_size):
        raise ConfigError(f"'data.crop_target' {tuple(config.data.crop_target)} does not match "
                          f"'model.image_size' {tuple(config.model.image_size)}")


def load_config_file(path: str, base: Optional[AppConfig] = None) -> AppConfig:
    """Load a JSON configuration file on top of the defaults."""
    if not os.path.isfile(path):
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            values = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Configuration file '{path}' is not valid JSON: {e}")
    if not isinstance(values, dict):
        raise ConfigError(f"Configuration file '{path}' must contain a JSON object")
    return config_from_dict(values, base)


def apply_overrides(config: AppConfig, overrides: Iterable[str]) -> AppConfig:
    """
    Apply command-line overrides of the form ``section.key=value``.

    Args:
        config: Configuration to update
        overrides: Override strings

    Returns:
        Updated configuration
    """
    values: Dict[str, Any] = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override must look like 'section.key=value', got '{item}'")
        dotted, raw = item.split("=", 1)
        node = values
        parts = dotted.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = raw
    return config_from_dict(values, config)


def resolve_config(config_file: Optional[str] = None, overrides: Iterable[str] = ()) -> AppConfig:
    """Resolve the effective configuration for a command."""
    config = get_default_config()
    if config_file:
        config = load_config_file(config_file, config)
    config = load_config_from_env(config)
    return apply_overrides(config, overrides)


def save_config(config: AppConfig, directory: str) -> str:
    """Echo the fully resolved configuration into an output directory."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "config.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(config), f, indent=2, sort_keys=True)
    return path


def config_hash(config: AppConfig) -> str:
    """Short stable hash of the resolved configuration."""
    payload = json.dumps(config_to_dict(config), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:12]
