"""Flat key=value run configuration shared by all CLI subcommands.

A run configuration collects every tunable of the pipeline — dataset
synthesis, model architecture, optimization, and loss parameters — as a
flat namespace of ``key = value`` lines (UTF-8, ``#`` comments). Unknown
keys are rejected so typos cannot silently fall back to defaults, and
``parse_config(render_config(c)) == c`` for every config.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .dataset import SynthConfig
from .losses import CenterConfig, MixedConfig, PairConfig
from .model import ModelConfig
from .trainer import TrainConfig

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "render_config",
    "read_config",
]


class ConfigError(ValueError):
    """Malformed configuration text or rejected key/value."""


def _tuple_of_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part.strip()) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


@dataclass(frozen=True)
class RunConfig:
    """Every pipeline tunable, flattened into one documented namespace.

    Field names are the config-file keys. The three seeds are distinct on
    purpose: ``data_seed`` drives synthesis, ``model_seed`` drives
    parameter initialization, and ``seed`` drives training (shuffling and
    per-step sampling).
    """

    # dataset synthesis
    data_num_train_videos: int = 8
    data_num_test_videos: int = 4
    data_frames_per_video: int = 16
    data_image_size: int = 48
    data_distractor_count: int = 2
    data_color_similarity: float = 0.25
    data_seed: int = 0
    # model architecture
    model_num_videos: int = 8
    model_embedding_dim: int = 20
    model_input_channels: int = 3
    model_trunk_channels: tuple[int, ...] = (8, 16, 16)
    model_seed: int = 0
    # optimization
    loss_mode: str = "none"
    learning_rate: float = 1e-5
    momentum: float = 0.9
    weight_decay: float = 5e-4
    parent_epochs: int = 50
    finetune_iters: int = 200
    vl_weight: float = 1.0
    batch_size: int = 1
    seed: int = 0
    # loss parameters
    pair_samples: int = 256
    pair_margin: float = 1.0
    center_margin: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            num_train_videos=self.data_num_train_videos,
            num_test_videos=self.data_num_test_videos,
            frames_per_video=self.data_frames_per_video,
            image_size=self.data_image_size,
            distractor_count=self.data_distractor_count,
            color_similarity=self.data_color_similarity,
            seed=self.data_seed,
        )

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            num_videos=self.model_num_videos,
            embedding_dim=self.model_embedding_dim,
            input_channels=self.model_input_channels,
            trunk_channels=self.model_trunk_channels,
            seed=self.model_seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            loss_mode=self.loss_mode,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            parent_epochs=self.parent_epochs,
            finetune_iters=self.finetune_iters,
            vl_weight=self.vl_weight,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    def pair_config(self) -> PairConfig:
        return PairConfig(samples_per_part=self.pair_samples, margin=self.pair_margin)

    def center_config(self) -> CenterConfig:
        return CenterConfig(margin=self.center_margin)

    def mixed_config(self) -> MixedConfig:
        return MixedConfig(beta1=self.beta1, beta2=self.beta2)

    def validate(self) -> None:
        """Construct every sub-config so their invariants all run."""
        self.synth_config()
        self.model_config()
        self.train_config()
        self.pair_config()
        self.center_config()
        self.mixed_config()


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_value(key: str, text: str):
    kind = _FIELDS[key].type
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "str":
            return text
    except ValueError:
        raise ConfigError(f"key {key!r}: expected {kind}, got {text!r}") from None
    return _tuple_of_ints(text)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines over ``base`` (package defaults if None).

    Blank lines and ``#`` comments are skipped; a line without ``=``, an
    unknown key, a repeated key, or an unparsable value is an error.
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, value)
    defaults = base if base is not None else RunConfig()
    config = replace(defaults, **values)
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def render_config(config: RunConfig) -> str:
    """Render a config as parseable ``key = value`` lines, one per field."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def read_config(path) -> RunConfig:
    """Parse the config file at ``path`` over package defaults."""
    try:
        text = open(path, "r", encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
