"""Tiny fully-convolutional segmentation network: shared trunk, three heads.

The trunk is a stack of 3x3 conv + rectifier blocks (stride 1, zero padded,
so spatial size is preserved everywhere). Three parallel 1x1 convolution
heads read the final trunk feature:

  pred_logits   H x W x 1   foreground scores, sigmoid applied downstream
  video_logits  H x W x V   one channel per training video
  embedding     H x W x D   per-pixel embedding vectors

Parameters are float64 and initialized from a seeded uniform distribution
in [-s, s] with s = 1 / sqrt(fan_in), weights and biases alike, drawn in a
fixed layer order so a seed pins the full initial state. Graphs are cached
per input size over one shared parameter dict, so training on one size and
evaluating on another sees the same parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffcore import Evaluation, Graph, run_graph

__all__ = ["ModelConfig", "HeadOutputs", "Model", "build_model", "forward"]

HEAD_NAMES = ("head_pred", "head_video", "head_embed")


@dataclass(frozen=True)
class ModelConfig:
    num_videos: int = 8
    embedding_dim: int = 20
    input_channels: int = 3
    trunk_channels: tuple[int, ...] = (8, 16, 16)
    seed: int = 0

    def __post_init__(self):
        if self.num_videos < 1:
            raise ValueError(f"num_videos must be >= 1, got {self.num_videos}")
        if self.embedding_dim < 1:
            raise ValueError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.input_channels < 1:
            raise ValueError(f"input_channels must be >= 1, got {self.input_channels}")
        if len(self.trunk_channels) < 1 or any(c < 1 for c in self.trunk_channels):
            raise ValueError(f"bad trunk_channels {self.trunk_channels}")
        object.__setattr__(self, "trunk_channels", tuple(int(c) for c in self.trunk_channels))


@dataclass(frozen=True)
class HeadOutputs:
    pred_logits: np.ndarray
    video_logits: np.ndarray
    embedding: np.ndarray


def _layer_plan(config: ModelConfig) -> list[tuple[str, tuple[int, int, int, int]]]:
    """(name, kernel shape) for every layer, in initialization order."""
    plan = []
    cin = config.input_channels
    for i, cout in enumerate(config.trunk_channels):
        plan.append((f"trunk{i}", (3, 3, cin, cout)))
        cin = cout
    plan.append(("head_pred", (1, 1, cin, 1)))
    plan.append(("head_video", (1, 1, cin, config.num_videos)))
    plan.append(("head_embed", (1, 1, cin, config.embedding_dim)))
    return plan


def parameter_count(config: ModelConfig) -> int:
    """Closed-form count: sum over layers of (kh*kw*cin + 1) * cout."""
    return sum((kh * kw * cin + 1) * cout for _, (kh, kw, cin, cout) in _layer_plan(config))


def attach_backbone(g: Graph, config: ModelConfig, height: int, width: int) -> dict[str, int]:
    """Build the image input, trunk, and heads into an existing graph.

    Returns the node index of each head output keyed by its output name
    (pred_logits / video_logits / embedding); marks no outputs itself so
    callers can stack further computation on top.
    """
    x = g.input("image", (height, width, config.input_channels))
    h = x
    heads: dict[str, int] = {}
    for name, _ in _layer_plan(config):
        w = g.param(f"{name}/w")
        b = g.param(f"{name}/b")
        if name.startswith("trunk"):
            h = g.relu(g.conv2d(h, w, b))
        else:
            out_name = {
                "head_pred": "pred_logits",
                "head_video": "video_logits",
                "head_embed": "embedding",
            }[name]
            heads[out_name] = g.conv2d(h, w, b)
    return heads


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, np.ndarray]
    _graphs: dict[tuple[int, int], Graph] = field(default_factory=dict, repr=False)

    def graph_for(self, height: int, width: int) -> Graph:
        """The static graph for one input size; cached, parameters shared."""
        key = (height, width)
        if key in self._graphs:
            return self._graphs[key]
        g = Graph(self.params)
        for out_name, node in attach_backbone(g, self.config, height, width).items():
            g.mark_output(out_name, node)
        self._graphs[key] = g
        return g

    def evaluate(self, image: np.ndarray) -> Evaluation:
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3 or image.shape[2] != self.config.input_channels:
            raise ValueError(
                f"image shape {image.shape} does not match "
                f"{self.config.input_channels} input channels"
            )
        g = self.graph_for(image.shape[0], image.shape[1])
        return run_graph(g, {"image": image})

    def forward(self, image: np.ndarray) -> HeadOutputs:
        ev = self.evaluate(image)
        return HeadOutputs(
            pred_logits=ev.output("pred_logits"),
            video_logits=ev.output("video_logits"),
            embedding=ev.output("embedding"),
        )

    def parameter_count(self) -> int:
        return sum(arr.size for arr in self.params.values())

    def head_param_names(self, heads: tuple[str, ...] = HEAD_NAMES) -> list[str]:
        return [f"{h}/{suffix}" for h in heads for suffix in ("w", "b")]


def build_model(config: ModelConfig) -> Model:
    """Seeded construction; the same seed yields bit-identical parameters."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    params: dict[str, np.ndarray] = {}
    for name, (kh, kw, cin, cout) in _layer_plan(config):
        s = 1.0 / np.sqrt(kh * kw * cin)
        params[f"{name}/w"] = rng.uniform(-s, s, size=(kh, kw, cin, cout))
        params[f"{name}/b"] = rng.uniform(-s, s, size=cout)
    return Model(config, params)


def forward(model: Model, image: np.ndarray) -> HeadOutputs:
    return model.forward(image)
