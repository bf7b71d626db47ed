"""Two-phase training protocol plus checkpointing and evaluation.

Parent training fits the shared trunk and all three heads across the
training videos, pairing the segmentation loss with an optional
video-identity loss. Online fine-tuning then adapts a parent checkpoint to
a single sequence using only its first annotated frame. Both phases run
plain SGD with momentum and weight decay, single-threaded and bit-exactly
reproducible from (seed, config, dataset).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import VideoSequence
from .diffcore import Graph, GraphError, _stable_sigmoid, finite_diff_check
from .losses import (
    CenterConfig,
    MixedConfig,
    PairConfig,
    _bce_subgraph,
    _mixed_subgraph,
    _pair_endpoints,
    build_bce_graph,
    build_center_graph,
    build_mixed_graph,
    build_pair_graph,
    build_video_loss_graph,
    check_mask,
    hd_pair_loss,
    mixed_loss,
    video_loss_2d,
    weighted_bce,
)
from .metrics import SequenceScore, j_mean_sequence
from .model import Model, ModelConfig, attach_backbone, build_model

LOSS_MODES = ("none", "v2d", "vhd", "vmixed")

# Hyperparameters for full-scale training of a pretrained backbone, where
# logits start large and well-shaped: tiny steps, long schedules. The
# desk-scale defaults in TrainConfig suit randomly initialized models.
REFERENCE_PRESET = {
    "learning_rate": 1e-8,
    "parent_epochs": 240,
    "finetune_iters": 10000,
}

FROZEN_FINETUNE_HEADS = ("head_video", "head_embed")


class TrainerError(RuntimeError):
    """Training failure; carries the last good state when one exists."""

    def __init__(self, message: str, checkpoint: "Checkpoint | None" = None):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and protocol settings shared by both training phases."""

    loss_mode: str = "none"
    # The losses sum over pixels rather than averaging, so gradients scale
    # with frame area and the step must stay small: at 48x48, rates around
    # 1e-4 and above saturate the trunk (dead relus) within a few epochs,
    # and 3e-5 survives ~40 epochs before an occasional gradient spike
    # kills it. 1e-5 rides out those spikes over long schedules.
    learning_rate: float = 1e-5
    momentum: float = 0.9
    weight_decay: float = 5e-4
    parent_epochs: int = 50
    finetune_iters: int = 200
    vl_weight: float = 1.0
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        # learning_rate 0 is allowed: it freezes the optimizer, which the
        # no-op contracts rely on.
        if not 0.0 <= self.learning_rate < np.inf:
            raise ValueError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.vl_weight < 0:
            raise ValueError(f"vl_weight must be >= 0, got {self.vl_weight}")
        if self.parent_epochs < 0:
            raise ValueError(f"parent_epochs must be >= 0, got {self.parent_epochs}")
        if self.finetune_iters < 0:
            raise ValueError(f"finetune_iters must be >= 0, got {self.finetune_iters}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


# -- optimizer -------------------------------------------------------------


def sgd_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: dict[str, np.ndarray],
    cfg: TrainConfig,
    names: list[str] | None = None,
) -> None:
    """One in-place SGD update with momentum and weight decay.

    g' = g + weight_decay * theta;  v <- momentum * v + g';  theta -= lr * v.

    ``names`` restricts the update to a subset of parameters (used to
    freeze heads); omitted parameters keep both value and momentum buffer
    bit-identical. All gradients are validated before anything mutates, so
    a non-finite gradient never leaves a half-applied step behind.
    """
    selected = list(params) if names is None else names
    for name in selected:
        g = grads[name]
        if g.shape != params[name].shape:
            raise TrainerError(
                f"gradient shape {g.shape} does not match parameter {name!r} "
                f"shape {params[name].shape}"
            )
        if not np.isfinite(g).all():
            raise TrainerError(f"non-finite gradient for parameter {name!r}")
    for name in selected:
        theta = params[name]
        v = state[name]
        v *= cfg.momentum
        v += grads[name] + cfg.weight_decay * theta
        theta -= cfg.learning_rate * v


# -- checkpoints -----------------------------------------------------------


class CheckpointError(ValueError):
    pass


CHECKPOINT_MAGIC = b"VLCK"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    """A complete training state: parameters, momentum, and provenance."""

    model_config: ModelConfig
    params: dict[str, np.ndarray]
    momentum: dict[str, np.ndarray]
    metadata: dict[str, str] = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    def to_model(self) -> Model:
        return Model(self.model_config, {k: v.copy() for k, v in self.params.items()})

    def momentum_state(self) -> dict[str, np.ndarray]:
        """A mutable copy of the momentum buffers, zeros where absent."""
        return {
            k: self.momentum[k].copy() if k in self.momentum else np.zeros_like(v)
            for k, v in self.params.items()
        }


def _snapshot(
    config: ModelConfig,
    params: dict[str, np.ndarray],
    state: dict[str, np.ndarray],
    phase: str,
    epoch: int,
    seed: int,
) -> Checkpoint:
    return Checkpoint(
        model_config=config,
        params={k: v.copy() for k, v in params.items()},
        momentum={k: v.copy() for k, v in state.items()},
        metadata={"phase": phase, "epoch": str(epoch), "seed": str(seed)},
    )


_MODEL_META_KEYS = (
    "model_input_channels",
    "model_trunk_channels",
    "model_num_videos",
    "model_embedding_dim",
    "model_seed",
)


def _config_to_metadata(config: ModelConfig) -> dict[str, str]:
    return {
        "model_input_channels": str(config.input_channels),
        "model_trunk_channels": ",".join(str(c) for c in config.trunk_channels),
        "model_num_videos": str(config.num_videos),
        "model_embedding_dim": str(config.embedding_dim),
        "model_seed": str(config.seed),
    }


def _config_from_metadata(meta: dict[str, str], path) -> ModelConfig:
    missing = [k for k in _MODEL_META_KEYS if k not in meta]
    if missing:
        raise CheckpointError(f"{path}: metadata missing keys {missing}")
    try:
        return ModelConfig(
            input_channels=int(meta.pop("model_input_channels")),
            trunk_channels=tuple(int(c) for c in meta.pop("model_trunk_channels").split(",")),
            num_videos=int(meta.pop("model_num_videos")),
            embedding_dim=int(meta.pop("model_embedding_dim")),
            seed=int(meta.pop("model_seed")),
        )
    except ValueError as exc:
        raise CheckpointError(f"{path}: invalid model metadata: {exc}") from exc


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    """Serialize to the binary layout (see README, "Checkpoint files")."""
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<I", ckpt.version)
    tensors = list(ckpt.params.items())
    tensors += [("mom/" + name, arr) for name, arr in ckpt.momentum.items()]
    blob += struct.pack("<I", len(tensors))
    for name, arr in tensors:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        encoded = name.encode("utf-8")
        blob += struct.pack("<I", len(encoded)) + encoded
        blob += struct.pack("<I", arr.ndim)
        for dim in arr.shape:
            blob += struct.pack("<I", dim)
        blob += arr.tobytes(order="C")
    meta = dict(_config_to_metadata(ckpt.model_config))
    meta.update(ckpt.metadata)
    text = "".join(f"{k}={v}\n" for k, v in sorted(meta.items()))
    encoded = text.encode("utf-8")
    blob += struct.pack("<I", len(encoded)) + encoded
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic bytes)")
    offset = 4

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise CheckpointError(
                f"{path}: truncated checkpoint while reading {what} "
                f"(need {n} bytes at offset {offset}, file has {len(data)})"
            )
        chunk = data[offset : offset + n]
        offset += n
        return chunk

    def u32(what: str) -> int:
        return struct.unpack("<I", take(4, what))[0]

    version = u32("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    count = u32("tensor count")
    params: dict[str, np.ndarray] = {}
    momentum: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = u32("tensor name length")
        try:
            name = take(name_len, "tensor name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError(f"{path}: malformed tensor name: {exc}") from exc
        rank = u32(f"rank of {name!r}")
        dims = tuple(u32(f"dim of {name!r}") for _ in range(rank))
        size = int(np.prod(dims, dtype=np.int64)) if dims else 1
        raw = take(8 * size, f"values of {name!r}")
        arr = np.array(np.frombuffer(raw, dtype="<f8"), dtype=np.float64).reshape(dims)
        target, key = (momentum, name[4:]) if name.startswith("mom/") else (params, name)
        if key in target:
            raise CheckpointError(f"{path}: duplicate tensor {name!r}")
        target[key] = arr
    meta_len = u32("metadata length")
    try:
        text = take(meta_len, "metadata").decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CheckpointError(f"{path}: malformed metadata block: {exc}") from exc
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes after payload")
    meta: dict[str, str] = {}
    for line in text.splitlines():
        if not line:
            continue
        if "=" not in line:
            raise CheckpointError(f"{path}: malformed metadata line {line!r}")
        k, v = line.split("=", 1)
        meta[k] = v
    config = _config_from_metadata(meta, path)
    for key, arr in momentum.items():
        if key in params and arr.shape != params[key].shape:
            raise CheckpointError(
                f"{path}: momentum buffer {key!r} shape {arr.shape} does not "
                f"match parameter shape {params[key].shape}"
            )
    return Checkpoint(
        model_config=config, params=params, momentum=momentum, metadata=meta, version=version
    )


# -- parent training -------------------------------------------------------


def _step_seed(seed: int, epoch: int, frame_index: int) -> int:
    """Per-step sampling seed derived from (run seed, epoch, frame id)."""
    ss = np.random.SeedSequence((seed, epoch, frame_index))
    return int(ss.generate_state(1, np.uint64)[0])


def _frame_loss(
    ev,
    mask: np.ndarray,
    v_id: int,
    cfg: TrainConfig,
    pair_cfg: PairConfig,
    center_cfg: CenterConfig,
    mix: MixedConfig,
    sample_seed: int,
) -> tuple[float, dict[int, np.ndarray]]:
    """Total loss for one frame plus the backward seeds for each used head."""
    outputs = ev.graph.outputs
    bce = weighted_bce(ev.output("pred_logits"), mask)
    total = bce.value
    seeds = {outputs["pred_logits"]: bce.input_gradient}
    if cfg.loss_mode == "none" or cfg.vl_weight == 0.0:
        return total, seeds
    if cfg.loss_mode == "v2d":
        vl = video_loss_2d(ev.output("video_logits"), mask, v_id)
        head = "video_logits"
    elif cfg.loss_mode == "vhd":
        vl = hd_pair_loss(ev.output("embedding"), mask, replace(pair_cfg, seed=sample_seed))
        head = "embedding"
    else:
        vl = mixed_loss(
            ev.output("embedding"), mask, replace(pair_cfg, seed=sample_seed), center_cfg, mix
        )
        head = "embedding"
    if vl.valid:
        total += cfg.vl_weight * vl.value
        seeds[outputs[head]] = cfg.vl_weight * vl.input_gradient
    return total, seeds


def train_parent(
    model: Model,
    train_videos: list[VideoSequence],
    cfg: TrainConfig,
    pair_cfg: PairConfig = PairConfig(),
    center_cfg: CenterConfig = CenterConfig(),
    mix: MixedConfig = MixedConfig(),
    *,
    start_epoch: int = 0,
    momentum_state: dict[str, np.ndarray] | None = None,
    on_epoch: Callable[[int, float], None] | None = None,
) -> tuple[Checkpoint, list[float]]:
    """Parent phase: SGD over seeded-shuffled frames of all training videos.

    Per frame the total loss is weighted_bce on the prediction head plus
    vl_weight times the video loss chosen by ``cfg.loss_mode``. Runs
    ``cfg.parent_epochs`` epochs starting at ``start_epoch`` (resuming a
    checkpoint continues the exact shuffle/sampling streams of an
    uninterrupted run). Returns the final checkpoint and the per-epoch mean
    of the per-frame total losses. Mutates ``model.params`` in place.
    """
    if model.config.num_videos < len(train_videos):
        raise TrainerError(
            f"model has {model.config.num_videos} video channels for "
            f"{len(train_videos)} training videos"
        )
    table = [
        (vi, fi) for vi, video in enumerate(train_videos) for fi in range(len(video.frames))
    ]
    if not table:
        raise TrainerError("no training frames")
    state = (
        momentum_state
        if momentum_state is not None
        else {k: np.zeros_like(v) for k, v in model.params.items()}
    )
    param_names = list(model.params)
    history: list[float] = []
    for epoch in range(start_epoch, start_epoch + cfg.parent_epochs):
        order = np.random.default_rng(np.random.SeedSequence((cfg.seed, epoch)))
        order = order.permutation(len(table))
        totals: list[float] = []
        for lo in range(0, len(order), cfg.batch_size):
            batch_grads: dict[str, np.ndarray] | None = None
            for flat_idx in order[lo : lo + cfg.batch_size]:
                vi, fi = table[flat_idx]
                video = train_videos[vi]
                try:
                    ev = model.evaluate(video.frames[fi])
                    total, seeds = _frame_loss(
                        ev, video.masks[fi], video.v_id, cfg, pair_cfg, center_cfg,
                        mix, _step_seed(cfg.seed, epoch, int(flat_idx)),
                    )
                    if not np.isfinite(total):
                        raise GraphError(f"total loss is {total}")
                    grads = ev.backward(seeds=seeds)
                except GraphError as exc:
                    raise TrainerError(
                        f"non-finite loss at epoch {epoch}, video {video.name!r}, "
                        f"frame {fi}: {exc}",
                        checkpoint=_snapshot(
                            model.config, model.params, state, "parent", epoch, cfg.seed
                        ),
                    ) from exc
                totals.append(total)
                if batch_grads is None:
                    batch_grads = {k: grads[k] for k in param_names}
                else:
                    for k in param_names:
                        batch_grads[k] = batch_grads[k] + grads[k]
            sgd_step(model.params, batch_grads, state, cfg)
        history.append(float(np.mean(totals)))
        if on_epoch is not None:
            on_epoch(epoch, history[-1])
    final = start_epoch + cfg.parent_epochs
    return (
        _snapshot(model.config, model.params, state, "parent", final, cfg.seed),
        history,
    )


# -- online fine-tuning ----------------------------------------------------


def finetune_online(
    parent: Checkpoint,
    first_frame: np.ndarray,
    first_mask: np.ndarray,
    cfg: TrainConfig,
) -> Checkpoint:
    """Adapt a parent checkpoint to one sequence's first annotated frame.

    Optimizes only weighted_bce on the prediction head; the video and
    embedding heads receive no loss and are excluded from the update, so
    their parameters stay bit-identical (weight decay would otherwise
    shrink them). Momentum starts fresh.
    """
    m = check_mask(first_mask)
    if m.sum() == 0:
        raise TrainerError("first-frame mask is empty; nothing to fine-tune on")
    model = parent.to_model()
    frozen = {
        f"{head}/{suffix}" for head in FROZEN_FINETUNE_HEADS for suffix in ("w", "b")
    }
    trainable = [name for name in model.params if name not in frozen]
    state = {k: np.zeros_like(v) for k, v in model.params.items()}
    for iteration in range(cfg.finetune_iters):
        try:
            ev = model.evaluate(first_frame)
            res = weighted_bce(ev.output("pred_logits"), m)
            if not np.isfinite(res.value):
                raise GraphError(f"loss is {res.value}")
            grads = ev.backward(seeds={ev.graph.outputs["pred_logits"]: res.input_gradient})
        except GraphError as exc:
            raise TrainerError(
                f"non-finite loss at fine-tune iteration {iteration}: {exc}",
                checkpoint=_snapshot(
                    model.config, model.params, state, "finetune", iteration, cfg.seed
                ),
            ) from exc
        sgd_step(model.params, grads, state, cfg, names=trainable)
    return _snapshot(
        model.config, model.params, state, "finetune", cfg.finetune_iters, cfg.seed
    )


# -- evaluation ------------------------------------------------------------


def predict_mask(model: Model, frame: np.ndarray) -> np.ndarray:
    """Binary segmentation of one frame: sigmoid(pred logits) > 0.5."""
    logits = model.forward(frame).pred_logits[:, :, 0]
    return (_stable_sigmoid(logits) > 0.5).astype(np.uint8)


def evaluate(model: Model, video: VideoSequence) -> SequenceScore:
    """Forward every frame, threshold, and score against the annotations.

    Frame 0 holds the given annotation, so scoring skips it.
    """
    preds = [predict_mask(model, frame) for frame in video.frames]
    return j_mean_sequence(preds, list(video.masks), skip_first=True, name=video.name)


def embedding_separation_ratio(model: Model, videos: list[VideoSequence]) -> float:
    """Mean over frames of inter-center distance / intra-part spread.

    For each frame's embedding, the two part centers are the mean vectors
    over mask foreground and background; the spread of a part is the mean
    distance of its pixels to its center. Larger ratios mean the two parts
    are better separated relative to how tight they are. Single-class
    frames are skipped.
    """
    ratios: list[float] = []
    for video in videos:
        for frame, mask in zip(video.frames, video.masks):
            emb = model.forward(frame).embedding
            fg = np.asarray(mask) != 0
            if fg.sum() == 0 or (~fg).sum() == 0:
                continue
            vectors_fg = emb[fg]
            vectors_bg = emb[~fg]
            center_fg = vectors_fg.mean(axis=0)
            center_bg = vectors_bg.mean(axis=0)
            inter = float(np.linalg.norm(center_fg - center_bg))
            spread_fg = float(np.linalg.norm(vectors_fg - center_fg, axis=1).mean())
            spread_bg = float(np.linalg.norm(vectors_bg - center_bg, axis=1).mean())
            intra = 0.5 * (spread_fg + spread_bg)
            ratios.append(inter / max(intra, 1e-12))
    if not ratios:
        raise TrainerError("no two-part frames to measure separation on")
    return float(np.mean(ratios))


# -- gradient-check harness ------------------------------------------------


def build_composite_graph(
    config: ModelConfig,
    params: dict[str, np.ndarray],
    height: int,
    width: int,
    mask: np.ndarray,
    v_id: int,
    pair_cfg: PairConfig,
    center_cfg: CenterConfig,
    mix: MixedConfig,
    vl_weight: float = 1.0,
) -> Graph:
    """The full training objective as one graph over image and parameters.

    total = bce(pred head) + vl_weight * (bce on video channel v_id
    + mixed loss on the embedding head), so every parameter of every head
    participates in one scalar output.
    """
    m = check_mask(mask)
    ends = _pair_endpoints(m, pair_cfg)
    if ends is None:
        raise ValueError("mask must have both parts for the composite graph")
    g = Graph(params)
    heads = attach_backbone(g, config, height, width)
    bce = _bce_subgraph(g, heads["pred_logits"], m)
    v2d = _bce_subgraph(g, g.channel_select(heads["video_logits"], v_id), m)
    vmix = _mixed_subgraph(
        g, heads["embedding"], m, config.embedding_dim, ends, pair_cfg, center_cfg, mix
    )
    g.mark_output("loss", g.add(bce, g.scale(g.add(v2d, vmix), vl_weight)))
    return g


@dataclass
class GradcheckEntry:
    name: str
    max_rel_err: float
    n_checked: int
    n_excluded: int
    passed: bool


def _gradcheck_mask(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    m = (rng.random((height, width)) < 0.4).astype(np.uint8)
    if m.sum() == 0:
        m[height // 2, width // 2] = 1
    if m.sum() == m.size:
        m[0, 0] = 0
    return m


def gradcheck_suite(
    num_seeds: int = 10, step: float = 1e-3, tolerance: float = 1e-4, base_seed: int = 0
) -> list[GradcheckEntry]:
    """Finite-difference checks for every loss and the full model composite.

    Each named case runs ``num_seeds`` independent random instances (seeds
    ``base_seed`` through ``base_seed + num_seeds - 1``); the entry
    aggregates the worst relative error over all checked components.
    Components where the numeric reference is invalid (a kink inside the
    interval, or unconverged truncation) are excluded by the harness and
    counted in n_excluded.
    """
    stats: dict[str, list] = {}

    def record(name: str, report) -> None:
        entry = stats.setdefault(name, [0.0, 0, 0, True])
        entry[0] = max(entry[0], report.max_rel_err)
        entry[1] += sum(leaf.n_checked for leaf in report.leaves)
        entry[2] += report.n_excluded
        entry[3] = entry[3] and report.passed

    num_videos, dim = 3, 4
    for s in range(base_seed, base_seed + num_seeds):
        rng = np.random.default_rng(np.random.SeedSequence((17, s)))
        mask = _gradcheck_mask(rng, 5, 4)
        pair_cfg = PairConfig(samples_per_part=6, margin=1.0, seed=s)
        center_cfg = CenterConfig(margin=1.0)
        mix = MixedConfig(beta1=0.7, beta2=1.3)

        g = build_bce_graph(mask)
        record("weighted_bce", finite_diff_check(
            g, {"pred_logits": rng.normal(0.0, 2.0, (5, 4, 1))}, step, tolerance))

        g = build_video_loss_graph(mask, s % num_videos, num_videos)
        record("video_loss_2d", finite_diff_check(
            g, {"video_logits": rng.normal(0.0, 2.0, (5, 4, num_videos))}, step, tolerance))

        emb = rng.normal(0.0, 1.0, (5, 4, dim))
        g = build_pair_graph(mask, dim, pair_cfg)
        record("hd_pair_loss", finite_diff_check(g, {"embedding": emb}, step, tolerance))

        g = build_center_graph(mask, dim, center_cfg)
        record("center_loss", finite_diff_check(g, {"embedding": emb}, step, tolerance))

        g = build_mixed_graph(mask, dim, pair_cfg, center_cfg, mix)
        record("mixed_loss", finite_diff_check(g, {"embedding": emb}, step, tolerance))

        # Composite probe: the trunk is scaled up and the image drawn with
        # strong contrast, since at plain random init the embedding head
        # varies so little across pixels that every distance sits in the
        # high-curvature region near zero and most components would be
        # excluded as unconverged rather than actually checked.
        config = ModelConfig(
            num_videos=num_videos, embedding_dim=dim, input_channels=2,
            trunk_channels=(4, 4), seed=1000 + s,
        )
        model = build_model(config)
        params = {
            k: v * (2.5 if k.startswith("trunk") else 1.0)
            for k, v in model.params.items()
        }
        image = rng.uniform(0.0, 3.0, (8, 8, 2))
        comp_mask = _gradcheck_mask(rng, 8, 8)
        g = build_composite_graph(
            config, params, 8, 8, comp_mask, s % num_videos,
            pair_cfg, center_cfg, mix,
        )
        record("model_composite", finite_diff_check(
            g, {"image": image}, step, tolerance))

    return [
        GradcheckEntry(name, v[0], v[1], v[2], v[3]) for name, v in stats.items()
    ]
