"""Segmentation losses with analytic gradients and matching graph builders.

Five losses over a binary mask (1 = foreground, 0 = background):

  weighted_bce    class-balanced cross entropy over sigmoid probabilities,
                  summed (not averaged) over pixels, foreground term weighted
                  |Y-|/|Y| and background term |Y+|/|Y|
  video_loss_2d   the same loss restricted to one channel of a multi-video
                  score grid; off-channel gradients are exactly zero
  hd_pair_loss    contrastive hinge over randomly sampled point pairs in an
                  embedding grid: same-part pairs pay their distance,
                  cross-part pairs pay max(0, margin - distance)
  center_loss     hinge on the distance between the foreground and
                  background mean embeddings
  mixed_loss      beta1 * center_loss + beta2 * hd_pair_loss

Each loss has two routes: a direct numpy implementation returning a
LossResult (value, gradient w.r.t. the input grid, validity flag), and a
builder that compiles the identical computation to a diffcore graph with
the grid as its sole input leaf. The two routes agree to float64
round-off; tests pin them together and check both against finite
differences.

Sampling is driven by an explicit seed so every loss is a pure function of
its arguments. Frames whose mask has an empty part cannot form pairs or
centers; those return valid=False with a zero value and zero gradient
instead of erroring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import Graph, _stable_sigmoid

__all__ = [
    "PairConfig",
    "CenterConfig",
    "MixedConfig",
    "LossResult",
    "PROB_EPS",
    "check_mask",
    "weighted_bce",
    "video_loss_2d",
    "sample_points",
    "pair_hinge",
    "hd_pair_loss",
    "center_loss",
    "mixed_loss",
    "build_bce_graph",
    "build_video_loss_graph",
    "build_pair_graph",
    "build_center_graph",
    "build_mixed_graph",
    "draw_pairing",
]

# Sigmoid outputs are clamped to [PROB_EPS, 1 - PROB_EPS] before the log so
# confident predictions cannot produce infinities; the gradient is zero in
# the clamped region, mirroring the clamp operation's derivative.
PROB_EPS = 1e-7


@dataclass(frozen=True)
class PairConfig:
    samples_per_part: int = 256
    margin: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_part < 1:
            raise ValueError(f"samples_per_part must be >= 1, got {self.samples_per_part}")
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")


@dataclass(frozen=True)
class CenterConfig:
    margin: float = 1.0

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")


@dataclass(frozen=True)
class MixedConfig:
    beta1: float = 1.0
    beta2: float = 1.0

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("mixing coefficients must be nonnegative")
        if self.beta1 == 0 and self.beta2 == 0:
            raise ValueError("mixing coefficients must not both be zero")


@dataclass(frozen=True)
class LossResult:
    value: float
    input_gradient: np.ndarray
    valid: bool = True


def check_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-d (H, W), got shape {mask.shape}")
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("mask must be binary (0 = background, 1 = foreground)")
    return mask.astype(np.float64)


def _bce_weights(mask: np.ndarray) -> tuple[float, float]:
    total = mask.size
    n_fg = float(mask.sum())
    w_pos = (total - n_fg) / total  # |Y-| / |Y|
    return w_pos, 1.0 - w_pos


def weighted_bce(pred_logits: np.ndarray, mask: np.ndarray) -> LossResult:
    """Class-balanced cross entropy, summed over pixels.

    L = -(|Y-|/|Y|) sum_{fg} log p  -  (|Y+|/|Y|) sum_{bg} log(1-p)

    with p the clamped sigmoid of the logits. A single-class mask gives a
    zero weight on the surviving term's complement, so the loss is exactly
    zero there (valid, not an error).
    """
    z = np.asarray(pred_logits, dtype=np.float64)
    m = check_mask(mask)
    if z.shape != (*m.shape, 1):
        raise ValueError(f"logits shape {z.shape} does not match mask {m.shape}")
    w_pos, w_neg = _bce_weights(m)
    fg = m[:, :, None]
    bg = 1.0 - fg

    s = _stable_sigmoid(z)
    p = np.clip(s, PROB_EPS, 1.0 - PROB_EPS)
    q = 1.0 - p
    value = (fg * np.log(p)).sum() * -w_pos + (bg * np.log(q)).sum() * -w_neg

    inside = (s > PROB_EPS) & (s < 1.0 - PROB_EPS)
    dp = fg * (-w_pos) / p + bg * (w_neg / q)
    dz = dp * inside * (s * (1.0 - s))
    return LossResult(float(value), dz)


def video_loss_2d(video_logits: np.ndarray, mask: np.ndarray, v_id: int) -> LossResult:
    """weighted_bce on channel v_id of a multi-video score grid.

    The gradient grid matches the full input; channels other than v_id are
    exactly zero.
    """
    z = np.asarray(video_logits, dtype=np.float64)
    if z.ndim != 3:
        raise ValueError(f"video logits must be (H, W, V), got shape {z.shape}")
    if not 0 <= v_id < z.shape[2]:
        raise ValueError(f"v_id {v_id} out of range for {z.shape[2]} video channels")
    inner = weighted_bce(np.ascontiguousarray(z[:, :, v_id : v_id + 1]), mask)
    grad = np.zeros_like(z)
    grad[:, :, v_id : v_id + 1] = inner.input_gradient
    return LossResult(inner.value, grad)


def sample_points(mask: np.ndarray, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """n seeded point draws from each part of the mask.

    Returns (fg_points, bg_points) as (k, 2) arrays of (row, col), k = n for
    a nonempty part and 0 for an empty one. Parts with at least n pixels are
    sampled without replacement, smaller parts with replacement. ``seed``
    may be an integer or an existing numpy Generator (the foreground draw
    happens first, so several sampling steps can share one stream).
    """
    if n < 1:
        raise ValueError(f"need n >= 1 points, got {n}")
    m = check_mask(mask)
    rng = np.random.default_rng(seed)
    out = []
    for part in (1.0, 0.0):
        coords = np.argwhere(m == part)
        if coords.shape[0] == 0:
            out.append(np.zeros((0, 2), dtype=np.intp))
            continue
        idx = rng.choice(coords.shape[0], size=n, replace=coords.shape[0] < n)
        out.append(coords[idx].astype(np.intp))
    return out[0], out[1]


def pair_hinge(
    e1: np.ndarray, e2: np.ndarray, same: bool, margin: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Contrastive hinge on one embedding pair.

    same=True pays the Euclidean distance itself; same=False pays
    max(0, margin - distance). Returns (value, d/de1, d/de2); the norm's
    gradient at coincident points is defined as zero.
    """
    a = np.asarray(e1, dtype=np.float64)
    b = np.asarray(e2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"embedding dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    r = float(np.sqrt(np.square(d).sum()))
    unit = d / r if r > 0.0 else np.zeros_like(d)
    if same:
        return r, unit, -unit
    gap = margin - r
    if gap > 0.0:
        return gap, -unit, unit
    return 0.0, np.zeros_like(d), np.zeros_like(d)


def draw_pairing(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pair index draws shared by the analytic and graph pair-loss routes.

    Returns (left_idx, right_idx, same) over the 4n pairs: n fg-fg pairs
    (identity vs a random permutation), n bg-bg pairs, then 2n random fg-bg
    pairs. Indices address the fg sample list where same-part rows refer to
    fg, etc.; callers translate via the sampled point arrays.
    """
    perm_fg = rng.permutation(n)
    perm_bg = rng.permutation(n)
    cross_fg = rng.integers(0, n, size=2 * n)
    cross_bg = rng.integers(0, n, size=2 * n)
    ident = np.arange(n)
    left = np.concatenate([ident, ident, cross_fg])
    right = np.concatenate([perm_fg, perm_bg, cross_bg])
    same = np.concatenate([np.ones(2 * n, dtype=bool), np.zeros(2 * n, dtype=bool)])
    return left, right, same


def _pair_endpoints(
    mask: np.ndarray, cfg: PairConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    """Sampled (left_points, right_points, same) for the 4n pairs, or None."""
    rng = np.random.default_rng(cfg.seed)
    fg, bg = sample_points(mask, cfg.samples_per_part, rng)
    if fg.shape[0] == 0 or bg.shape[0] == 0:
        return None
    n = cfg.samples_per_part
    left_idx, right_idx, same = draw_pairing(n, rng)
    left = np.concatenate([fg[left_idx[:n]], bg[left_idx[n : 2 * n]], fg[left_idx[2 * n :]]])
    right = np.concatenate([fg[right_idx[:n]], bg[right_idx[n : 2 * n]], bg[right_idx[2 * n :]]])
    return left, right, same


def hd_pair_loss(embedding: np.ndarray, mask: np.ndarray, cfg: PairConfig) -> LossResult:
    """Mean contrastive hinge over 4n sampled pairs of embedding vectors.

    n same-part pairs from each part plus 2n cross-part pairs, all drawn
    from one seeded stream. The gradient touches only sampled pixels. An
    empty part means no pairs can be formed: valid=False, zero everywhere.
    """
    e = np.asarray(embedding, dtype=np.float64)
    m = check_mask(mask)
    if e.ndim != 3 or e.shape[:2] != m.shape:
        raise ValueError(f"embedding shape {e.shape} does not match mask {m.shape}")
    ends = _pair_endpoints(m, cfg)
    if ends is None:
        return LossResult(0.0, np.zeros_like(e), valid=False)
    left, right, same = ends
    n_pairs = same.size

    dv = e[left[:, 0], left[:, 1]] - e[right[:, 0], right[:, 1]]
    r = np.sqrt(np.square(dv).sum(axis=1))
    gap = cfg.margin - r
    per_pair = np.where(same, r, np.maximum(gap, 0.0))
    value = float(per_pair.mean())

    # d(mean)/d(pair term) = 1/4n; same pairs pull together (+unit on the
    # left end), active cross pairs push apart (-unit on the left end).
    nonzero = r > 0.0
    safe_r = np.where(nonzero, r, 1.0)
    unit = dv / safe_r[:, None]
    coeff = np.where(same, 1.0, np.where(gap > 0.0, -1.0, 0.0)) * nonzero / n_pairs
    contrib = unit * coeff[:, None]
    grad = np.zeros_like(e)
    np.add.at(grad, (left[:, 0], left[:, 1]), contrib)
    np.add.at(grad, (right[:, 0], right[:, 1]), -contrib)
    return LossResult(value, grad)


def _part_means(e: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    fg = m == 1.0
    n_fg = int(fg.sum())
    if n_fg == 0 or n_fg == m.size:
        return None
    return e[fg].mean(axis=0), e[~fg].mean(axis=0)


def center_loss(embedding: np.ndarray, mask: np.ndarray, cfg: CenterConfig) -> LossResult:
    """Hinge on the distance between part-mean embeddings.

    L = max(0, margin - ||mu_fg - mu_bg||) with the means taken over every
    pixel of each part. Once the centers are margin-separated the loss and
    gradient are exactly zero. A single-class mask has only one center:
    valid=False.
    """
    e = np.asarray(embedding, dtype=np.float64)
    m = check_mask(mask)
    if e.ndim != 3 or e.shape[:2] != m.shape:
        raise ValueError(f"embedding shape {e.shape} does not match mask {m.shape}")
    means = _part_means(e, m)
    if means is None:
        return LossResult(0.0, np.zeros_like(e), valid=False)
    mu_fg, mu_bg = means
    d = mu_fg - mu_bg
    r = float(np.sqrt(np.square(d).sum()))
    gap = cfg.margin - r
    if gap <= 0.0:
        return LossResult(0.0, np.zeros_like(e))
    grad = np.zeros_like(e)
    if r > 0.0:
        unit = d / r
        fg = m == 1.0
        grad[fg] = -unit / fg.sum()
        grad[~fg] = unit / (~fg).sum()
    return LossResult(gap, grad)


def mixed_loss(
    embedding: np.ndarray,
    mask: np.ndarray,
    pair_cfg: PairConfig,
    center_cfg: CenterConfig,
    mix: MixedConfig,
) -> LossResult:
    """beta1 * center_loss + beta2 * hd_pair_loss, valid iff both parts are."""
    cl = center_loss(embedding, mask, center_cfg)
    tl = hd_pair_loss(embedding, mask, pair_cfg)
    if not (cl.valid and tl.valid):
        return LossResult(0.0, np.zeros_like(np.asarray(embedding, dtype=np.float64)), False)
    value = mix.beta1 * cl.value + mix.beta2 * tl.value
    grad = mix.beta1 * cl.input_gradient + mix.beta2 * tl.input_gradient
    return LossResult(float(value), grad)


# -- graph builders -------------------------------------------------------
#
# Each builder compiles the loss for one fixed mask (and, for the pair
# loss, one fixed seed) into a graph whose single input leaf is the loss's
# direct input grid. The builders exist to tie the analytic gradients above
# to the general backprop engine; the trainer itself uses the analytic
# route.


def _bce_subgraph(g: Graph, logits_node: int, m: np.ndarray) -> int:
    h, w = m.shape
    w_pos, w_neg = _bce_weights(m)
    fg = g.const(m[:, :, None])
    bg = g.const(1.0 - m[:, :, None])
    p = g.clamp(g.sigmoid(logits_node), PROB_EPS, 1.0 - PROB_EPS)
    q = g.sub(g.const(np.ones((h, w, 1))), p)
    pos_term = g.scale(g.sum(g.mul(fg, g.log(p))), -w_pos)
    neg_term = g.scale(g.sum(g.mul(bg, g.log(q))), -w_neg)
    return g.add(pos_term, neg_term)


def build_bce_graph(mask: np.ndarray) -> Graph:
    m = check_mask(mask)
    g = Graph()
    z = g.input("pred_logits", (*m.shape, 1))
    g.mark_output("loss", _bce_subgraph(g, z, m))
    return g


def build_video_loss_graph(mask: np.ndarray, v_id: int, num_videos: int) -> Graph:
    m = check_mask(mask)
    if not 0 <= v_id < num_videos:
        raise ValueError(f"v_id {v_id} out of range for {num_videos} video channels")
    g = Graph()
    z = g.input("video_logits", (*m.shape, num_videos))
    g.mark_output("loss", _bce_subgraph(g, g.channel_select(z, v_id), m))
    return g


def _pair_subgraph(g: Graph, e_node: int, ends, margin: float) -> int:
    """Mean pair hinge over fixed endpoints; the hinge branch is evaluated
    for every pair and masked, so same-part rows multiply it by zero."""
    left, right, same = ends
    n_pairs = same.size
    dv = g.sub(g.gather(e_node, left[:, 0], left[:, 1]), g.gather(e_node, right[:, 0], right[:, 1]))
    r = g.rownorm(dv)
    hin = g.hinge(g.sub(g.const(np.full((n_pairs, 1, 1), margin)), r))
    same_c = g.const(same.astype(np.float64).reshape(n_pairs, 1, 1))
    diff_c = g.const((~same).astype(np.float64).reshape(n_pairs, 1, 1))
    return g.mean(g.add(g.mul(same_c, r), g.mul(diff_c, hin)))


def _center_subgraph(g: Graph, e_node: int, m: np.ndarray, embedding_dim: int, margin: float) -> int:
    h, w = m.shape
    n_fg = int(m.sum())
    fg = g.const(np.repeat(m[:, :, None], embedding_dim, axis=2))
    bg = g.const(np.repeat(1.0 - m[:, :, None], embedding_dim, axis=2))
    # masked spatial mean times (pixels / part size) = the part mean
    mu_fg = g.scale(g.spatial_mean(g.mul(e_node, fg)), (h * w) / n_fg)
    mu_bg = g.scale(g.spatial_mean(g.mul(e_node, bg)), (h * w) / (m.size - n_fg))
    r = g.rownorm(g.sub(mu_fg, mu_bg))
    return g.hinge(g.sub(g.const(np.full((1, 1, 1), margin)), r))


def build_pair_graph(mask: np.ndarray, embedding_dim: int, cfg: PairConfig) -> Graph | None:
    """Pair loss graph for one mask + seed; None when a part is empty."""
    m = check_mask(mask)
    ends = _pair_endpoints(m, cfg)
    if ends is None:
        return None
    g = Graph()
    e = g.input("embedding", (*m.shape, embedding_dim))
    g.mark_output("loss", _pair_subgraph(g, e, ends, cfg.margin))
    return g


def build_center_graph(mask: np.ndarray, embedding_dim: int, cfg: CenterConfig) -> Graph | None:
    m = check_mask(mask)
    n_fg = int(m.sum())
    if n_fg == 0 or n_fg == m.size:
        return None
    g = Graph()
    e = g.input("embedding", (*m.shape, embedding_dim))
    g.mark_output("loss", _center_subgraph(g, e, m, embedding_dim, cfg.margin))
    return g


def build_mixed_graph(
    mask: np.ndarray,
    embedding_dim: int,
    pair_cfg: PairConfig,
    center_cfg: CenterConfig,
    mix: MixedConfig,
) -> Graph | None:
    m = check_mask(mask)
    ends = _pair_endpoints(m, pair_cfg)
    n_fg = int(m.sum())
    if ends is None or n_fg == 0 or n_fg == m.size:
        return None
    g = Graph()
    e = g.input("embedding", (*m.shape, embedding_dim))
    g.mark_output("loss", _mixed_subgraph(g, e, m, embedding_dim, ends, pair_cfg, center_cfg, mix))
    return g


def _mixed_subgraph(
    g: Graph,
    e_node: int,
    m: np.ndarray,
    embedding_dim: int,
    ends,
    pair_cfg: PairConfig,
    center_cfg: CenterConfig,
    mix: MixedConfig,
) -> int:
    cl = _center_subgraph(g, e_node, m, embedding_dim, center_cfg.margin)
    tl = _pair_subgraph(g, e_node, ends, pair_cfg.margin)
    return g.add(g.scale(cl, mix.beta1), g.scale(tl, mix.beta2))
