"""Synthetic multi-video segmentation benchmark and its on-disk layout.

Each video shows one flat-colored target object (disc, rectangle, or
triangle) moving over a textured background with a smooth random walk plus
occasional jumps. Alongside it move near-target-colored distractor objects
that are never labeled: the mask marks exactly the target's support. Object
placement keeps a pixel gap between objects so every distractor stays a
separate image region. All randomness flows from one seed through a fixed
draw order, so a config is a complete recipe for the dataset.

On disk the layout mirrors the usual video-segmentation arrangement:

    <root>/Images/<video>/<NNNNN>.ppm      binary P6, frame RGB
    <root>/Annotations/<video>/<NNNNN>.pgm binary P5, 0 = background, 255 = fg
    <root>/sets/train.txt, test.txt        one video name per line

Frame numbers are 5-digit from 00000; the line order of the sets files
defines each video's integer identity (v_id). Masks round-trip bit-exactly;
frames are quantized to 8 bits on write.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DatasetError",
    "SynthConfig",
    "VideoSequence",
    "generate_synthetic",
    "write_ppm",
    "read_ppm",
    "write_pgm",
    "read_pgm",
    "write_dataset",
    "read_dataset",
]

# Appearance constants. The target color sits at least MIN_TARGET_CONTRAST
# from the background color; distractor colors sit within the config's
# color_similarity of the target, hence at least the difference from the
# background. Texture and noise amplitudes stay well below that, keeping
# every object detectable in the rendered frames.
MIN_TARGET_CONTRAST = 0.55
TEXTURE_AMPLITUDE = 0.035
PIXEL_NOISE_SIGMA = 0.008
JUMP_PROBABILITY = 0.12
WALK_ACCEL_SIGMA = 0.35
MAX_SPEED = 2.5


class DatasetError(ValueError):
    """Malformed dataset files or an unsatisfiable generation config."""


@dataclass(frozen=True)
class SynthConfig:
    num_train_videos: int = 8
    num_test_videos: int = 4
    frames_per_video: int = 16
    image_size: int = 48
    distractor_count: int = 2
    color_similarity: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.num_train_videos < 1 or self.num_test_videos < 1:
            raise ValueError("need at least one video per split")
        if self.frames_per_video < 2:
            raise ValueError(f"need at least 2 frames per video, got {self.frames_per_video}")
        if self.image_size < 16:
            raise ValueError(f"image_size must be >= 16, got {self.image_size}")
        if self.distractor_count < 0:
            raise ValueError(f"distractor_count must be >= 0, got {self.distractor_count}")
        if not 0.0 < self.color_similarity < MIN_TARGET_CONTRAST:
            raise ValueError(
                f"color_similarity must be in (0, {MIN_TARGET_CONTRAST}), "
                f"got {self.color_similarity}"
            )


@dataclass
class VideoSequence:
    name: str
    v_id: int
    frames: list[np.ndarray]  # (H, W, 3) float64 in [0, 1]
    masks: list[np.ndarray]  # (H, W) uint8 in {0, 1}


# -- rendering -------------------------------------------------------------


def _support(kind: int, size: int, cy: float, cx: float, r: float, extra: float) -> np.ndarray:
    yy, xx = np.ogrid[:size, :size]
    if kind == 0:  # disc
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    if kind == 1:  # rectangle; extra is the aspect of the half-width
        return (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= max(1.0, r * extra))
    # triangle; extra is the orientation angle
    angles = extra + 2.0 * np.pi * np.arange(3) / 3.0
    vy = cy + r * np.sin(angles)
    vx = cx + r * np.cos(angles)
    inside = np.ones((size, size), dtype=bool)
    for k in range(3):
        ay, ax = vy[k], vx[k]
        by, bx = vy[(k + 1) % 3], vx[(k + 1) % 3]
        # vertices are counterclockwise in (y, x) screen coordinates
        inside &= (bx - ax) * (yy - ay) - (by - ay) * (xx - ax) >= 0
    return inside


@dataclass
class _ObjectSpec:
    kind: int
    radius: float
    extra: float
    color: np.ndarray


class _Walker:
    """Random walk with reflective bounds and occasional jumps."""

    def __init__(self, rng: np.random.Generator, lo: float, hi: float):
        self.lo, self.hi = lo, hi
        self.pos = rng.uniform(lo, hi, size=2)
        self.vel = rng.uniform(-1.2, 1.2, size=2)

    def step(self, rng: np.random.Generator) -> None:
        if rng.random() < JUMP_PROBABILITY:
            self.pos = rng.uniform(self.lo, self.hi, size=2)
            self.vel = rng.uniform(-1.2, 1.2, size=2)
            return
        self.vel += rng.normal(0.0, WALK_ACCEL_SIGMA, size=2)
        speed = float(np.sqrt((self.vel**2).sum()))
        if speed > MAX_SPEED:
            self.vel *= MAX_SPEED / speed
        self.pos += self.vel
        for axis in range(2):
            if self.pos[axis] < self.lo:
                self.pos[axis] = self.lo
                self.vel[axis] = abs(self.vel[axis])
            elif self.pos[axis] > self.hi:
                self.pos[axis] = self.hi
                self.vel[axis] = -abs(self.vel[axis])


def _separate(
    pos: np.ndarray,
    obstacles: list[tuple[np.ndarray, float]],
    lo: float,
    hi: float,
    image_size: int,
) -> np.ndarray:
    """Nearest position to ``pos`` keeping the required distance from every
    obstacle, found by push-away iterations with a deterministic grid-scan
    fallback. Raises when no position in the valid range satisfies all
    separations (the objects cannot fit the image)."""

    def ok(p):
        return all(np.sqrt(((p - q) ** 2).sum()) >= sep for q, sep in obstacles)

    p = pos.copy()
    for _ in range(12):
        if ok(p):
            return p
        worst = min(obstacles, key=lambda o: np.sqrt(((p - o[0]) ** 2).sum()) - o[1])
        q, sep = worst
        d = np.sqrt(((p - q) ** 2).sum())
        direction = (p - q) / d if d > 1e-9 else np.array([1.0, 0.0])
        p = np.clip(q + direction * sep, lo, hi)
    for y in np.arange(lo, hi + 0.5):
        for x in np.arange(lo, hi + 0.5):
            cand = np.array([y, x])
            if ok(cand):
                return cand
    raise DatasetError(
        f"cannot place objects with the required separation in a "
        f"{image_size}x{image_size} image; reduce object count or grow the image"
    )


def _smooth_noise(rng: np.random.Generator, size: int, cells: int = 6) -> np.ndarray:
    coarse = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1))
    t = np.linspace(0.0, cells, size)
    i0 = np.minimum(t.astype(int), cells - 1)
    f = t - i0
    top = coarse[i0][:, i0] * np.outer(1 - f, 1 - f) + coarse[i0][:, i0 + 1] * np.outer(1 - f, f)
    bot = coarse[i0 + 1][:, i0] * np.outer(f, 1 - f) + coarse[i0 + 1][:, i0 + 1] * np.outer(f, f)
    return top + bot


def _pick_color(rng: np.random.Generator, away_from: np.ndarray, min_dist: float) -> np.ndarray:
    for _ in range(500):
        c = rng.uniform(0.05, 0.95, size=3)
        if np.sqrt(((c - away_from) ** 2).sum()) >= min_dist:
            return c
    raise DatasetError("could not draw a target color with enough contrast")


def _near_color(rng: np.random.Generator, center: np.ndarray, radius: float) -> np.ndarray:
    for _ in range(500):
        delta = rng.uniform(-radius, radius, size=3)
        if np.sqrt((delta**2).sum()) <= radius:
            return np.clip(center + delta, 0.0, 1.0)
    raise DatasetError("could not draw a distractor color")


def _draw_object(rng: np.random.Generator, image_size: int, frac_lo: float, frac_hi: float,
                 color: np.ndarray) -> _ObjectSpec:
    r_lo = max(1, round(frac_lo * image_size))
    r_hi = max(r_lo, round(frac_hi * image_size))
    radius = float(rng.integers(r_lo, r_hi + 1))
    kind = int(rng.integers(0, 3))
    extra = float(rng.uniform(0.6, 1.0)) if kind == 1 else float(rng.uniform(0.0, 2 * np.pi))
    return _ObjectSpec(kind, radius, extra, color)


def _generate_video(rng: np.random.Generator, cfg: SynthConfig, name: str, v_id: int) -> VideoSequence:
    size = cfg.image_size
    bg_color = rng.uniform(0.25, 0.75, size=3)
    target_color = _pick_color(rng, bg_color, MIN_TARGET_CONTRAST)
    target = _draw_object(rng, size, 0.12, 0.18, target_color)
    distractors = [
        _draw_object(rng, size, 0.08, 0.12, _near_color(rng, target_color, cfg.color_similarity))
        for _ in range(cfg.distractor_count)
    ]
    texture = _smooth_noise(rng, size) * TEXTURE_AMPLITUDE

    specs = [target] + distractors
    walkers = []
    for spec in specs:
        lo, hi = spec.radius + 1.0, size - spec.radius - 2.0
        if lo >= hi:
            raise DatasetError(
                f"object of radius {spec.radius:g} cannot fit a {size}x{size} image"
            )
        walkers.append(_Walker(rng, lo, hi))

    base = np.clip(bg_color[None, None, :] + texture[:, :, None], 0.0, 1.0)
    frames: list[np.ndarray] = []
    masks: list[np.ndarray] = []
    for _ in range(cfg.frames_per_video):
        placed: list[tuple[np.ndarray, float]] = []
        img = base.copy()
        for spec, walker in zip(specs, walkers):
            walker.step(rng)
            if placed:
                obstacles = [(q, sep + spec.radius + 3.0) for q, sep in placed]
                walker.pos = _separate(walker.pos, obstacles, walker.lo, walker.hi, size)
            placed.append((walker.pos.copy(), spec.radius))
        # draw distractors first, the target last so the mask is its exact support
        for spec, walker in list(zip(specs, walkers))[1:] + [(target, walkers[0])]:
            sup = _support(spec.kind, size, walker.pos[0], walker.pos[1], spec.radius, spec.extra)
            img[sup] = spec.color
        mask = _support(target.kind, size, walkers[0].pos[0], walkers[0].pos[1],
                        target.radius, target.extra)
        if not mask.any():
            raise DatasetError("target rendered empty; object does not fit the image")
        img = np.clip(img + rng.normal(0.0, PIXEL_NOISE_SIGMA, size=img.shape), 0.0, 1.0)
        frames.append(img)
        masks.append(mask.astype(np.uint8))
    return VideoSequence(name, v_id, frames, masks)


def generate_synthetic(cfg: SynthConfig) -> tuple[list[VideoSequence], list[VideoSequence]]:
    """Seeded (train, test) split; bit-identical on repeated calls.

    Every video draws from its own stream keyed by (seed, split, index), so
    the two splits never share object appearances.
    """
    splits = []
    for split_id, (prefix, count) in enumerate(
        [("train", cfg.num_train_videos), ("test", cfg.num_test_videos)]
    ):
        videos = []
        for v in range(count):
            rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, split_id, v)))
            videos.append(_generate_video(rng, cfg, f"{prefix}{v:03d}", v))
        splits.append(videos)
    return splits[0], splits[1]


# -- netpbm codecs ---------------------------------------------------------


def _parse_netpbm(data: bytes, path: str, magic: bytes) -> tuple[int, int, bytes]:
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            elif c in (b" ", b"\t", b"\r", b"\n"):
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos : pos + 1] not in (b" ", b"\t", b"\r", b"\n"):
            pos += 1
        if start == pos:
            raise DatasetError(f"{path}: truncated header")
        return data[start:pos]

    got = token()
    if got != magic:
        raise DatasetError(f"{path}: expected {magic.decode()} file, found {got[:10]!r}")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError as exc:
        raise DatasetError(f"{path}: malformed header: {exc}") from None
    if width < 1 or height < 1:
        raise DatasetError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise DatasetError(f"{path}: unsupported maxval {maxval} (need 255)")
    pos += 1  # the single whitespace byte after maxval
    return width, height, data[pos:]


def write_ppm(path: str, image: np.ndarray) -> None:
    """Binary P6 write; values quantized as round(x * 255)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DatasetError(f"{path}: image must be (H, W, 3), got {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise DatasetError(f"{path}: image values must lie in [0, 1]")
    h, w, _ = img.shape
    raw = np.round(img * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(raw.tobytes())


def read_ppm(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise DatasetError(f"{path}: {exc.strerror}") from None
    w, h, body = _parse_netpbm(data, path, b"P6")
    need = 3 * w * h
    if len(body) < need:
        raise DatasetError(f"{path}: truncated pixel data ({len(body)} of {need} bytes)")
    raw = np.frombuffer(body[:need], dtype=np.uint8).reshape(h, w, 3)
    return raw.astype(np.float64) / 255.0


def write_pgm(path: str, mask: np.ndarray) -> None:
    """Binary P5 write of a binary mask: foreground 255, background 0."""
    m = np.asarray(mask)
    if m.ndim != 2 or not np.isin(m, (0, 1)).all():
        raise DatasetError(f"{path}: mask must be binary (H, W)")
    h, w = m.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write((m.astype(np.uint8) * 255).tobytes())


def read_pgm(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise DatasetError(f"{path}: {exc.strerror}") from None
    w, h, body = _parse_netpbm(data, path, b"P5")
    need = w * h
    if len(body) < need:
        raise DatasetError(f"{path}: truncated pixel data ({len(body)} of {need} bytes)")
    raw = np.frombuffer(body[:need], dtype=np.uint8).reshape(h, w)
    bad = ~np.isin(raw, (0, 255))
    if bad.any():
        raise DatasetError(f"{path}: mask contains values other than 0 and 255")
    return (raw == 255).astype(np.uint8)


# -- directory layout ------------------------------------------------------


def write_dataset(root: str, train: list[VideoSequence], test: list[VideoSequence]) -> None:
    os.makedirs(os.path.join(root, "sets"), exist_ok=True)
    for split_name, videos in (("train", train), ("test", test)):
        names = []
        for video in videos:
            names.append(video.name)
            img_dir = os.path.join(root, "Images", video.name)
            ann_dir = os.path.join(root, "Annotations", video.name)
            os.makedirs(img_dir, exist_ok=True)
            os.makedirs(ann_dir, exist_ok=True)
            for i, (frame, mask) in enumerate(zip(video.frames, video.masks)):
                write_ppm(os.path.join(img_dir, f"{i:05d}.ppm"), frame)
                write_pgm(os.path.join(ann_dir, f"{i:05d}.pgm"), mask)
        with open(os.path.join(root, "sets", f"{split_name}.txt"), "w") as f:
            f.write("".join(name + "\n" for name in names))


def _read_split(root: str, split_name: str) -> list[VideoSequence]:
    list_path = os.path.join(root, "sets", f"{split_name}.txt")
    try:
        with open(list_path) as f:
            names = [line.strip() for line in f if line.strip()]
    except OSError as exc:
        raise DatasetError(f"{list_path}: {exc.strerror}") from None
    videos = []
    for v_id, name in enumerate(names):
        img_dir = os.path.join(root, "Images", name)
        ann_dir = os.path.join(root, "Annotations", name)
        for d in (img_dir, ann_dir):
            if not os.path.isdir(d):
                raise DatasetError(f"{d}: missing video directory")
        frame_files = sorted(fn for fn in os.listdir(img_dir) if fn.endswith(".ppm"))
        mask_files = sorted(fn for fn in os.listdir(ann_dir) if fn.endswith(".pgm"))
        if len(frame_files) != len(mask_files):
            raise DatasetError(
                f"{img_dir}: {len(frame_files)} frames but {len(mask_files)} annotations"
            )
        if len(frame_files) < 2:
            raise DatasetError(f"{img_dir}: a video needs at least 2 frames")
        frames = [read_ppm(os.path.join(img_dir, fn)) for fn in frame_files]
        masks = [read_pgm(os.path.join(ann_dir, fn)) for fn in mask_files]
        shapes = {f.shape for f in frames} | {(*m.shape, 3) for m in masks}
        if len(shapes) != 1:
            raise DatasetError(f"{img_dir}: inconsistent frame/mask sizes {sorted(shapes)}")
        videos.append(VideoSequence(name, v_id, frames, masks))
    return videos


def read_dataset(root: str) -> tuple[list[VideoSequence], list[VideoSequence]]:
    return _read_split(root, "train"), _read_split(root, "test")
