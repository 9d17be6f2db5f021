"""Synthetic moving-actor videos with exact per-frame masks and class labels.

Each video contains one actor (a shape executing a motion pattern) over a
static textured background with optional static distractor shapes. Classes
are shape x motion compounds, so classification needs temporal information
and detection needs spatial information. Everything is deterministic under
the dataset seed, with one independent random stream per video.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, PoolError, SsalError
from .model import mask_to_box

SVB_MAGIC = b"SSAL"
SVB_VERSION = 1
FORMAT_VERSION = 1

SHAPES = ("square", "circle", "triangle")
MOTIONS = ("linear", "zigzag")


class GenerationError(SsalError):
    """Actor pose could not be placed after the retry budget."""


@dataclass
class GenConfig:
    t_frames: int = 8
    height: int = 32
    width: int = 32
    channels: int = 1
    shapes: tuple = SHAPES
    motions: tuple = MOTIONS
    n_train: int = 240
    n_test: int = 60
    actor_size: tuple = (6, 12)
    actor_intensity: tuple = (0.7, 1.0)
    speed: tuple = (0.75, 3.5)
    max_distractors: int = 3
    distractor_size: tuple = (4, 10)
    distractor_intensity: tuple = (0.45, 0.7)
    texture_amp: float = 0.3
    texture_grid: int = 8
    min_visible_fraction: float = 0.8

    @property
    def num_classes(self) -> int:
        return len(self.shapes) * len(self.motions)

    def class_name(self, class_id: int) -> str:
        shape, motion = self.class_parts(class_id)
        return f"{shape}-{motion}"

    def class_parts(self, class_id: int) -> tuple[str, str]:
        if not 0 <= class_id < self.num_classes:
            raise ValueError(f"class id {class_id} outside [0, {self.num_classes})")
        return self.shapes[class_id // len(self.motions)], self.motions[class_id % len(self.motions)]


@dataclass
class Annotation:
    class_id: int
    masks: np.ndarray  # bool [T, H, W]
    boxes: list  # per frame (x0, y0, x1, y1) or None


@dataclass
class VideoSample:
    id: int
    frames: np.ndarray  # float32 [T, H, W, C] in [0, 1]
    annotation: Annotation
    pool: str  # labeled | unlabeled | test


@dataclass
class DatasetManifest:
    format_version: int
    dims: tuple  # (T, H, W, C)
    num_classes: int
    class_names: list
    splits: dict  # {"train": n, "test": n}
    seed: int


@dataclass
class Pose:
    size: int
    intensity: float
    start: tuple  # actor centre (y, x) at frame 0
    motion_params: dict
    distractors: list  # (shape, size, intensity, (y, x) top-left)
    texture: np.ndarray | None  # coarse grid, or None


def shape_stamp(shape: str, size: int) -> np.ndarray:
    """Filled boolean stamp of the given shape on a size x size grid."""
    if size < 2:
        raise ValueError(f"stamp size must be >= 2, got {size}")
    ii, jj = np.mgrid[:size, :size]
    c = (size - 1) / 2.0
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    if shape == "circle":
        return (ii - c) ** 2 + (jj - c) ** 2 <= (size / 2.0) ** 2
    if shape == "triangle":
        half = (ii + 1) * size / (2.0 * size)
        return np.abs(jj - c) <= half - 0.25
    raise ValueError(f"unknown shape '{shape}'")


def motion_positions(motion: str, start: tuple, params: dict, t_frames: int) -> np.ndarray:
    """Actor centre (y, x) per frame before rounding."""
    y0, x0 = start
    pos = np.zeros((t_frames, 2))
    if motion == "linear":
        vy, vx = params["velocity"]
        for t in range(t_frames):
            pos[t] = (y0 + vy * t, x0 + vx * t)
        return pos
    if motion == "zigzag":
        vx = params["vx"]
        vy = params["vy"]  # magnitude; vertical direction flips every 2 frames
        y = y0
        for t in range(t_frames):
            pos[t] = (y, x0 + vx * t)
            direction = 1.0 if (t // 2) % 2 == 0 else -1.0
            y += direction * vy
        return pos
    raise ValueError(f"unknown motion '{motion}'")


def _paste(canvas: np.ndarray, stamp: np.ndarray, top: int, left: int, value: float) -> np.ndarray:
    """Draw the stamp clipped to the canvas; returns the painted region mask."""
    h, w = canvas.shape
    s = stamp.shape[0]
    y0, y1 = max(0, top), min(h, top + s)
    x0, x1 = max(0, left), min(w, left + s)
    painted = np.zeros((h, w), dtype=bool)
    if y0 >= y1 or x0 >= x1:
        return painted
    sub = stamp[y0 - top : y1 - top, x0 - left : x1 - left]
    region = painted[y0:y1, x0:x1]
    region |= sub
    canvas[y0:y1, x0:x1][sub] = value
    return painted


def _texture_field(grid: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear upsample of a coarse grid to the frame size."""
    g = grid.shape[0]
    ys = np.linspace(0, g - 1, height)
    xs = np.linspace(0, g - 1, width)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, g - 1)
    x1 = np.minimum(x0 + 1, g - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = grid[np.ix_(y0, x0)]
    b = grid[np.ix_(y0, x1)]
    c = grid[np.ix_(y1, x0)]
    d = grid[np.ix_(y1, x1)]
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx


def render_video(cfg: GenConfig, class_id: int, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Render frames [T, H, W, C] float32 and masks [T, H, W] bool from a pose."""
    shape, motion = cfg.class_parts(class_id)
    t_frames, h, w = cfg.t_frames, cfg.height, cfg.width
    stamp = shape_stamp(shape, pose.size)
    centers = motion_positions(motion, pose.start, pose.motion_params, t_frames)

    background = np.zeros((h, w))
    if pose.texture is not None:
        background += _texture_field(pose.texture, h, w)
    for dshape, dsize, dintensity, (dy, dx) in pose.distractors:
        _paste(background, shape_stamp(dshape, dsize), dy, dx, dintensity)

    frames = np.zeros((t_frames, h, w), dtype=np.float64)
    masks = np.zeros((t_frames, h, w), dtype=bool)
    half = pose.size // 2
    for t in range(t_frames):
        canvas = background.copy()
        top = int(np.rint(centers[t, 0])) - half
        left = int(np.rint(centers[t, 1])) - half
        masks[t] = _paste(canvas, stamp, top, left, pose.intensity)
        frames[t] = canvas
    frames = np.clip(frames, 0.0, 1.0).astype(np.float32)
    out = np.repeat(frames[..., None], cfg.channels, axis=3)
    return out, masks


def sample_pose(cfg: GenConfig, class_id: int, rng: np.random.Generator) -> Pose:
    """Draw a pose whose actor stays visible on enough frames; retries up to 100x."""
    shape, motion = cfg.class_parts(class_id)
    size = int(rng.integers(cfg.actor_size[0], cfg.actor_size[1] + 1))
    intensity = float(rng.uniform(*cfg.actor_intensity))

    n_dis = int(rng.integers(0, cfg.max_distractors + 1))
    distractors = []
    for _ in range(n_dis):
        dshape = cfg.shapes[int(rng.integers(0, len(cfg.shapes)))]
        dsize = int(rng.integers(cfg.distractor_size[0], cfg.distractor_size[1] + 1))
        dint = float(rng.uniform(*cfg.distractor_intensity))
        dy = int(rng.integers(0, cfg.height - dsize + 1))
        dx = int(rng.integers(0, cfg.width - dsize + 1))
        distractors.append((dshape, dsize, dint, (dy, dx)))

    texture = None
    if cfg.texture_amp > 0:
        texture = rng.uniform(0.0, cfg.texture_amp, size=(cfg.texture_grid, cfg.texture_grid))

    min_visible = int(np.ceil(cfg.min_visible_fraction * cfg.t_frames))
    for _ in range(100):
        if motion == "linear":
            angle = rng.uniform(0.0, 2.0 * np.pi)
            speed = rng.uniform(*cfg.speed)
            params = {"velocity": (speed * np.sin(angle), speed * np.cos(angle))}
        else:
            params = {
                "vx": float(rng.uniform(*cfg.speed)) * (1.0 if rng.random() < 0.5 else -1.0),
                "vy": float(rng.uniform(*cfg.speed)),
            }
        start = (
            float(rng.uniform(size / 2.0, cfg.height - size / 2.0)),
            float(rng.uniform(size / 2.0, cfg.width - size / 2.0)),
        )
        pose = Pose(size, intensity, start, params, distractors, texture)
        centers = motion_positions(motion, start, params, cfg.t_frames)
        visible = 0
        half = size // 2
        stamp = shape_stamp(shape, size)
        for t in range(cfg.t_frames):
            top = int(np.rint(centers[t, 0])) - half
            left = int(np.rint(centers[t, 1])) - half
            y0, y1 = max(0, top), min(cfg.height, top + size)
            x0, x1 = max(0, left), min(cfg.width, left + size)
            if y0 < y1 and x0 < x1 and stamp[y0 - top : y1 - top, x0 - left : x1 - left].any():
                visible += 1
        if visible >= min_visible:
            return pose
    raise GenerationError(
        f"could not place a class-{class_id} actor after 100 pose draws"
    )


def video_rng(seed: int, video_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(video_id)]))


class VideoDataset:
    """Generated samples plus labeled/unlabeled/test pool bookkeeping."""

    def __init__(self, manifest: DatasetManifest, samples: dict):
        self.manifest = manifest
        self.samples = samples
        n_train = manifest.splits["train"]
        self.train_ids = sorted(i for i in samples if i < n_train)
        self.test_ids = sorted(i for i in samples if i >= n_train)
        self.labeled: set = set()
        self.unlabeled: set = set(self.train_ids)
        self.test: set = set(self.test_ids)

    def sample(self, video_id: int) -> VideoSample:
        return self.samples[video_id]

    def reset_pools(self, labeled_ids=()):
        for s in self.samples.values():
            s.pool = "test" if s.id in self.test else "unlabeled"
        self.labeled = set()
        self.unlabeled = set(self.train_ids)
        for vid in labeled_ids:
            self.oracle_annotate(vid)

    def oracle_annotate(self, video_id: int) -> Annotation:
        """Reveal ground truth for an unlabeled sample and move it to the labeled pool."""
        if video_id in self.labeled:
            raise PoolError(f"video {video_id} is already labeled")
        if video_id in self.test:
            raise PoolError(f"video {video_id} is in the test split")
        if video_id not in self.unlabeled:
            raise PoolError(f"video {video_id} is not in the unlabeled pool")
        self.unlabeled.remove(video_id)
        self.labeled.add(video_id)
        sample = self.samples[video_id]
        sample.pool = "labeled"
        return sample.annotation


def _make_annotation(class_id: int, masks: np.ndarray) -> Annotation:
    boxes = [mask_to_box(m) for m in masks]
    return Annotation(class_id=class_id, masks=masks, boxes=boxes)


def gen_dataset(cfg: GenConfig, seed: int) -> VideoDataset:
    """Deterministically generate the train and test splits."""
    total = cfg.n_train + cfg.n_test
    k = cfg.num_classes
    samples = {}
    for vid in range(total):
        in_train = vid < cfg.n_train
        class_id = (vid if in_train else vid - cfg.n_train) % k
        rng = video_rng(seed, vid)
        pose = sample_pose(cfg, class_id, rng)
        frames, masks = render_video(cfg, class_id, pose)
        samples[vid] = VideoSample(
            id=vid,
            frames=frames,
            annotation=_make_annotation(class_id, masks),
            pool="unlabeled" if in_train else "test",
        )
    manifest = DatasetManifest(
        format_version=FORMAT_VERSION,
        dims=(cfg.t_frames, cfg.height, cfg.width, cfg.channels),
        num_classes=k,
        class_names=[cfg.class_name(c) for c in range(k)],
        splits={"train": cfg.n_train, "test": cfg.n_test},
        seed=int(seed),
    )
    return VideoDataset(manifest, samples)


def write_svb(path, sample: VideoSample, dims: tuple):
    t, h, w, c = dims
    frames = np.ascontiguousarray(sample.frames, dtype="<f4")
    masks = np.ascontiguousarray(sample.annotation.masks.astype(np.uint8))
    with open(path, "wb") as fh:
        fh.write(SVB_MAGIC)
        fh.write(struct.pack("<H", SVB_VERSION))
        fh.write(struct.pack("<4I", t, h, w, c))
        fh.write(struct.pack("<I", sample.annotation.class_id))
        fh.write(frames.tobytes())
        fh.write(masks.tobytes())


def read_svb(path, dims: tuple, num_classes: int) -> tuple[int, np.ndarray, np.ndarray]:
    t, h, w, c = dims
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != SVB_MAGIC:
        raise DataFormatError(f"{path}: magic mismatch")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != SVB_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    ft, fh_, fw, fc = struct.unpack_from("<4I", raw, 6)
    if (ft, fh_, fw, fc) != (t, h, w, c):
        raise DataFormatError(
            f"{path}: dims {(ft, fh_, fw, fc)} do not match manifest dims {(t, h, w, c)}"
        )
    (class_id,) = struct.unpack_from("<I", raw, 22)
    if class_id >= num_classes:
        raise DataFormatError(f"{path}: class id {class_id} outside [0, {num_classes})")
    n_pix = t * h * w * c
    n_mask = t * h * w
    expected = 26 + 4 * n_pix + n_mask
    if len(raw) != expected:
        raise DataFormatError(f"{path}: truncated, expected {expected} bytes, found {len(raw)}")
    frames = np.frombuffer(raw, dtype="<f4", count=n_pix, offset=26).reshape(t, h, w, c)
    mask_bytes = np.frombuffer(raw, dtype=np.uint8, count=n_mask, offset=26 + 4 * n_pix)
    if not np.all((mask_bytes == 0) | (mask_bytes == 1)):
        raise DataFormatError(f"{path}: mask bytes must be 0 or 1")
    if frames.min() < 0.0 or frames.max() > 1.0 or not np.all(np.isfinite(frames)):
        raise DataFormatError(f"{path}: pixel values outside [0, 1]")
    masks = mask_bytes.reshape(t, h, w).astype(bool)
    return int(class_id), frames.copy(), masks


def write_dataset(ds: VideoDataset, out_dir):
    out_dir = Path(out_dir)
    (out_dir / "videos").mkdir(parents=True, exist_ok=True)
    m = ds.manifest
    manifest_json = {
        "format_version": m.format_version,
        "dims": list(m.dims),
        "num_classes": m.num_classes,
        "class_names": m.class_names,
        "splits": m.splits,
        "seed": m.seed,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest_json, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for vid, sample in sorted(ds.samples.items()):
        write_svb(out_dir / "videos" / f"{vid}.svb", sample, m.dims)


def read_dataset(data_dir) -> VideoDataset:
    data_dir = Path(data_dir)
    try:
        with open(data_dir / "manifest.json", "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise DataFormatError(f"missing manifest.json in {data_dir}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"unreadable manifest.json: {exc}") from exc
    for key in ("format_version", "dims", "num_classes", "class_names", "splits", "seed"):
        if key not in raw:
            raise DataFormatError(f"manifest.json: missing field '{key}'")
    if raw["format_version"] != FORMAT_VERSION:
        raise DataFormatError(f"manifest.json: unsupported format_version {raw['format_version']}")
    dims = tuple(int(d) for d in raw["dims"])
    if len(dims) != 4:
        raise DataFormatError("manifest.json: dims must have 4 entries")
    if len(raw["class_names"]) != raw["num_classes"]:
        raise DataFormatError("manifest.json: class_names length does not match num_classes")
    splits = raw["splits"]
    if set(splits.keys()) != {"train", "test"}:
        raise DataFormatError("manifest.json: splits must have exactly 'train' and 'test'")
    video_files = sorted((data_dir / "videos").glob("*.svb"))
    total = int(splits["train"]) + int(splits["test"])
    if len(video_files) != total:
        raise DataFormatError(
            f"manifest.json: splits sum to {total} but {len(video_files)} video files present"
        )
    manifest = DatasetManifest(
        format_version=int(raw["format_version"]),
        dims=dims,
        num_classes=int(raw["num_classes"]),
        class_names=list(raw["class_names"]),
        splits={"train": int(splits["train"]), "test": int(splits["test"])},
        seed=int(raw["seed"]),
    )
    samples = {}
    for vid in range(total):
        path = data_dir / "videos" / f"{vid}.svb"
        if not path.exists():
            raise DataFormatError(f"missing video file {path.name}")
        class_id, frames, masks = read_svb(path, dims, manifest.num_classes)
        samples[vid] = VideoSample(
            id=vid,
            frames=frames,
            annotation=_make_annotation(class_id, masks),
            pool="unlabeled" if vid < manifest.splits["train"] else "test",
        )
    return VideoDataset(manifest, samples)
