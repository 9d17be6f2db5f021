"""Tiny spatio-temporal detector: clip -> per-pixel foreground map + class scores.

Encoder/decoder over space with 3-D convolutions for temporal mixing, a
sigmoid detection head at full resolution, and a pooled sigmoid classification
head. Small enough (~10-20k parameters) to train in seconds on CPU.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import DataFormatError, ShapeError
from .losses import bce_loss, margin_loss, one_hot
from .optim import ParamStore

CHECKPOINT_MAGIC = "ssal-checkpoint"


@dataclass
class ModelConfig:
    in_channels: int = 1
    num_classes: int = 6
    enc_channels: tuple = (8, 16)
    mid_channels: int = 16
    dec_channels: tuple = (4, 4)
    cls_hidden: int = 24

    def layer_specs(self):
        c1, c2 = self.enc_channels
        c3 = self.mid_channels
        c4, c5 = self.dec_channels
        return [
            ("conv1", self.in_channels, c1, (3, 3, 3), (1, 2, 2), (1, 1, 1)),
            ("conv2", c1, c2, (3, 3, 3), (1, 2, 2), (1, 1, 1)),
            ("conv3", c2, c3, (3, 3, 3), (1, 1, 1), (1, 1, 1)),
            ("conv4", c3, c4, (1, 3, 3), (1, 1, 1), (0, 1, 1)),
            ("conv5", c4, c5, (1, 3, 3), (1, 1, 1), (0, 1, 1)),
            ("det", c5, 1, (1, 1, 1), (1, 1, 1), (0, 0, 0)),
        ]


@dataclass
class DetOutput:
    """Detached prediction for one clip: [T, H, W] map and [K] class scores."""

    det_map: np.ndarray
    class_scores: np.ndarray


@dataclass
class FrameDetection:
    box: tuple  # (x0, y0, x1, y1), inclusive pixel coordinates
    confidence: float
    class_id: int


def init_params(cfg: ModelConfig, seed: int) -> ParamStore:
    """He-style initialization, deterministic under the seed.

    Kernels are stored channels-last, [kT, kH, kW, Cin, Cout].
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6D6F64]))
    store = ParamStore(role="student")
    for name, cin, cout, kdims, _, _ in cfg.layer_specs():
        fan_in = cin * int(np.prod(kdims))
        w = rng.standard_normal(tuple(kdims) + (cin, cout)) * np.sqrt(2.0 / fan_in)
        store.add(f"{name}.w", Tensor(w, requires_grad=True))
        # detection logits start at the background prior instead of 0.5
        bias0 = -2.0 if name == "det" else 0.0
        store.add(f"{name}.b", Tensor(np.full(cout, bias0), requires_grad=True))
    mid, hidden = cfg.mid_channels, cfg.cls_hidden
    store.add("cls.w_mean", Tensor(rng.standard_normal((mid, hidden)) * np.sqrt(1.0 / mid), requires_grad=True))
    store.add("cls.w_max", Tensor(rng.standard_normal((mid, hidden)) * np.sqrt(1.0 / mid), requires_grad=True))
    store.add("cls.b1", Tensor(np.zeros(hidden), requires_grad=True))
    store.add("cls.w2", Tensor(rng.standard_normal((hidden, cfg.num_classes)) * np.sqrt(2.0 / hidden), requires_grad=True))
    store.add("cls.b2", Tensor(np.zeros(cfg.num_classes), requires_grad=True))
    return store


def _conv_block(params: ParamStore, name: str, x: Tensor, stride, pad, act: bool) -> Tensor:
    out = ag.conv3d_cl(x, params[f"{name}.w"], stride, pad)
    out = ag.bias_add(out, params[f"{name}.b"])
    return ag.relu(out) if act else out


def forward_batch(params: ParamStore, clips: np.ndarray, cfg: ModelConfig) -> tuple[Tensor, Tensor]:
    """Run the detector on [N, T, H, W, C] clips.

    Returns (det_maps, class_scores) as tensors of shape [N, T, H, W] and
    [N, K]; gradients flow to `params` when a tape is active.
    """
    clips = np.asarray(clips, dtype=np.float64)
    if clips.ndim != 5:
        raise ShapeError(f"expected [N, T, H, W, C] clips, got shape {clips.shape}")
    n, t, h, w, c = clips.shape
    if c != cfg.in_channels:
        raise ShapeError(f"clip has {c} channels, model expects {cfg.in_channels}")
    if h % 4 != 0 or w % 4 != 0:
        raise ShapeError(f"spatial dims must be multiples of 4, got {h}x{w}")
    x = Tensor(clips)
    specs = {s[0]: s for s in cfg.layer_specs()}

    h1 = _conv_block(params, "conv1", x, specs["conv1"][4], specs["conv1"][5], act=True)
    h2 = _conv_block(params, "conv2", h1, specs["conv2"][4], specs["conv2"][5], act=True)
    feat = _conv_block(params, "conv3", h2, specs["conv3"][4], specs["conv3"][5], act=True)

    d = ag.upsample2x(feat)
    d = _conv_block(params, "conv4", d, specs["conv4"][4], specs["conv4"][5], act=True)
    d = ag.upsample2x(d)
    d = _conv_block(params, "conv5", d, specs["conv5"][4], specs["conv5"][5], act=True)
    logits = _conv_block(params, "det", d, (1, 1, 1), (0, 0, 0), act=False)
    det_maps = ag.reshape(ag.sigmoid(logits), (n, t, h, w))

    pooled_mean = ag.reduce(feat, "mean", axes=(1, 2, 3))  # [N, mid_channels]
    pooled_max = ag.global_max_pool(feat)
    hidden = ag.relu(
        ag.bias_add(
            ag.add(ag.matmul(pooled_mean, params["cls.w_mean"]), ag.matmul(pooled_max, params["cls.w_max"])),
            params["cls.b1"],
        )
    )
    cls = ag.sigmoid(ag.bias_add(ag.matmul(hidden, params["cls.w2"]), params["cls.b2"]))
    return det_maps, cls


def forward(params: ParamStore, clip: np.ndarray, cfg: ModelConfig) -> DetOutput:
    """Inference on one [T, H, W, C] clip, detached from any tape."""
    clip = np.asarray(clip, dtype=np.float64)
    if clip.ndim != 4:
        raise ShapeError(f"expected [T, H, W, C] clip, got shape {clip.shape}")
    det, cls = forward_batch(params, clip[None], cfg)
    return DetOutput(det_map=det.data[0].copy(), class_scores=cls.data[0].copy())


def temporal_average(det_maps: np.ndarray, i: int, t_win: int) -> np.ndarray:
    """Mean of the detection maps in a window of `t_win` frames around frame i.

    The window is truncated at clip boundaries and the divisor is the number
    of frames actually present.
    """
    det_maps = np.asarray(det_maps, dtype=np.float64)
    if t_win < 1 or t_win % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {t_win}")
    t = det_maps.shape[0]
    if not 0 <= i < t:
        raise IndexError(f"frame index {i} outside [0, {t})")
    half = t_win // 2
    lo, hi = max(0, i - half), min(t, i + half + 1)
    return det_maps[lo:hi].mean(axis=0)


def temporal_average_all(det_maps: np.ndarray, t_win: int) -> np.ndarray:
    """Apply `temporal_average` at every frame index."""
    det_maps = np.asarray(det_maps, dtype=np.float64)
    return np.stack([temporal_average(det_maps, i, t_win) for i in range(det_maps.shape[0])])


def largest_component(mask: np.ndarray) -> np.ndarray | None:
    """Largest 4-connected True region; earlier scan order wins ties."""
    h, w = mask.shape
    visited = np.zeros_like(mask, dtype=bool)
    best = None
    best_size = 0
    for sy in range(h):
        for sx in range(w):
            if not mask[sy, sx] or visited[sy, sx]:
                continue
            stack = [(sy, sx)]
            visited[sy, sx] = True
            pixels = []
            while stack:
                y, x = stack.pop()
                pixels.append((y, x))
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not visited[ny, nx]:
                        visited[ny, nx] = True
                        stack.append((ny, nx))
            if len(pixels) > best_size:
                best_size = len(pixels)
                best = pixels
    if best is None:
        return None
    out = np.zeros_like(mask, dtype=bool)
    ys, xs = zip(*best)
    out[list(ys), list(xs)] = True
    return out


def mask_to_box(mask: np.ndarray):
    """Tight (x0, y0, x1, y1) box around a binary mask; None when empty."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return None
    return (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))


def detect_boxes(det_out: DetOutput, thresh: float = 0.5) -> list:
    """One detection per frame from the thresholded map's largest component."""
    if not 0.0 < thresh < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {thresh}")
    class_id = int(np.argmax(det_out.class_scores))
    class_conf = float(det_out.class_scores[class_id])
    detections = []
    for frame in det_out.det_map:
        fg = frame > thresh
        comp = largest_component(fg)
        if comp is None:
            detections.append(None)
            continue
        box = mask_to_box(comp)
        x0, y0, x1, y1 = box
        region = frame[y0 : y1 + 1, x0 : x1 + 1]
        detections.append(
            FrameDetection(box=box, confidence=float(region.mean()) * class_conf, class_id=class_id)
        )
    return detections


def supervised_loss(det_maps, class_scores, masks, class_id: int, num_classes: int) -> Tensor:
    """Detection BCE against masks plus margin loss against the one-hot class."""
    det = det_maps if isinstance(det_maps, Tensor) else Tensor(det_maps)
    cls = class_scores if isinstance(class_scores, Tensor) else Tensor(class_scores)
    masks = np.asarray(masks, dtype=np.float64)
    if det.data.shape != masks.shape:
        raise ShapeError(f"detection map {det.data.shape} vs masks {masks.shape}")
    scores2d = cls if cls.data.ndim == 2 else ag.reshape(cls, (1, cls.data.shape[0]))
    labels = one_hot(class_id, num_classes)[None].repeat(scores2d.data.shape[0], axis=0)
    return ag.add(bce_loss(det, masks), margin_loss(scores2d, labels))


def supervised_loss_batch(det_maps: Tensor, class_scores: Tensor, masks, class_ids, num_classes: int):
    """(l_det, l_cls) for a batch; masks [N, T, H, W], class_ids length N."""
    masks = np.asarray(masks, dtype=np.float64)
    labels = np.stack([one_hot(int(c), num_classes) for c in class_ids])
    return bce_loss(det_maps, masks), margin_loss(class_scores, labels)


def save_checkpoint(path, store: ParamStore, step: int, config_hash: str, dtype: str = "<f8"):
    """JSON header plus concatenated little-endian parameter blob."""
    if dtype not in ("<f8", "<f4"):
        raise ValueError(f"unsupported checkpoint dtype '{dtype}'")
    header = {
        "magic": CHECKPOINT_MAGIC,
        "names": store.names(),
        "shapes": [list(store[n].data.shape) for n in store.names()],
        "step": int(step),
        "config_hash": config_hash,
        "dtype": dtype,
        "role": store.role,
    }
    blob = b"".join(store[n].data.astype(dtype).tobytes() for n in store.names())
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(blob)


def load_checkpoint(path) -> tuple[ParamStore, int, str]:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise DataFormatError("checkpoint missing header delimiter")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"unreadable checkpoint header: {exc}") from exc
    if header.get("magic") != CHECKPOINT_MAGIC:
        raise DataFormatError("checkpoint magic mismatch")
    dtype = np.dtype(header["dtype"])
    blob = raw[nl + 1 :]
    expected = sum(int(np.prod(s)) for s in header["shapes"]) * dtype.itemsize
    if len(blob) != expected:
        raise DataFormatError(
            f"checkpoint blob truncated: expected {expected} bytes, found {len(blob)}"
        )
    role = header.get("role", "student")
    store = ParamStore(role=role)
    offset = 0
    for name, shape in zip(header["names"], header["shapes"]):
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(shape)
        offset += count * dtype.itemsize
        store.add(name, Tensor(arr.astype(np.float64), requires_grad=(role == "student")))
    return store, int(header["step"]), header["config_hash"]
