"""Mean-teacher semi-supervised training with edge-weighted consistency.

The student trains on strongly augmented views; the teacher (an EMA copy of
the student) sees weakly augmented views and provides pseudo-labels and
consistency targets. The weighted consistency multiplies per-pixel squared
differences by high-pass weight masks derived from the detection maps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, ShapeError
from .losses import masked_bce_loss
from .model import (
    ModelConfig,
    forward_batch,
    init_params,
    supervised_loss_batch,
    temporal_average_all,
)
from .optim import Adam, ParamStore
from .spectral import combine_filters, hpf_weight_map_stack
from .videogen import Annotation

TRAIN_METHODS = ("supervised", "consistency", "mean_teacher", "mean_teacher_fft")
FFT_SOURCES = ("student", "teacher", "mean", "both")

SHIFT_MAX = 3
STRONG_GAIN = (0.8, 1.2)
STRONG_BIAS = (-0.1, 0.1)
STRONG_NOISE = (0.0, 0.1)

# fixed stream tags so the labeled pipeline is untouched by unlabeled draws
_LAB_STREAM = 0x4C
_UNLAB_STREAM = 0x55
_INIT_STREAM = 0x49


@dataclass
class AugSpec:
    hflip: bool
    shift: tuple  # (dx, dy) pixels
    gain: float = 1.0
    bias: float = 0.0
    noise_sigma: float = 0.0
    strength: str = "weak"


@dataclass
class SSLConfig:
    lambda1: float = 0.5
    lambda2: float = 0.5
    ramp_start: float = 0.01
    ramp_end: float = 0.1
    warmup_fraction: float = 0.25
    ema_rate: float = 0.996
    fft_source: str = "both"
    temporal_consistency: bool = True
    radius: float = 0.1
    pseudo_margin: float = 0.2
    t_win: int = 3
    class_consistency: bool = True

    def validate(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("lambda1 and lambda2 must be nonnegative")
        if not 0.0 <= self.ema_rate <= 1.0:
            raise ConfigError(f"ema_rate must lie in [0, 1], got {self.ema_rate}")
        if not 0.0 <= self.pseudo_margin < 0.5:
            raise ConfigError(f"pseudo_margin must lie in [0, 0.5), got {self.pseudo_margin}")
        if self.fft_source not in FFT_SOURCES:
            raise ConfigError(f"fft_source must be one of {FFT_SOURCES}, got '{self.fft_source}'")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ConfigError(f"warmup_fraction must lie in [0, 1], got {self.warmup_fraction}")
        if self.radius < 0:
            raise ConfigError(f"radius must be nonnegative, got {self.radius}")
        if self.t_win < 1 or self.t_win % 2 == 0:
            raise ConfigError(f"t_win must be odd and >= 1, got {self.t_win}")


@dataclass
class TrainConfig:
    method: str = "mean_teacher_fft"
    epochs: int = 20
    min_steps: int = 240
    batch_size: int = 8
    lr: float = 8e-3
    lr_schedule: str = "cosine"
    pseudo_weight: str = "lambda"
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8

    def validate(self):
        if self.method not in TRAIN_METHODS:
            raise ConfigError(f"method must be one of {TRAIN_METHODS}, got '{self.method}'")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.min_steps < 0:
            raise ConfigError(f"min_steps must be nonnegative, got {self.min_steps}")
        if self.batch_size < 2 or self.batch_size % 2 != 0:
            raise ConfigError(f"batch_size must be even and >= 2, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ConfigError(f"lr_schedule must be constant or cosine, got '{self.lr_schedule}'")
        if self.pseudo_weight not in ("none", "lambda", "ramp", "full"):
            raise ConfigError(
                f"pseudo_weight must be none, lambda, ramp, or full, got '{self.pseudo_weight}'"
            )

    def effective_epochs(self, labeled_count: int) -> int:
        """Epochs raised so small labeled pools still get min_steps optimizer steps."""
        per_epoch = max(1, int(np.ceil(labeled_count / (self.batch_size // 2))))
        need = int(np.ceil(self.min_steps / per_epoch)) if self.min_steps else 0
        return max(self.epochs, need)


def epoch_lr(cfg: TrainConfig, epoch: int, total_epochs: int) -> float:
    """Cosine decay to 10% of the base rate; constant when disabled."""
    if cfg.lr_schedule == "constant" or total_epochs <= 1:
        return cfg.lr
    frac = epoch / (total_epochs - 1)
    return cfg.lr * (0.1 + 0.9 * 0.5 * (1.0 + np.cos(np.pi * frac)))


def sample_aug_pair_spec(rng: np.random.Generator) -> tuple[AugSpec, AugSpec]:
    """Shared geometric transform; photometric perturbation on the strong view only."""
    hflip = bool(rng.random() < 0.5)
    dx = int(rng.integers(-SHIFT_MAX, SHIFT_MAX + 1))
    dy = int(rng.integers(-SHIFT_MAX, SHIFT_MAX + 1))
    weak = AugSpec(hflip=hflip, shift=(dx, dy), strength="weak")
    strong = AugSpec(
        hflip=hflip,
        shift=(dx, dy),
        gain=float(rng.uniform(*STRONG_GAIN)),
        bias=float(rng.uniform(*STRONG_BIAS)),
        noise_sigma=float(rng.uniform(*STRONG_NOISE)),
        strength="strong",
    )
    return weak, strong


def _shift2d(arr: np.ndarray, dy: int, dx: int, h_axis: int, w_axis: int) -> np.ndarray:
    out = np.zeros_like(arr)
    h, w = arr.shape[h_axis], arr.shape[w_axis]
    ys = slice(max(0, dy), min(h, h + dy))
    yd = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, dx), min(w, w + dx))
    xd = slice(max(0, -dx), min(w, w - dx))
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    src[h_axis], src[w_axis] = yd, xd
    dst[h_axis], dst[w_axis] = ys, xs
    out[tuple(dst)] = arr[tuple(src)]
    return out


def apply_geometric(arr: np.ndarray, spec: AugSpec, h_axis: int = 1, w_axis: int = 2) -> np.ndarray:
    out = np.flip(arr, axis=w_axis) if spec.hflip else arr
    dx, dy = spec.shift
    if dx != 0 or dy != 0:
        out = _shift2d(out, dy, dx, h_axis, w_axis)
    return np.ascontiguousarray(out)


def apply_aug(clip: np.ndarray, spec: AugSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Geometric transform, then photometric gain/bias and additive noise."""
    out = apply_geometric(np.asarray(clip, dtype=np.float64), spec)
    if spec.gain != 1.0 or spec.bias != 0.0:
        out = np.clip(spec.gain * out + spec.bias, 0.0, 1.0)
    if spec.noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires a random generator")
        out = np.clip(out + spec.noise_sigma * rng.standard_normal(out.shape), 0.0, 1.0)
    return out


def make_aug_pair(clip: np.ndarray, seed) -> tuple[np.ndarray, np.ndarray, tuple[AugSpec, AugSpec]]:
    """Weak and strong views of one clip from a seed or generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weak_spec, strong_spec = sample_aug_pair_spec(rng)
    weak = apply_aug(clip, weak_spec)
    strong = apply_aug(clip, strong_spec, rng)
    return weak, strong, (weak_spec, strong_spec)


def transform_annotation(ann: Annotation, spec: AugSpec) -> Annotation:
    """Carry the geometric part of an augmentation onto masks and boxes."""
    from .model import mask_to_box  # local import to avoid cycle at module load

    masks = apply_geometric(ann.masks, spec, h_axis=1, w_axis=2)
    return Annotation(class_id=ann.class_id, masks=masks, boxes=[mask_to_box(m) for m in masks])


def ema_update(teacher: ParamStore, student: ParamStore, alpha: float) -> ParamStore:
    """theta_t <- alpha * theta_t + (1 - alpha) * theta_s, elementwise in place."""
    teacher.assert_aligned(student)
    for name, t in teacher.items():
        s = student[name]
        t.data *= alpha
        t.data += (1.0 - alpha) * s.data
    return teacher


def consistency_plain(student_maps, teacher_maps) -> Tensor:
    """Unweighted mean squared difference between the two detection map stacks."""
    s = student_maps if isinstance(student_maps, Tensor) else Tensor(student_maps)
    t = np.asarray(teacher_maps, dtype=np.float64)
    if s.data.shape != t.shape:
        raise ShapeError(f"consistency: shapes {s.data.shape} vs {t.shape}")
    return ag.reduce(ag.square(ag.sub(s, Tensor(t))), "mean")


def frame_consistency(f_student, f_teacher, weight) -> Tensor:
    """Per-frame squared difference averaged with per-pixel weights."""
    s = f_student if isinstance(f_student, Tensor) else Tensor(f_student)
    t = np.asarray(f_teacher, dtype=np.float64)
    w = np.asarray(weight, dtype=np.float64)
    if s.data.shape != t.shape or s.data.shape != w.shape:
        raise ShapeError(
            f"frame_consistency: shapes {s.data.shape}, {t.shape}, {w.shape}"
        )
    return ag.reduce(ag.mul(ag.square(ag.sub(s, Tensor(t))), Tensor(w)), "mean")


def _weight_stacks(student_detached: np.ndarray, teacher_maps: np.ndarray, cfg: SSLConfig):
    """Per-frame weight masks from both models' (possibly smoothed) maps."""
    flat_s = student_detached.reshape(-1, *student_detached.shape[-2:])
    flat_t = teacher_maps.reshape(-1, *teacher_maps.shape[-2:])
    both = hpf_weight_map_stack(np.concatenate([flat_s, flat_t]), cfg.radius)
    w_s = both[: len(flat_s)].reshape(student_detached.shape)
    w_t = both[len(flat_s) :].reshape(teacher_maps.shape)
    return w_s, w_t


def hpf_consistency(student_maps, teacher_maps, cfg: SSLConfig) -> Tensor:
    """Consistency with high-pass edge weights from student and/or teacher maps.

    Weight masks are built from detached maps and treated as constants; the
    gradient flows through the squared differences only. With temporal
    consistency on, every map entering the filter and the difference is first
    passed through the temporal averaging window.
    """
    s = student_maps if isinstance(student_maps, Tensor) else Tensor(student_maps)
    t = np.asarray(teacher_maps, dtype=np.float64)
    if s.data.shape != t.shape:
        raise ShapeError(f"hpf_consistency: shapes {s.data.shape} vs {t.shape}")
    if s.data.ndim not in (3, 4):
        raise ShapeError(f"hpf_consistency expects [F, H, W] or [N, F, H, W], got {s.data.shape}")

    frame_axis = s.data.ndim - 3
    if cfg.temporal_consistency:
        s_graph = ag.temporal_smooth(s, cfg.t_win, axis=frame_axis)
        s_detached = s_graph.data
        t_maps = _smooth_stack(t, cfg.t_win, frame_axis)
    else:
        s_graph = s
        s_detached = s.data
        t_maps = t

    w_s, w_t = _weight_stacks(s_detached, t_maps, cfg)
    sq = ag.square(ag.sub(s_graph, Tensor(t_maps)))
    if cfg.fft_source == "both":
        term_s = ag.mul(ag.reduce(ag.mul(sq, Tensor(w_s)), "mean"), cfg.lambda1)
        term_t = ag.mul(ag.reduce(ag.mul(sq, Tensor(w_t)), "mean"), cfg.lambda2)
        return ag.add(term_s, term_t)
    w = combine_filters(w_s.reshape(-1, *w_s.shape[-2:]), w_t.reshape(-1, *w_t.shape[-2:]), cfg.fft_source)
    return ag.reduce(ag.mul(sq, Tensor(w.reshape(s.data.shape))), "mean")


def _smooth_stack(maps: np.ndarray, t_win: int, frame_axis: int) -> np.ndarray:
    if frame_axis == 0:
        return temporal_average_all(maps, t_win)
    return np.stack([temporal_average_all(m, t_win) for m in maps])


def pseudo_label(teacher_map: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Thresholded teacher prediction plus a confidence validity mask.

    Pixels with predictions inside (0.5 - delta, 0.5 + delta) are too
    uncertain and are excluded from the pseudo-label loss.
    """
    if not 0.0 <= delta < 0.5:
        raise ValueError(f"pseudo margin must lie in [0, 0.5), got {delta}")
    t = np.asarray(teacher_map, dtype=np.float64)
    pseudo = (t > 0.5).astype(np.float64)
    valid = (np.abs(t - 0.5) >= delta).astype(np.float64)
    return pseudo, valid


def lambda_unsup(epoch: int, total_epochs: int, cfg: SSLConfig) -> float:
    """Linear ramp from ramp_start to ramp_end over the warmup fraction of epochs."""
    warm = cfg.warmup_fraction * total_epochs
    if warm <= 0:
        return cfg.ramp_end
    frac = min(1.0, epoch / warm)
    return cfg.ramp_start + (cfg.ramp_end - cfg.ramp_start) * frac


@dataclass
class TrainResult:
    student: ParamStore
    teacher: ParamStore
    rows: list  # per-step loss log dicts
    final_losses: dict


def _epoch_rng(seed: int, epoch: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch), stream]))


def _batches(ids: list, rng: np.random.Generator, size: int):
    order = list(rng.permutation(np.array(sorted(ids), dtype=np.int64)))
    return [order[i : i + size] for i in range(0, len(order), size)]


def train_epoch(
    dataset,
    student: ParamStore,
    teacher: ParamStore,
    opt: Adam,
    model_cfg: ModelConfig,
    ssl_cfg: SSLConfig,
    train_cfg: TrainConfig,
    epoch: int,
    seed: int,
    total_epochs: int | None = None,
) -> list:
    """One pass over the labeled pool; returns per-step loss log rows.

    Each step takes batch_size/2 labeled samples (both augmented views) and
    batch_size/2 unlabeled samples. The student sees strong views, the teacher
    weak views; the optimizer step precedes the EMA teacher update.
    """
    labeled = sorted(dataset.labeled)
    if not labeled:
        raise ValueError("labeled pool is empty")
    unlabeled = sorted(dataset.unlabeled)
    half = train_cfg.batch_size // 2
    rng_lab = _epoch_rng(seed, epoch, _LAB_STREAM)
    rng_unlab = _epoch_rng(seed, epoch, _UNLAB_STREAM)
    lab_batches = _batches(labeled, rng_lab, half)
    use_unlabeled = train_cfg.method != "supervised" and len(unlabeled) > 0
    if use_unlabeled:
        unlab_order = list(rng_unlab.permutation(np.array(unlabeled, dtype=np.int64)))
    if total_epochs is None:
        total_epochs = train_cfg.epochs
    lam = lambda_unsup(epoch, total_epochs, ssl_cfg)
    num_classes = model_cfg.num_classes

    rows = []
    ucursor = 0
    for step, lab_ids in enumerate(lab_batches):
        # labeled half: both the weak and the strong view train the student,
        # against the annotation carried through the shared geometric transform
        lab_clips, lab_masks, lab_cids = [], [], []
        for vid in lab_ids:
            s = dataset.sample(int(vid))
            weak, strong, (weak_spec, strong_spec) = make_aug_pair(s.frames, rng_lab)
            ann = transform_annotation(s.annotation, strong_spec)
            lab_clips.extend([weak, strong])
            lab_masks.extend([ann.masks.astype(np.float64)] * 2)
            lab_cids.extend([ann.class_id] * 2)
        lab_clips = np.stack(lab_clips)
        lab_masks = np.stack(lab_masks)

        unlab_strong = unlab_weak = None
        if use_unlabeled:
            batch_u = []
            for _ in range(half):
                batch_u.append(int(unlab_order[ucursor % len(unlab_order)]))
                ucursor += 1
            views_w, views_s = [], []
            for vid in batch_u:
                s = dataset.sample(vid)
                weak, strong, _ = make_aug_pair(s.frames, rng_unlab)
                views_w.append(weak)
                views_s.append(strong)
            unlab_weak = np.stack(views_w)
            unlab_strong = np.stack(views_s)

            # no-grad target maps, computed before the taped student pass
            if train_cfg.method == "consistency":
                snapshot = student.clone(role="teacher", requires_grad=False)
                t_det, t_cls = forward_batch(snapshot, unlab_weak, model_cfg)
            else:
                t_det, t_cls = forward_batch(teacher, unlab_weak, model_cfg)
            teacher_maps = t_det.data
            teacher_cls = t_cls.data

        n_lab = lab_clips.shape[0]
        with ag.Tape() as tape:
            if use_unlabeled:
                det_all, cls_all = forward_batch(
                    student, np.concatenate([lab_clips, unlab_strong]), model_cfg
                )
                det_l = ag.narrow(det_all, 0, 0, n_lab)
                cls_l = ag.narrow(cls_all, 0, 0, n_lab)
                det_u = ag.narrow(det_all, 0, n_lab, det_all.data.shape[0] - n_lab)
                cls_u = ag.narrow(cls_all, 0, n_lab, cls_all.data.shape[0] - n_lab)
            else:
                det_l, cls_l = forward_batch(student, lab_clips, model_cfg)
            l_det, l_cls = supervised_loss_batch(det_l, cls_l, lab_masks, lab_cids, num_classes)
            loss = ag.add(l_det, l_cls)
            l_pseudo_val = 0.0
            l_cons_val = 0.0
            if use_unlabeled:
                if train_cfg.method in ("mean_teacher", "mean_teacher_fft") and train_cfg.pseudo_weight != "none":
                    pseudo, valid = pseudo_label(teacher_maps, ssl_cfg.pseudo_margin)
                    l_pseudo = masked_bce_loss(det_u, pseudo, valid)
                    # lambda: the whole unlabeled loss rides the ramp; ramp:
                    # pseudo reaches full weight at the end of warmup; full:
                    # unscaled from the first step
                    if train_cfg.pseudo_weight == "lambda":
                        pw = lam
                    elif train_cfg.pseudo_weight == "ramp":
                        pw = lam / ssl_cfg.ramp_end if ssl_cfg.ramp_end > 0 else 0.0
                    else:
                        pw = 1.0
                    loss = ag.add(loss, ag.mul(l_pseudo, pw))
                    l_pseudo_val = l_pseudo.item()
                if train_cfg.method == "mean_teacher_fft":
                    l_cons = hpf_consistency(det_u, teacher_maps, ssl_cfg)
                else:
                    l_cons = consistency_plain(det_u, teacher_maps)
                if ssl_cfg.class_consistency:
                    l_cons = ag.add(l_cons, consistency_plain(cls_u, teacher_cls))
                l_cons_val = l_cons.item()
                if lam != 0.0:
                    loss = ag.add(loss, ag.mul(l_cons, lam))
        ag.backprop(loss, tape)
        opt.step(student.gradients())
        if use_unlabeled and train_cfg.method in ("mean_teacher", "mean_teacher_fft"):
            ema_update(teacher, student, ssl_cfg.ema_rate)

        rows.append(
            {
                "epoch": epoch,
                "step": step,
                "l_cls": l_cls.item(),
                "l_det": l_det.item(),
                "l_pseudo": l_pseudo_val,
                "l_cons": l_cons_val,
                "lambda_unsup": lam if use_unlabeled else 0.0,
            }
        )
    return rows


def train_model(
    dataset,
    model_cfg: ModelConfig,
    ssl_cfg: SSLConfig,
    train_cfg: TrainConfig,
    seed: int,
) -> TrainResult:
    """Fresh-initialize and train a student (and EMA teacher) on the dataset pools."""
    ssl_cfg.validate()
    train_cfg.validate()
    student = init_params(model_cfg, np.random.SeedSequence([int(seed), _INIT_STREAM]).generate_state(1)[0])
    teacher = student.clone(role="teacher", requires_grad=False)
    opt = Adam(student, lr=train_cfg.lr, betas=train_cfg.betas, eps=train_cfg.eps)
    rows = []
    total_epochs = train_cfg.effective_epochs(len(dataset.labeled))
    for epoch in range(total_epochs):
        opt.lr = epoch_lr(train_cfg, epoch, total_epochs)
        rows.extend(
            train_epoch(
                dataset, student, teacher, opt, model_cfg, ssl_cfg, train_cfg, epoch, seed,
                total_epochs=total_epochs,
            )
        )
    final = rows[-1] if rows else {}
    return TrainResult(student=student, teacher=teacher, rows=rows, final_losses=dict(final))


LOSS_LOG_COLUMNS = ["epoch", "step", "l_cls", "l_det", "l_pseudo", "l_cons", "lambda_unsup"]


def write_loss_log(path, rows: list):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOSS_LOG_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in LOSS_LOG_COLUMNS])


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return v
