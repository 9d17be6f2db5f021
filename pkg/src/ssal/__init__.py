"""Desk-scale lab for semi-supervised active learning on synthetic videos.

The package provides a float64 autograd core, a synthetic moving-actor video
benchmark with an annotation oracle, a tiny spatio-temporal detector,
frequency-domain edge-weight masks, mean-teacher SSL training, uncertainty
based sample selection, detection metrics, and an experiment harness.
"""

from .autograd import Tensor, Tape, backprop
from .errors import ConfigError, DataFormatError, PoolError, ShapeError, SsalError
from .experiment import (
    ALConfig,
    ExperimentConfig,
    RoundLog,
    config_load_validate,
    run_ablation,
    run_al_experiment,
    run_selector_comparison,
)
from .metrics import MetricsReport, average_precision, frame_iou, report, tube_iou
from .model import DetOutput, FrameDetection, ModelConfig, detect_boxes, forward, init_params
from .optim import Adam, ParamStore
from .selection import ALScore, informativeness, noise_variants, select_topk
from .spectral import Spectrum, combine_filters, fft2d, hpf_weight_map, highpass_apply, ifft2d
from .training import AugSpec, SSLConfig, TrainConfig, ema_update, make_aug_pair, train_model
from .videogen import Annotation, GenConfig, VideoDataset, VideoSample, gen_dataset, read_dataset, write_dataset

__version__ = "0.1.0"
