"""One semi-supervised training run on a small labeled pool.

Trains the detector with 25% labels three ways (labels only, mean-teacher
with plain consistency, mean-teacher with edge-weighted consistency) and
reports test metrics for each.
"""

import numpy as np

from ssal.experiment import ExperimentConfig, evaluate_params, initial_labeled_ids
from ssal.model import ModelConfig
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.videogen import GenConfig, gen_dataset

gen = GenConfig(n_train=48, n_test=24)
model_cfg = ModelConfig()
ssl = SSLConfig()

cfg = ExperimentConfig(data=gen, seed=1)
cfg.al.initial_fraction = 0.25
ds = gen_dataset(gen, cfg.seed)
labeled = initial_labeled_ids(cfg, ds)
print(f"labeled pool: {len(labeled)} of {len(ds.train_ids)} train videos\n")

for method in ("supervised", "mean_teacher", "mean_teacher_fft"):
    ds.reset_pools(labeled)
    result = train_model(ds, model_cfg, ssl, TrainConfig(method=method, min_steps=160), seed=1)
    metrics = evaluate_params(result.student, ds, model_cfg)
    last = result.rows[-1]
    print(
        f"{method:18s} f-mAP@0.5 {metrics.f_map50:.3f}  v-mAP@0.2 {metrics.v_map20:.3f}  "
        f"mask IoU {metrics.mask_iou:.3f}  (final l_det {last['l_det']:.3f}, "
        f"l_cons {last['l_cons']:.4f})"
    )
