"""Scoring unlabeled videos by variance of uncertainty under noise.

A briefly trained model scores every unlabeled video: each gets R noise
variants (elementwise standard-normal products), the per-variant uncertainty
is the summed negative log of the temporally averaged detection map, and the
sample score is the variance across variants. High variance means the model
is inconsistent around that sample.
"""

import numpy as np

from ssal.experiment import ExperimentConfig, initial_labeled_ids
from ssal.model import ModelConfig
from ssal.selection import noise_variants, score_pool, select_topk
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.videogen import GenConfig, gen_dataset

gen = GenConfig(n_train=36, n_test=6)
model_cfg = ModelConfig()
cfg = ExperimentConfig(data=gen, seed=3)
cfg.al.initial_fraction = 0.25

ds = gen_dataset(gen, cfg.seed)
ds.reset_pools(initial_labeled_ids(cfg, ds))
result = train_model(ds, model_cfg, SSLConfig(), TrainConfig(min_steps=120), seed=3)

# what a noise variant looks like numerically
clip = ds.samples[sorted(ds.unlabeled)[0]].frames
variants = noise_variants(clip, r_count=4, seed=0)
print("clip range [%.2f, %.2f] -> variant range [%.2f, %.2f]" % (
    clip.min(), clip.max(), variants.variants.min(), variants.variants.max()))

scores = score_pool(ds, result.student, model_cfg, sorted(ds.unlabeled),
                    "noiseaug", r_count=8, t_win=3, seed=11)
ranked = select_topk(ds.unlabeled, scores, k=len(ds.unlabeled))
print("\nvideo  score          per-variant uncertainties (first 4)")
for vid in ranked[:6]:
    s = scores[vid]
    us = " ".join(f"{u:8.1f}" for u in s.uncertainties[:4])
    print(f"{vid:5d}  {s.score:12.2f}  {us}")
print("...")
for vid in ranked[-2:]:
    s = scores[vid]
    us = " ".join(f"{u:8.1f}" for u in s.uncertainties[:4])
    print(f"{vid:5d}  {s.score:12.2f}  {us}")

print(f"\ntop-4 picks for annotation: {ranked[:4]}")
