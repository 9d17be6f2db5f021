"""Consistency weight endpoint sweep, student eval, pseudo off."""
import time
import numpy as np
from dataclasses import replace
from ssal.videogen import GenConfig, gen_dataset
from ssal.model import ModelConfig
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.experiment import evaluate_params, ExperimentConfig, initial_labeled_ids

SEEDS = [0, 1, 2, 3, 4]
mc = ModelConfig()
SUP = [0.115, 0.292, 0.193, 0.169, 0.219]

def arm(tag, method, ssl, tc):
    t0 = time.time(); vals = []
    for seed in SEEDS:
        ds = gen_dataset(GenConfig(), seed)
        cfg = ExperimentConfig(); cfg.seed = seed
        ds.reset_pools(initial_labeled_ids(cfg, ds))
        res = train_model(ds, mc, ssl, replace(tc, method=method), seed)
        vals.append(evaluate_params(res.student, ds, mc).f_map50)
    wins = sum(v > s for v, s in zip(vals, SUP))
    print(f"{tag:40s} mean={np.mean(vals):.3f}  {' '.join('%.3f' % v for v in vals)}  >sup {wins}/5  ({time.time()-t0:.0f}s)", flush=True)

if __name__ == "__main__":
    tc = TrainConfig(pseudo_weight="none")
    arm("cons r_end=0.3 a=.99 (mt)", "mean_teacher", SSLConfig(ema_rate=0.99, ramp_start=0.03, ramp_end=0.3), tc)
    arm("cons r_end=0.3 a=.99 (fft)", "mean_teacher_fft", SSLConfig(ema_rate=0.99, ramp_start=0.03, ramp_end=0.3), tc)
    arm("cons r_end=1.0 a=.99 (mt)", "mean_teacher", SSLConfig(ema_rate=0.99, ramp_start=0.1, ramp_end=1.0), tc)
    arm("cons r_end=1.0 a=.99 (fft)", "mean_teacher_fft", SSLConfig(ema_rate=0.99, ramp_start=0.1, ramp_end=1.0), tc)
    print("done")
