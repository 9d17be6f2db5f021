"""Teacher-eval variants of the promising arms."""
import time
import numpy as np
from dataclasses import replace
from ssal.videogen import GenConfig, gen_dataset
from ssal.model import ModelConfig
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.experiment import evaluate_params, ExperimentConfig, initial_labeled_ids
import ssal.training as T
from ssal.autograd import Tensor

SEEDS = [0, 1, 2, 3, 4]
mc = ModelConfig()
SUP = [0.115, 0.292, 0.193, 0.169, 0.219]

def arm(tag, method, ssl, tc, no_pseudo=False, eval_teacher=True):
    t0 = time.time()
    vals = []
    orig = T.masked_bce_loss
    if no_pseudo:
        T.masked_bce_loss = lambda *a, **k: Tensor(0.0)
    try:
        for seed in SEEDS:
            ds = gen_dataset(GenConfig(), seed)
            cfg = ExperimentConfig(); cfg.seed = seed
            ds.reset_pools(initial_labeled_ids(cfg, ds))
            res = train_model(ds, mc, ssl, replace(tc, method=method), seed)
            p = res.teacher if eval_teacher else res.student
            vals.append(evaluate_params(p, ds, mc).f_map50)
    finally:
        T.masked_bce_loss = orig
    wins = sum(v > s for v, s in zip(vals, SUP))
    print(f"{tag:38s} mean={np.mean(vals):.3f}  {' '.join('%.3f' % v for v in vals)}  "
          f">sup {wins}/5  ({time.time()-t0:.0f}s)", flush=True)

if __name__ == "__main__":
    arm("T-eval cons-only a=.99 (mt)", "mean_teacher", SSLConfig(ema_rate=0.99), TrainConfig(), no_pseudo=True)
    arm("T-eval cons-only a=.99 (fft)", "mean_teacher_fft", SSLConfig(ema_rate=0.99), TrainConfig(), no_pseudo=True)
    arm("T-eval pseudo*lam a=.99 (mt)", "mean_teacher", SSLConfig(ema_rate=0.99), TrainConfig(pseudo_weight="lambda"))
    arm("T-eval pseudo*lam a=.99 (fft)", "mean_teacher_fft", SSLConfig(ema_rate=0.99), TrainConfig(pseudo_weight="lambda"))
    print("done")
