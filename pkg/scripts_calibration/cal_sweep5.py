"""Decisive comparison with stratified pools."""
import time
import numpy as np
from dataclasses import replace
from ssal.videogen import GenConfig, gen_dataset
from ssal.model import ModelConfig
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.experiment import evaluate_params, ExperimentConfig, initial_labeled_ids

SEEDS = [0, 1, 2, 3, 4]
mc = ModelConfig()

def arm(tag, method, ssl, tc, seeds=SEEDS):
    t0 = time.time(); vals = []
    for seed in seeds:
        ds = gen_dataset(GenConfig(), seed)
        cfg = ExperimentConfig(); cfg.seed = seed
        ds.reset_pools(initial_labeled_ids(cfg, ds))
        res = train_model(ds, mc, ssl, replace(tc, method=method), seed)
        vals.append(evaluate_params(res.student, ds, mc).f_map50)
    print(f"{tag:36s} mean={np.mean(vals):.3f}  {' '.join('%.3f' % v for v in vals)}  ({time.time()-t0:.0f}s)", flush=True)
    return vals

if __name__ == "__main__":
    tc = TrainConfig(pseudo_weight="none")
    ssl = SSLConfig(ema_rate=0.99)
    sup = arm("strat sup", "supervised", ssl, tc)
    mt = arm("strat cons mt a=.99", "mean_teacher", ssl, tc)
    fft = arm("strat cons fft a=.99", "mean_teacher_fft", ssl, tc)
    print("wins: mt>sup %d/5, fft>mt %d/5, fft>sup %d/5" % (
        sum(m>s for m,s in zip(mt,sup)), sum(f>m for f,m in zip(fft,mt)), sum(f>s for f,s in zip(fft,sup))), flush=True)
