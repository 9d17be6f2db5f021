"""Class-consistency arms with stratified pools."""
import time
import numpy as np
from dataclasses import replace
from ssal.videogen import GenConfig, gen_dataset
from ssal.model import ModelConfig
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.experiment import evaluate_params, ExperimentConfig, initial_labeled_ids

SEEDS = [0, 1, 2, 3, 4]
mc = ModelConfig()
SUP = [0.162, 0.214, 0.238, 0.232, 0.319]

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
    arm("clscons mt a=.99", "mean_teacher", SSLConfig(ema_rate=0.99, class_consistency=True), tc)
    arm("clscons fft a=.99", "mean_teacher_fft", SSLConfig(ema_rate=0.99, class_consistency=True), tc)
    arm("clscons+pseudo*lam fft a=.99", "mean_teacher_fft", SSLConfig(ema_rate=0.99, class_consistency=True), replace(tc, pseudo_weight="lambda"))
    print("done")
