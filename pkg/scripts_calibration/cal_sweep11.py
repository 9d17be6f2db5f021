"""Final method wirings exactly as the code defines them (wide speeds)."""
import time
import numpy as np
from dataclasses import replace
from ssal.videogen import GenConfig, gen_dataset
from ssal.model import ModelConfig
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.experiment import evaluate_params, ExperimentConfig, initial_labeled_ids

SEEDS = [0, 1, 2, 3, 4]
mc = ModelConfig()
GEN = GenConfig(speed=(0.75, 3.5))
SUP = [0.113, 0.136, 0.131, 0.140, 0.219]

def arm(tag, method, ssl, tc):
    t0 = time.time(); vals = []
    for seed in SEEDS:
        ds = gen_dataset(GEN, seed)
        cfg = ExperimentConfig(); cfg.seed = seed
        ds.reset_pools(initial_labeled_ids(cfg, ds))
        res = train_model(ds, mc, ssl, replace(tc, method=method), seed)
        vals.append(evaluate_params(res.student, ds, mc).f_map50)
    print(f"{tag:30s} mean={np.mean(vals):.3f}  {' '.join('%.3f' % v for v in vals)}  >sup {sum(v>s for v,s in zip(vals,SUP))}/5  ({time.time()-t0:.0f}s)", flush=True)
    return vals

if __name__ == "__main__":
    ssl = SSLConfig(ema_rate=0.99, class_consistency=True)
    tc = TrainConfig(pseudo_weight="lambda")
    arm("mt_full (pseudo+cls+plain)", "mean_teacher", ssl, tc)
    print("done")
