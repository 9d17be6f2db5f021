"""Longer-horizon arms: does SSL compound with steps?"""
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

def arm(tag, method, ssl, tc, no_det_cons=False):
    t0 = time.time(); vals = []
    orig = T.consistency_plain
    if no_det_cons:
        def patched(s, t_):
            if hasattr(s, "data") and s.data.ndim == 2:
                return orig(s, t_)
            return Tensor(0.0)
        T.consistency_plain = patched
    try:
        for seed in SEEDS:
            ds = gen_dataset(GenConfig(), seed)
            cfg = ExperimentConfig(); cfg.seed = seed
            ds.reset_pools(initial_labeled_ids(cfg, ds))
            res = train_model(ds, mc, ssl, replace(tc, method=method), seed)
            vals.append(evaluate_params(res.student, ds, mc).f_map50)
    finally:
        T.consistency_plain = orig
    print(f"{tag:40s} mean={np.mean(vals):.3f}  {' '.join('%.3f' % v for v in vals)}  ({time.time()-t0:.0f}s)", flush=True)
    return vals

if __name__ == "__main__":
    ssl = SSLConfig(ema_rate=0.99, class_consistency=True)
    tc = TrainConfig(min_steps=480, pseudo_weight="none")
    sup = arm("480 sup", "supervised", ssl, tc)
    d = arm("480 D: clscons+pseudo*lam", "mean_teacher", SSLConfig(ema_rate=0.99, class_consistency=True), replace(tc, pseudo_weight="lambda"), no_det_cons=True)
    g = arm("480 G: D + hpfcons", "mean_teacher_fft", SSLConfig(ema_rate=0.99, class_consistency=True), replace(tc, pseudo_weight="lambda"))
    f = arm("480 F: clscons+hpfcons", "mean_teacher_fft", SSLConfig(ema_rate=0.99, class_consistency=True), tc)
    for name, arr in (("D", d), ("G", g), ("F", f)):
        print(f"  {name}>sup {sum(v>s for v,s in zip(arr,sup))}/5  mean diff {np.mean(arr)-np.mean(sup):+.3f}", flush=True)
    print("done")
