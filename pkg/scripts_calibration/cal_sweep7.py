"""Harder distractors: does SSL pull ahead when labels undertrain?"""
import time
import numpy as np
from dataclasses import replace
from ssal.videogen import GenConfig, gen_dataset
from ssal.model import ModelConfig
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.experiment import evaluate_params, ExperimentConfig, initial_labeled_ids

SEEDS = [0, 1, 2, 3, 4]
mc = ModelConfig()

def arm(tag, gen, method, ssl, tc):
    t0 = time.time(); vals = []
    for seed in SEEDS:
        ds = gen_dataset(gen, seed)
        cfg = ExperimentConfig(); cfg.seed = seed
        ds.reset_pools(initial_labeled_ids(cfg, ds))
        res = train_model(ds, mc, ssl, replace(tc, method=method), seed)
        vals.append(evaluate_params(res.student, ds, mc).f_map50)
    print(f"{tag:42s} mean={np.mean(vals):.3f}  {' '.join('%.3f' % v for v in vals)}  ({time.time()-t0:.0f}s)", flush=True)
    return vals

if __name__ == "__main__":
    tc = TrainConfig(pseudo_weight="none")
    ssl = SSLConfig(ema_rate=0.99, class_consistency=True)
    for tag, gen in [("hard(0.5-0.85)", GenConfig(distractor_intensity=(0.5, 0.85))),
                     ("mid(0.5-0.75)", GenConfig(distractor_intensity=(0.5, 0.75)))]:
        sup = arm(f"{tag} sup", gen, "supervised", ssl, tc)
        fft = arm(f"{tag} clscons fft", gen, "mean_teacher_fft", ssl, tc)
        mt = arm(f"{tag} clscons mt", gen, "mean_teacher", ssl, tc)
        print(f"  {tag}: mt>sup {sum(m>s for m,s in zip(mt,sup))}/5 fft>mt {sum(f>m for f,m in zip(fft,mt))}/5 fft>sup {sum(f>s for f,s in zip(fft,sup))}/5", flush=True)
    print("done")
