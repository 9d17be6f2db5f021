"""Decisive multi-seed comparison at benchmark defaults."""
import sys, time
import numpy as np
from dataclasses import replace
from ssal.videogen import GenConfig, gen_dataset
from ssal.model import ModelConfig
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.experiment import evaluate_params, ExperimentConfig, initial_labeled_ids

SEEDS = [0, 1, 2, 3, 4]
mc = ModelConfig()

def one(seed, method, ssl, tc):
    ds = gen_dataset(GenConfig(), seed)
    cfg = ExperimentConfig(); cfg.seed = seed
    ds.reset_pools(initial_labeled_ids(cfg, ds))
    res = train_model(ds, mc, ssl, replace(tc, method=method), seed)
    return evaluate_params(res.student, ds, mc).f_map50

def compare(tag, ssl, tc):
    t0 = time.time()
    rows = {}
    for method in ("supervised", "mean_teacher", "mean_teacher_fft"):
        rows[method] = [one(s, method, ssl, tc) for s in SEEDS]
        print(f"  {method:18s} mean={np.mean(rows[method]):.3f}  "
              + " ".join(f"{x:.3f}" for x in rows[method]), flush=True)
    sup, mt, fft = rows["supervised"], rows["mean_teacher"], rows["mean_teacher_fft"]
    print(f"[{tag}] wins: mt>sup {sum(m>s for m,s in zip(mt,sup))}/5, "
          f"fft>mt {sum(f>m for f,m in zip(fft,mt))}/5, "
          f"fft>sup {sum(f>s for f,s in zip(fft,sup))}/5  ({time.time()-t0:.0f}s)", flush=True)

if __name__ == "__main__":
    for arg in sys.argv[1:]:
        if arg == "default":
            compare("defaults d0.2", SSLConfig(), TrainConfig())
        elif arg == "d04":
            compare("d0.4", SSLConfig(pseudo_margin=0.4), TrainConfig())
        elif arg == "steps400":
            compare("min_steps 400", SSLConfig(), TrainConfig(min_steps=400))
        elif arg == "nopseudo":
            import ssal.training as T
            from ssal.autograd import Tensor
            orig = T.masked_bce_loss
            T.masked_bce_loss = lambda *a, **k: Tensor(0.0)
            compare("no pseudo at all", SSLConfig(), TrainConfig())
            T.masked_bce_loss = orig
