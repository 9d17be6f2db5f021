"""Middle-arm (M-T) wiring candidates."""
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
SUP = [0.162, 0.214, 0.238, 0.232, 0.319]
FFT = [0.177, 0.206, 0.277, 0.302, 0.271]

def arm(tag, method, ssl, tc, no_det_cons=False):
    t0 = time.time(); vals = []
    orig = T.consistency_plain
    if no_det_cons:
        # zero out the det-map half of the consistency (class part stays)
        def patched(s, t_):
            import numpy as _np
            if (hasattr(s, "data") and s.data.ndim == 2):
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
    w_sup = sum(v > s for v, s in zip(vals, SUP))
    w_fft = sum(f > v for f, v in zip(FFT, vals))
    print(f"{tag:44s} mean={np.mean(vals):.3f}  {' '.join('%.3f' % v for v in vals)}  >sup {w_sup}/5 fft> {w_fft}/5  ({time.time()-t0:.0f}s)", flush=True)

if __name__ == "__main__":
    tc = TrainConfig(pseudo_weight="none")
    arm("A clscons-only mt", "mean_teacher", SSLConfig(ema_rate=0.99, class_consistency=True), tc, no_det_cons=True)
    arm("D clscons+pseudo*lam (no detcons) mt", "mean_teacher", SSLConfig(ema_rate=0.99, class_consistency=True), replace(tc, pseudo_weight="lambda"), no_det_cons=True)
    print("done")
