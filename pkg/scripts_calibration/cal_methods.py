"""Multi-seed method comparison for tuning the benchmark defaults."""
import sys, time
import numpy as np
from ssal.videogen import GenConfig, gen_dataset
from ssal.model import ModelConfig
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.experiment import evaluate_params, ExperimentConfig, initial_labeled_ids
from dataclasses import replace

SEEDS = [0, 1, 2, 3, 4]
mc = ModelConfig()

def one(seed, method, ssl, tc, eval_teacher=False):
    ds = gen_dataset(GenConfig(), seed)
    cfg = ExperimentConfig(); cfg.seed = seed
    lab = initial_labeled_ids(cfg, ds)
    ds.reset_pools(lab)
    res = train_model(ds, mc, ssl, replace(tc, method=method), seed)
    p = res.teacher if (eval_teacher and method != "supervised") else res.student
    return evaluate_params(p, ds, mc).f_map50

def compare(tag, ssl, tc, eval_teacher=False):
    t0 = time.time()
    rows = {}
    for method in ("supervised", "mean_teacher", "mean_teacher_fft"):
        rows[method] = [one(s, method, ssl, tc, eval_teacher) for s in SEEDS]
    sup, mt, fft = rows["supervised"], rows["mean_teacher"], rows["mean_teacher_fft"]
    win_fft_sup = sum(f > s for f, s in zip(fft, sup))
    win_fft_mt = sum(f > m for f, m in zip(fft, mt))
    win_mt_sup = sum(m > s for m, s in zip(mt, sup))
    print(f"[{tag}] ({time.time()-t0:.0f}s)")
    for k, v in rows.items():
        print(f"  {k:18s} mean={np.mean(v):.3f}  " + " ".join(f"{x:.3f}" for x in v))
    print(f"  wins: mt>sup {win_mt_sup}/5, fft>mt {win_fft_mt}/5, fft>sup {win_fft_sup}/5", flush=True)
    return rows

if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "base"
    if which == "base":
        compare("ep40 lr8e-3 cosine, ramped pseudo d0.2", SSLConfig(), TrainConfig(epochs=40, lr=8e-3))
    elif which == "d04":
        compare("ep40 d=0.4", SSLConfig(pseudo_margin=0.4), TrainConfig(epochs=40, lr=8e-3))
    elif which == "teacher":
        compare("ep40 d=0.4 teacher-eval", SSLConfig(pseudo_margin=0.4), TrainConfig(epochs=40, lr=8e-3), eval_teacher=True)
    elif which == "alpha99":
        compare("ep40 d=0.4 alpha=0.99", SSLConfig(pseudo_margin=0.4, ema_rate=0.99), TrainConfig(epochs=40, lr=8e-3))
    elif which == "lr4":
        compare("ep60 lr4e-3 d=0.4", SSLConfig(pseudo_margin=0.4), TrainConfig(epochs=60, lr=4e-3))
