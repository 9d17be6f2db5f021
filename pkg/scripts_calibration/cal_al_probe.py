"""Does variance-of-uncertainty selection beat random at desk scale?

Trains round 0, scores the unlabeled pool with each selector, inspects what
the scores correlate with, then runs round 1 for each selector and compares.
"""
import time
import numpy as np
from dataclasses import replace
from ssal.videogen import GenConfig, gen_dataset
from ssal.model import ModelConfig, forward_batch
from ssal.training import SSLConfig, TrainConfig, train_model
from ssal.selection import score_pool, select_topk, baseline_select
from ssal.experiment import evaluate_params, ExperimentConfig, initial_labeled_ids
from ssal.losses import one_hot
from ssal.model import supervised_loss_batch

mc = ModelConfig()
SSL = SSLConfig(ema_rate=0.99, class_consistency=True)
TC = TrainConfig(pseudo_weight="none")

def probe(seed):
    ds = gen_dataset(GenConfig(), seed)
    cfg = ExperimentConfig(); cfg.seed = seed
    lab0 = initial_labeled_ids(cfg, ds)
    ds.reset_pools(lab0)
    t0 = time.time()
    res0 = train_model(ds, mc, SSL, TC, seed)
    m0 = evaluate_params(res0.teacher, ds, mc)
    print(f"[seed {seed}] round0 f50={m0.f_map50:.3f} ({time.time()-t0:.0f}s)", flush=True)

    pool = sorted(ds.unlabeled)
    scores_na = score_pool(ds, res0.student, mc, pool, "noiseaug", 8, 3, seed=1000+seed)
    scores_sw = score_pool(ds, res0.student, mc, pool, "strongweak", 8, 3, seed=1000+seed)

    # what does the noiseaug score correlate with?
    intens, size, sup_loss, cls = [], [], [], []
    na = []
    for vid in pool:
        s = ds.sample(vid)
        na.append(scores_na[vid].score)
        mask_any = s.annotation.masks.any(axis=(1, 2))
        fg = s.frames[..., 0][s.annotation.masks]
        intens.append(fg.mean() if fg.size else 0.0)
        size.append(s.annotation.masks.sum() / max(1, mask_any.sum()))
        det, c = forward_batch(res0.student, s.frames[None].astype(float), mc)
        l_det, l_cls = supervised_loss_batch(det, c, s.annotation.masks[None].astype(float),
                                             [s.annotation.class_id], mc.num_classes)
        sup_loss.append(l_det.item() + l_cls.item())
        cls.append(s.annotation.class_id)
    na = np.array(na)
    def corr(a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        return float(np.corrcoef(a, b)[0, 1])
    print(f"  corr(score, actor intensity) = {corr(na, intens):+.2f}")
    print(f"  corr(score, actor size)      = {corr(na, size):+.2f}")
    print(f"  corr(score, oracle loss)     = {corr(na, sup_loss):+.2f}", flush=True)

    k = 24
    picks = {
        "noiseaug": select_topk(pool, scores_na, k),
        "strongweak": select_topk(pool, scores_sw, k),
        "random": baseline_select(pool, k, "random", seed=2000 + seed),
        "oracle-loss": select_topk(pool, dict(zip(pool, sup_loss)), k),
    }
    out = {}
    for name, chosen in picks.items():
        ds.reset_pools(lab0)
        for vid in chosen:
            ds.oracle_annotate(vid)
        res1 = train_model(ds, mc, SSL, TC, seed + 50)
        m1 = evaluate_params(res1.teacher, ds, mc)
        out[name] = m1.f_map50
        from collections import Counter
        cc = Counter(ds.sample(v).annotation.class_id for v in chosen)
        print(f"  {name:12s} round1 f50={m1.f_map50:.3f}  picks by class {dict(sorted(cc.items()))}", flush=True)
    return out

if __name__ == "__main__":
    allout = {}
    for seed in (0, 1, 2):
        allout[seed] = probe(seed)
    print("\nsummary:")
    for name in ("noiseaug", "strongweak", "random", "oracle-loss"):
        vals = [allout[s][name] for s in allout]
        print(f"  {name:12s} mean={np.mean(vals):.3f}  {['%.3f' % v for v in vals]}")
