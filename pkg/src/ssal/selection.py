"""Active-learning sample scoring and selection.

A trained model scores every unlabeled video by running noise-perturbed
variants through the detector, measuring per-variant uncertainty from the
temporally averaged maps, and ranking samples by the variance of those
uncertainties. Random pick, an entropy ranker, and a strong/weak-augmentation
variant generator are provided as baselines.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .losses import EPS
from .model import ModelConfig, forward_batch, temporal_average_all
from .optim import ParamStore
from .training import make_aug_pair

SELECTOR_KINDS = ("noiseaug", "random", "entropy", "strongweak")


@dataclass
class NoiseVariantSet:
    sample_id: int
    count: int
    variants: np.ndarray  # [R, T, H, W, C]
    seeds: list


@dataclass
class ALScore:
    sample_id: int
    uncertainties: np.ndarray  # the R per-variant values
    score: float

    def validate(self):
        assert self.score >= 0.0
        assert len(self.uncertainties) >= 2


def _variant_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def noise_variants(
    clip: np.ndarray,
    r_count: int,
    seed: int,
    mode: str = "multiplicative",
    sigma: float = 0.1,
    sample_id: int = -1,
) -> NoiseVariantSet:
    """R noise-perturbed copies of a clip, one independent stream per variant.

    Multiplicative mode multiplies every element by standard-normal noise (no
    clamping); additive mode adds scaled noise and clamps back to [0, 1].
    """
    if r_count < 2:
        raise ValueError(f"need at least 2 variants, got {r_count}")
    clip = np.asarray(clip, dtype=np.float64)
    variants = np.empty((r_count,) + clip.shape)
    for i in range(r_count):
        rng = _variant_rng(seed, i)
        noise = rng.standard_normal(clip.shape)
        if mode == "multiplicative":
            variants[i] = clip * noise
        elif mode == "additive":
            variants[i] = np.clip(clip + sigma * noise, 0.0, 1.0)
        else:
            raise ValueError(f"unknown noise mode '{mode}'")
    return NoiseVariantSet(sample_id=sample_id, count=r_count, variants=variants, seeds=list(range(r_count)))


def strongweak_variants(clip: np.ndarray, r_count: int, seed: int, sample_id: int = -1) -> NoiseVariantSet:
    """Strong-augmentation views in place of noise variants (ablation selector)."""
    if r_count < 2:
        raise ValueError(f"need at least 2 variants, got {r_count}")
    clip = np.asarray(clip, dtype=np.float64)
    variants = np.empty((r_count,) + clip.shape)
    for i in range(r_count):
        _, strong, _ = make_aug_pair(clip, _variant_rng(seed, i))
        variants[i] = strong
    return NoiseVariantSet(sample_id=sample_id, count=r_count, variants=variants, seeds=list(range(r_count)))


def uncertainty_from_maps(det_maps: np.ndarray, t_win: int) -> float:
    """Negative-log confidence summed over pixels of the temporally averaged maps."""
    avg = temporal_average_all(np.asarray(det_maps, dtype=np.float64), t_win)
    return float(-np.log(np.clip(avg, EPS, 1.0)).sum())


def sample_uncertainty(params: ParamStore, variant: np.ndarray, t_win: int, model_cfg: ModelConfig) -> float:
    """Uncertainty of one clip variant under a frozen parameter snapshot."""
    det, _ = forward_batch(params, np.asarray(variant, dtype=np.float64)[None], model_cfg)
    return uncertainty_from_maps(det.data[0], t_win)


def informativeness(uncertainties) -> float:
    """Population variance of the per-variant uncertainties."""
    u = np.asarray(uncertainties, dtype=np.float64)
    if u.size < 2:
        raise ValueError(f"need at least 2 uncertainty values, got {u.size}")
    return float(np.mean((u - u.mean()) ** 2))


def score_sample(
    params: ParamStore,
    clip: np.ndarray,
    model_cfg: ModelConfig,
    r_count: int,
    t_win: int,
    seed: int,
    variant_kind: str = "noiseaug",
    noise_mode: str = "multiplicative",
    sample_id: int = -1,
) -> ALScore:
    """Variance-of-uncertainty informativeness for one unlabeled sample."""
    if variant_kind == "strongweak":
        vset = strongweak_variants(clip, r_count, seed, sample_id)
    else:
        vset = noise_variants(clip, r_count, seed, mode=noise_mode, sample_id=sample_id)
    det, _ = forward_batch(params, vset.variants, model_cfg)
    us = np.array([uncertainty_from_maps(det.data[i], t_win) for i in range(r_count)])
    return ALScore(sample_id=sample_id, uncertainties=us, score=informativeness(us))


def entropy_score(params: ParamStore, clip: np.ndarray, model_cfg: ModelConfig, t_win: int) -> float:
    """Binary entropy of the temporally averaged detection map, summed over pixels."""
    det, _ = forward_batch(params, np.asarray(clip, dtype=np.float64)[None], model_cfg)
    avg = np.clip(temporal_average_all(det.data[0], t_win), EPS, 1.0 - EPS)
    ent = -(avg * np.log(avg) + (1.0 - avg) * np.log(1.0 - avg))
    return float(ent.sum())


def score_pool(
    dataset,
    params: ParamStore,
    model_cfg: ModelConfig,
    pool_ids,
    kind: str,
    r_count: int,
    t_win: int,
    seed: int,
    noise_mode: str = "multiplicative",
) -> dict:
    """Score every id in the pool with a frozen snapshot; order independent."""
    if kind not in SELECTOR_KINDS:
        raise ValueError(f"selector must be one of {SELECTOR_KINDS}, got '{kind}'")
    scores = {}
    for vid in sorted(int(v) for v in pool_ids):
        clip = dataset.sample(vid).frames
        if kind in ("noiseaug", "strongweak"):
            s = score_sample(
                params,
                clip,
                model_cfg,
                r_count,
                t_win,
                seed=np.random.SeedSequence([seed, vid]).generate_state(1)[0],
                variant_kind=kind,
                noise_mode=noise_mode,
                sample_id=vid,
            )
        elif kind == "entropy":
            s = ALScore(
                sample_id=vid,
                uncertainties=np.zeros(2),
                score=entropy_score(params, clip, model_cfg, t_win),
            )
        else:  # random: score is drawn uniformly, ranking becomes a seeded shuffle
            rng = np.random.default_rng(np.random.SeedSequence([seed, vid]))
            s = ALScore(sample_id=vid, uncertainties=np.zeros(2), score=float(rng.random()))
        scores[vid] = s
    return scores


def select_topk(pool_ids, scorer, k: int) -> list:
    """Top-k ids by descending score; ties break toward the smaller id.

    `scorer` is either a mapping id -> ALScore/float or a callable id -> float.
    """
    pool = sorted(int(v) for v in pool_ids)
    if k > len(pool):
        raise ValueError(f"cannot select {k} from a pool of {len(pool)}")

    def value(vid):
        s = scorer[vid] if not callable(scorer) else scorer(vid)
        return s.score if isinstance(s, ALScore) else float(s)

    ranked = sorted(pool, key=lambda vid: (-value(vid), vid))
    return ranked[:k]


def baseline_select(pool_ids, k: int, kind: str, seed: int, **score_kwargs) -> list:
    """Random draw without replacement, or entropy-ranked top-k."""
    pool = sorted(int(v) for v in pool_ids)
    if k > len(pool):
        raise ValueError(f"cannot select {k} from a pool of {len(pool)}")
    if kind == "random":
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x72616E64]))
        return [int(v) for v in rng.choice(np.array(pool, dtype=np.int64), size=k, replace=False)]
    if kind == "entropy":
        scores = {vid: entropy_score(score_kwargs["params"], score_kwargs["dataset"].sample(vid).frames,
                                     score_kwargs["model_cfg"], score_kwargs["t_win"]) for vid in pool}
        return select_topk(pool, scores, k)
    raise ValueError(f"unknown baseline '{kind}'")


SCORE_CSV_PREFIX = ["round", "sample_id"]


def write_score_csv(path, round_index: int, scores: dict, selected, r_count: int):
    """Audit dump: round, sample id, per-variant uncertainties, score, selected flag."""
    selected = set(selected)
    header = SCORE_CSV_PREFIX + [f"u_{i + 1}" for i in range(r_count)] + ["score", "selected"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for vid in sorted(scores):
            s = scores[vid]
            us = list(s.uncertainties) + [0.0] * (r_count - len(s.uncertainties))
            writer.writerow(
                [round_index, vid]
                + [f"{u:.10g}" for u in us[:r_count]]
                + [f"{s.score:.10g}", int(vid in selected)]
            )
