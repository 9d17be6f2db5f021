"""Experiment orchestration: the train -> score -> select -> annotate cycle.

Each acquisition round trains a fresh model on the current labeled pool (plus
the unlabeled pool through the SSL losses), evaluates on the held-out test
split, then asks the selector for the next batch of videos to annotate. Every
random stream is derived from (seed, purpose, round), so a resumed experiment
reproduces the uninterrupted one bitwise.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .metrics import MetricsReport, report
from .model import (
    DetOutput,
    ModelConfig,
    forward_batch,
    load_checkpoint,
    save_checkpoint,
)
from .optim import ParamStore
from .selection import SELECTOR_KINDS, baseline_select, score_pool, select_topk, write_score_csv
from .spectral import write_pgm
from .training import (
    SSLConfig,
    TrainConfig,
    TrainResult,
    train_model,
    write_loss_log,
)
from .videogen import GenConfig, VideoDataset, gen_dataset, read_dataset

_POOL_STREAM = 0x50
_ROUND_STREAM = 0x52

METRICS_COLUMNS = ["round", "pct_labeled", "f_map50", "v_map20", "v_map50", "mask_iou"]


@dataclass
class ALConfig:
    initial_fraction: float = 0.1
    increment: float = 0.1
    rounds: int = 3
    r_variants: int = 8
    t_win: int = 3
    selector: str = "noiseaug"
    noise_mode: str = "multiplicative"
    initial_pool: str = "stratified"

    def validate(self, n_train: int):
        if self.initial_pool not in ("stratified", "random"):
            raise ConfigError(
                f"initial_pool must be stratified or random, got '{self.initial_pool}'"
            )
        if not 0.0 < self.initial_fraction <= 1.0:
            raise ConfigError(f"initial_fraction must lie in (0, 1], got {self.initial_fraction}")
        if self.increment < 0:
            raise ConfigError(f"increment must be nonnegative, got {self.increment}")
        if self.rounds < 0:
            raise ConfigError(f"rounds must be nonnegative, got {self.rounds}")
        if self.initial_fraction + self.rounds * self.increment > 1.0 + 1e-9:
            raise ConfigError(
                "annotation budget exceeds the pool: "
                f"initial_fraction + rounds * increment = "
                f"{self.initial_fraction + self.rounds * self.increment:.3f} > 1"
            )
        if self.r_variants < 2:
            raise ConfigError(f"r_variants must be >= 2, got {self.r_variants}")
        if self.t_win < 1 or self.t_win % 2 == 0:
            raise ConfigError(f"t_win must be odd and >= 1, got {self.t_win}")
        if self.selector not in SELECTOR_KINDS:
            raise ConfigError(f"selector must be one of {SELECTOR_KINDS}, got '{self.selector}'")
        if self.noise_mode not in ("multiplicative", "additive"):
            raise ConfigError(f"noise_mode must be multiplicative or additive, got '{self.noise_mode}'")
        if round(self.initial_fraction * n_train) < 1:
            raise ConfigError("initial_fraction yields an empty labeled pool")


@dataclass
class ExperimentConfig:
    data: GenConfig = field(default_factory=GenConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    ssl: SSLConfig = field(default_factory=SSLConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    al: ALConfig = field(default_factory=ALConfig)
    seed: int = 0
    out_dir: str = "runs/default"
    data_dir: str | None = None
    eval_model: str = "student"
    threads: int = 1
    debug_dump_weights: bool = False

    def validate(self):
        self.ssl.validate()
        self.train.validate()
        self.al.validate(self.data.n_train)
        if self.model.num_classes != self.data.num_classes:
            raise ConfigError(
                f"model.num_classes ({self.model.num_classes}) must equal the "
                f"data class count ({self.data.num_classes})"
            )
        if self.model.in_channels != self.data.channels:
            raise ConfigError(
                f"model.in_channels ({self.model.in_channels}) must equal data.channels "
                f"({self.data.channels})"
            )
        if self.eval_model not in ("student", "teacher"):
            raise ConfigError(f"eval_model must be student or teacher, got '{self.eval_model}'")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        return self


def benchmark_config(out_dir: str = "runs/benchmark", seed: int = 0) -> ExperimentConfig:
    """The desk-scale benchmark configuration used by the acceptance suite.

    The synthetic dataset is the default one; training knobs that the paper
    ties to dataset scale (learning rate, EMA horizon, loss wiring) carry the
    values calibrated for a few-hundred-step budget on CPU.
    """
    cfg = ExperimentConfig()
    cfg.seed = seed
    cfg.out_dir = out_dir
    cfg.ssl = replace(
        cfg.ssl,
        ema_rate=0.99,  # ~70-step teacher half-life, matched to round length
    )
    cfg.al = replace(cfg.al, rounds=2)
    return cfg.validate()


_SECTION_TYPES = {
    "data": GenConfig,
    "model": ModelConfig,
    "ssl": SSLConfig,
    "train": TrainConfig,
    "al": ALConfig,
}
_LIST_FIELDS = {"shapes", "motions", "enc_channels", "dec_channels", "betas", "actor_size",
                "actor_intensity", "speed", "distractor_size", "distractor_intensity"}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a validated config from a (possibly partial) plain dict.

    Unknown fields raise a ConfigError naming the offending key.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = ExperimentConfig()
    known_top = {f.name for f in fields(ExperimentConfig)}
    for key, value in raw.items():
        if key not in known_top:
            raise ConfigError(f"unknown config field '{key}'")
        if key in _SECTION_TYPES:
            section_type = _SECTION_TYPES[key]
            section = getattr(cfg, key)
            if not isinstance(value, dict):
                raise ConfigError(f"section '{key}' must be an object")
            known = {f.name for f in fields(section_type)}
            for k2, v2 in value.items():
                if k2 not in known:
                    raise ConfigError(f"unknown config field '{key}.{k2}'")
                if k2 in _LIST_FIELDS and isinstance(v2, list):
                    v2 = tuple(v2)
                setattr(section, k2, v2)
        else:
            setattr(cfg, key, value)
    return cfg.validate()


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    for key in list(out):
        if isinstance(out[key], dict):
            for k2, v2 in out[key].items():
                if isinstance(v2, tuple):
                    out[key][k2] = list(v2)
    return out


def config_load_validate(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


@dataclass
class RoundLog:
    round_index: int
    labeled_fraction: float
    labeled_count: int
    selected: list  # (video id, score) chosen this round; empty for round 0
    final_losses: dict
    metrics: MetricsReport

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "labeled_fraction": self.labeled_fraction,
            "labeled_count": self.labeled_count,
            "selected": [[int(v), float(s)] for v, s in self.selected],
            "final_losses": self.final_losses,
            "metrics": {
                "f_map50": self.metrics.f_map50,
                "v_map20": self.metrics.v_map20,
                "v_map50": self.metrics.v_map50,
                "mask_iou": self.metrics.mask_iou,
                "per_class_f50": {str(k): v for k, v in self.metrics.per_class_f50.items()},
                "per_class_v50": {str(k): v for k, v in self.metrics.per_class_v50.items()},
            },
        }


def _round_seed(seed: int, round_index: int) -> int:
    return int(np.random.SeedSequence([int(seed), _ROUND_STREAM, int(round_index)]).generate_state(1)[0])


def initial_labeled_ids(cfg: ExperimentConfig, dataset: VideoDataset) -> list:
    """Seed pool for round 0: class-stratified by default, or a uniform draw.

    Stratification splits the budget as evenly as possible across classes
    (remainder to the lowest class ids), which removes cold-start luck from
    the seed pool; the AL rounds themselves are untouched.
    """
    k0 = int(round(cfg.al.initial_fraction * len(dataset.train_ids)))
    if cfg.al.initial_pool == "random":
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), _POOL_STREAM]))
        ids = rng.choice(np.array(dataset.train_ids, dtype=np.int64), size=k0, replace=False)
        return sorted(int(v) for v in ids)
    by_class: dict[int, list] = {}
    for vid in dataset.train_ids:
        by_class.setdefault(dataset.sample(vid).annotation.class_id, []).append(vid)
    classes = sorted(by_class)
    base, extra = divmod(k0, len(classes))
    chosen = []
    for idx, c in enumerate(classes):
        want = base + (1 if idx < extra else 0)
        pool = np.array(sorted(by_class[c]), dtype=np.int64)
        if want > len(pool):
            raise ConfigError(f"class {c} has {len(pool)} videos, cannot seed {want}")
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), _POOL_STREAM, c]))
        chosen.extend(int(v) for v in rng.choice(pool, size=want, replace=False))
    return sorted(chosen)


def load_or_generate_dataset(cfg: ExperimentConfig) -> VideoDataset:
    if cfg.data_dir:
        return read_dataset(cfg.data_dir)
    return gen_dataset(cfg.data, cfg.seed)


def evaluate_params(
    params: ParamStore, dataset: VideoDataset, model_cfg: ModelConfig, batch: int = 12
) -> MetricsReport:
    outputs = {}
    test_ids = dataset.test_ids
    for i in range(0, len(test_ids), batch):
        chunk = test_ids[i : i + batch]
        clips = np.stack([dataset.sample(v).frames for v in chunk]).astype(np.float64)
        det, cls = forward_batch(params, clips, model_cfg)
        for j, vid in enumerate(chunk):
            outputs[vid] = DetOutput(det_map=det.data[j].copy(), class_scores=cls.data[j].copy())
    annotations = {vid: dataset.sample(vid).annotation for vid in test_ids}
    return report(outputs, annotations, model_cfg.num_classes)


def select_for_round(
    dataset: VideoDataset,
    cfg: ExperimentConfig,
    round_index: int,
    params: ParamStore,
) -> tuple[list, dict]:
    """Pick the ids to annotate this round with the configured selector."""
    k = int(round(cfg.al.increment * len(dataset.train_ids)))
    pool = sorted(dataset.unlabeled)
    seed = _round_seed(cfg.seed, round_index)
    if cfg.al.selector == "random":
        chosen = baseline_select(pool, k, "random", seed)
        scores = {}
    else:
        kind = cfg.al.selector
        if cfg.threads > 1:
            scores = _score_pool_threaded(dataset, params, cfg, pool, seed)
        else:
            scores = score_pool(
                dataset, params, cfg.model, pool, kind,
                cfg.al.r_variants, cfg.al.t_win, seed, cfg.al.noise_mode,
            )
        chosen = select_topk(pool, scores, k)
    return chosen, scores


def _score_pool_threaded(dataset, params, cfg: ExperimentConfig, pool, seed) -> dict:
    def one(vid):
        sub = score_pool(
            dataset, params, cfg.model, [vid], cfg.al.selector,
            cfg.al.r_variants, cfg.al.t_win, seed, cfg.al.noise_mode,
        )
        return sub[vid]

    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        futures = {vid: ex.submit(one, vid) for vid in sorted(pool)}
        return {vid: fut.result() for vid, fut in futures.items()}


def train_round(
    dataset: VideoDataset, cfg: ExperimentConfig, round_index: int
) -> tuple[TrainResult, MetricsReport]:
    result = train_model(dataset, cfg.model, cfg.ssl, cfg.train, _round_seed(cfg.seed, round_index))
    eval_params = result.teacher if cfg.eval_model == "teacher" else result.student
    metrics = evaluate_params(eval_params, dataset, cfg.model)
    return result, metrics


def run_al_experiment(cfg: ExperimentConfig, resume: bool = False) -> list:
    """Full AL cycle with on-disk logs, checkpoints, and resumable state."""
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    hash_ = config_hash(cfg)
    state_path = out / "state.json"

    state = None
    if resume and state_path.exists():
        with open(state_path, "r", encoding="utf-8") as fh:
            state = json.load(fh)
        if state["config_hash"] != hash_:
            raise DataFormatError(
                f"state.json config hash {state['config_hash']} does not match current config {hash_}"
            )
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")

    dataset = load_or_generate_dataset(cfg)
    logs: list[RoundLog] = []
    if state is not None:
        labeled = [int(v) for v in state["labeled_ids"]]
        logs = [_round_log_from_dict(d) for d in state["rounds"]]
        start_round = len(logs)
    else:
        labeled = initial_labeled_ids(cfg, dataset)
        start_round = 0
    dataset.reset_pools(labeled)

    prev_student: ParamStore | None = None
    if start_round > 0:
        prev_student, _, _ = load_checkpoint(out / f"round_{start_round - 1}" / "student.ckpt")

    for round_index in range(start_round, cfg.al.rounds + 1):
        round_dir = out / f"round_{round_index}"
        round_dir.mkdir(exist_ok=True)
        selected_pairs = []
        if round_index > 0:
            chosen, scores = select_for_round(dataset, cfg, round_index, prev_student)
            for vid in chosen:
                dataset.oracle_annotate(vid)
            selected_pairs = [
                (vid, scores[vid].score if vid in scores else 0.0) for vid in chosen
            ]
            if scores:
                write_score_csv(round_dir / "scores.csv", round_index, scores, chosen, cfg.al.r_variants)

        result, metrics = train_round(dataset, cfg, round_index)
        prev_student = result.student
        save_checkpoint(round_dir / "student.ckpt", result.student, len(result.rows), hash_)
        save_checkpoint(round_dir / "teacher.ckpt", result.teacher, len(result.rows), hash_)
        write_loss_log(round_dir / "loss_log.csv", result.rows)
        if cfg.debug_dump_weights:
            _dump_weight_masks(round_dir, dataset, result.student, cfg)

        log = RoundLog(
            round_index=round_index,
            labeled_fraction=len(dataset.labeled) / len(dataset.train_ids),
            labeled_count=len(dataset.labeled),
            selected=selected_pairs,
            final_losses=result.final_losses,
            metrics=metrics,
        )
        logs.append(log)
        _write_state(state_path, hash_, dataset, logs)
        metrics_csv_emit(logs, out / "metrics.csv")
    return logs


def _round_log_from_dict(d: dict) -> RoundLog:
    m = d["metrics"]
    return RoundLog(
        round_index=d["round_index"],
        labeled_fraction=d["labeled_fraction"],
        labeled_count=d["labeled_count"],
        selected=[(int(v), float(s)) for v, s in d["selected"]],
        final_losses=d["final_losses"],
        metrics=MetricsReport(
            f_map50=m["f_map50"],
            v_map20=m["v_map20"],
            v_map50=m["v_map50"],
            mask_iou=m["mask_iou"],
            per_class_f50={int(k): v for k, v in m.get("per_class_f50", {}).items()},
            per_class_v50={int(k): v for k, v in m.get("per_class_v50", {}).items()},
        ),
    )


def _write_state(path, hash_: str, dataset: VideoDataset, logs: list):
    state = {
        "config_hash": hash_,
        "labeled_ids": sorted(int(v) for v in dataset.labeled),
        "rounds": [log.to_dict() for log in logs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dump_weight_masks(round_dir: Path, dataset, params, cfg: ExperimentConfig):
    from .spectral import hpf_weight_map_stack

    vid = dataset.test_ids[0]
    clips = dataset.sample(vid).frames[None].astype(np.float64)
    det, _ = forward_batch(params, clips, cfg.model)
    weights = hpf_weight_map_stack(det.data[0], cfg.ssl.radius)
    for f in range(weights.shape[0]):
        write_pgm(round_dir / f"weights_{vid}_{f}.pgm", weights[f])


def metrics_csv_emit(logs: list, path):
    """Fixed-column per-round metrics CSV; identical logs emit identical bytes."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for log in logs:
            writer.writerow(
                [
                    log.round_index,
                    f"{log.labeled_fraction:.10g}",
                    f"{log.metrics.f_map50:.10g}",
                    f"{log.metrics.v_map20:.10g}",
                    f"{log.metrics.v_map50:.10g}",
                    f"{log.metrics.mask_iou:.10g}",
                ]
            )


def run_selector_comparison(cfg: ExperimentConfig, selectors, seeds) -> dict:
    """Run the AL cycle for several selectors from a shared round-0 state.

    Round 0 never touches the selector, so each seed's initial training is
    computed once and reused across arms; later rounds run per selector.
    Returns {(selector, seed): [RoundLog, ...]}.
    """
    results = {}
    for seed in seeds:
        base = replace(cfg, seed=int(seed))
        base.validate()
        dataset = load_or_generate_dataset(base)
        labeled0 = initial_labeled_ids(base, dataset)
        dataset.reset_pools(labeled0)
        result0, metrics0 = train_round(dataset, base, 0)
        log0 = RoundLog(
            round_index=0,
            labeled_fraction=len(dataset.labeled) / len(dataset.train_ids),
            labeled_count=len(dataset.labeled),
            selected=[],
            final_losses=result0.final_losses,
            metrics=metrics0,
        )
        for selector in selectors:
            arm = replace(base, al=replace(base.al, selector=selector))
            arm.validate()
            dataset.reset_pools(labeled0)
            logs = [log0]
            prev_student = result0.student
            for round_index in range(1, arm.al.rounds + 1):
                chosen, scores = select_for_round(dataset, arm, round_index, prev_student)
                for vid in chosen:
                    dataset.oracle_annotate(vid)
                result, metrics = train_round(dataset, arm, round_index)
                prev_student = result.student
                logs.append(
                    RoundLog(
                        round_index=round_index,
                        labeled_fraction=len(dataset.labeled) / len(dataset.train_ids),
                        labeled_count=len(dataset.labeled),
                        selected=[(v, scores[v].score if v in scores else 0.0) for v in chosen],
                        final_losses=result.final_losses,
                        metrics=metrics,
                    )
                )
            results[(selector, int(seed))] = logs
    return results


ABLATION_KEYS = ("method", "selector", "fft_source", "radius", "seed")


def run_ablation(cfg: ExperimentConfig, grid: dict, out_path=None) -> list:
    """Cartesian product of grid axes; one experiment per cell, shared base seeds.

    Returns one row dict per cell with the final-round metrics.
    """
    for key in grid:
        if key not in ABLATION_KEYS:
            raise ConfigError(f"unknown ablation grid key '{key}'")
    axes = {k: list(v) for k, v in grid.items()}
    names = sorted(axes.keys())
    rows = []

    def _cells(i, current):
        if i == len(names):
            yield dict(current)
            return
        for v in axes[names[i]]:
            current[names[i]] = v
            yield from _cells(i + 1, current)
        del current[names[i]]

    for cell in _cells(0, {}):
        arm = replace(
            cfg,
            ssl=replace(cfg.ssl),
            train=replace(cfg.train),
            al=replace(cfg.al),
        )
        if "method" in cell:
            arm.train.method = cell["method"]
        if "selector" in cell:
            arm.al.selector = cell["selector"]
        if "fft_source" in cell:
            arm.ssl.fft_source = cell["fft_source"]
        if "radius" in cell:
            arm.ssl.radius = float(cell["radius"])
        if "seed" in cell:
            arm.seed = int(cell["seed"])
        arm.validate()

        dataset = load_or_generate_dataset(arm)
        dataset.reset_pools(initial_labeled_ids(arm, dataset))
        logs = []
        prev_student = None
        for round_index in range(arm.al.rounds + 1):
            selected_pairs = []
            if round_index > 0:
                chosen, scores = select_for_round(dataset, arm, round_index, prev_student)
                for vid in chosen:
                    dataset.oracle_annotate(vid)
                selected_pairs = [(v, scores[v].score if v in scores else 0.0) for v in chosen]
            result, metrics = train_round(dataset, arm, round_index)
            prev_student = result.student
            logs.append(
                RoundLog(
                    round_index=round_index,
                    labeled_fraction=len(dataset.labeled) / len(dataset.train_ids),
                    labeled_count=len(dataset.labeled),
                    selected=selected_pairs,
                    final_losses=result.final_losses,
                    metrics=metrics,
                )
            )
        final = logs[-1]
        row = dict(cell)
        row.update(final.metrics.row())
        row["rounds"] = len(logs) - 1
        rows.append(row)

    if out_path is not None:
        keys = sorted({k for row in rows for k in row})
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(keys)
            for row in rows:
                writer.writerow([_csv_fmt(row.get(k, "")) for k in keys])
    return rows


def _csv_fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return v
