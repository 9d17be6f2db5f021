"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 data-format error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, SsalError
from .experiment import (
    ExperimentConfig,
    config_load_validate,
    config_hash,
    evaluate_params,
    initial_labeled_ids,
    metrics_csv_emit,
    run_ablation,
    run_al_experiment,
    train_round,
)
from .model import load_checkpoint, save_checkpoint
from .selection import score_pool, select_topk, baseline_select, write_score_csv
from .training import write_loss_log
from .videogen import gen_dataset, read_dataset, write_dataset


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssal", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="worker threads for scoring")
    parser.add_argument(
        "--strict-determinism",
        action="store_true",
        help="force single-threaded scoring for bitwise reproducibility",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train once on a dataset's initial labeled pool")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("select", help="rank unlabeled samples with a trained model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--selector", default="noiseaug")
    p.add_argument("--config", default=None, help="optional config for scoring parameters")
    p.add_argument("--scores-csv", default=None)

    p = sub.add_parser("al-run", help="run the full active-learning experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)

    p = sub.add_parser("ablate", help="run an ablation grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True, help="JSON file or inline JSON with grid axes")
    p.add_argument("--out", default=None, help="comparison CSV path")
    return parser


def _load_config(path, args) -> ExperimentConfig:
    cfg = config_load_validate(path)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.strict_determinism:
        cfg.threads = 1
    return cfg.validate()


def _cmd_gen_data(args) -> int:
    cfg = _load_config(args.config, args)
    ds = gen_dataset(cfg.data, cfg.seed)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds.samples)} videos to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args.config, args)
    ds = read_dataset(args.data)
    ds.reset_pools(initial_labeled_ids(cfg, ds))
    result, metrics = train_round(ds, cfg, 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hash_ = config_hash(cfg)
    save_checkpoint(out / "student.ckpt", result.student, len(result.rows), hash_)
    save_checkpoint(out / "teacher.ckpt", result.teacher, len(result.rows), hash_)
    write_loss_log(out / "loss_log.csv", result.rows)
    print(
        f"trained on {len(ds.labeled)} labeled / {len(ds.unlabeled)} unlabeled videos; "
        f"f-mAP@0.5 {metrics.f_map50:.4f}"
    )
    return 0


def _cmd_select(args) -> int:
    cfg = _load_config(args.config, args) if args.config else ExperimentConfig().validate()
    params, _, _ = load_checkpoint(args.checkpoint)
    ds = read_dataset(args.data)
    pool = sorted(ds.unlabeled)
    if args.selector == "random":
        chosen = baseline_select(pool, args.k, "random", cfg.seed)
        scores = {}
    else:
        scores = score_pool(
            ds, params, cfg.model, pool, args.selector,
            cfg.al.r_variants, cfg.al.t_win, cfg.seed, cfg.al.noise_mode,
        )
        chosen = select_topk(pool, scores, args.k)
    if args.scores_csv and scores:
        write_score_csv(args.scores_csv, 0, scores, chosen, cfg.al.r_variants)
    for vid in chosen:
        print(vid)
    return 0


def _cmd_al_run(args) -> int:
    cfg = _load_config(args.config, args)
    logs = run_al_experiment(cfg, resume=args.resume)
    final = logs[-1]
    print(
        f"completed {len(logs)} rounds; final labeled fraction "
        f"{final.labeled_fraction:.2f}, f-mAP@0.5 {final.metrics.f_map50:.4f}"
    )
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args.config, args) if args.config else ExperimentConfig().validate()
    params, _, _ = load_checkpoint(args.checkpoint)
    ds = read_dataset(args.data)
    metrics = evaluate_params(params, ds, cfg.model)
    print(f"f_map50 {metrics.f_map50:.6f}")
    print(f"v_map20 {metrics.v_map20:.6f}")
    print(f"v_map50 {metrics.v_map50:.6f}")
    print(f"mask_iou {metrics.mask_iou:.6f}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_config(args.config, args)
    grid_arg = args.grid
    if Path(grid_arg).exists():
        with open(grid_arg, "r", encoding="utf-8") as fh:
            grid = json.load(fh)
    else:
        try:
            grid = json.loads(grid_arg)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--grid is neither a file nor valid JSON: {exc}") from exc
    out = args.out or (Path(cfg.out_dir) / "ablation.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    rows = run_ablation(cfg, grid, out)
    print(f"wrote {len(rows)} ablation rows to {out}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "select": _cmd_select,
    "al-run": _cmd_al_run,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return 3
    except (SsalError, OSError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
