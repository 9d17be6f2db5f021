"""A miniature end-to-end active-learning experiment.

Round 0 trains on a 25% seed pool with semi-supervised losses; each later
round scores the unlabeled pool with the trained student, asks the oracle to
annotate the top picks, retrains from scratch, and evaluates. Results land
in demos/out_al_run/ (metrics.csv, per-round checkpoints, score dumps).
"""

from pathlib import Path

from ssal.experiment import ExperimentConfig, config_from_dict, run_al_experiment

out_dir = Path(__file__).parent / "out_al_run"
cfg = config_from_dict(
    {
        "data": {"n_train": 40, "n_test": 12},
        "train": {"min_steps": 120},
        "al": {"initial_fraction": 0.25, "increment": 0.125, "rounds": 2},
        "seed": 5,
        "out_dir": str(out_dir),
    }
)

logs = run_al_experiment(cfg)

print(f"{'round':>5} {'labeled':>8} {'f-mAP@.5':>9} {'v-mAP@.2':>9} {'mask IoU':>9}  picked")
for log in logs:
    picked = [vid for vid, _ in log.selected]
    print(
        f"{log.round_index:5d} {log.labeled_count:8d} {log.metrics.f_map50:9.3f} "
        f"{log.metrics.v_map20:9.3f} {log.metrics.mask_iou:9.3f}  {picked}"
    )
print(f"\nartifacts in {out_dir}/")
