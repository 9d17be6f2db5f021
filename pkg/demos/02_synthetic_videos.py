"""Generate a small synthetic action-detection dataset and inspect it.

Each video is one moving shape (the class is shape x motion) over static
clutter, with exact per-frame masks and boxes. Frames of the first video are
dumped as PGM images next to this script.
"""

from collections import Counter
from pathlib import Path

import numpy as np

from ssal.spectral import write_pgm
from ssal.videogen import GenConfig, gen_dataset

cfg = GenConfig(n_train=48, n_test=12)
ds = gen_dataset(cfg, seed=7)

print(f"classes: {ds.manifest.class_names}")
print(f"train {len(ds.train_ids)} / test {len(ds.test_ids)}, dims {ds.manifest.dims}")

counts = Counter(ds.samples[v].annotation.class_id for v in ds.train_ids)
print("train class counts:", dict(sorted(counts.items())))

sample = ds.samples[0]
ann = sample.annotation
print(f"\nvideo 0: class {ann.class_id} ({ds.manifest.class_names[ann.class_id]})")
print("per-frame boxes:", ann.boxes)
print("mask pixel counts:", ann.masks.sum(axis=(1, 2)).tolist())

out_dir = Path(__file__).parent / "out_video0"
out_dir.mkdir(exist_ok=True)
for t in range(sample.frames.shape[0]):
    write_pgm(out_dir / f"frame_{t}.pgm", sample.frames[t, :, :, 0].astype(float))
    write_pgm(out_dir / f"mask_{t}.pgm", ann.masks[t].astype(float))
print(f"\nwrote frames and masks to {out_dir}/")
