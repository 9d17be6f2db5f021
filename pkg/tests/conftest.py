import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ssal.model import ModelConfig
from ssal.videogen import GenConfig, gen_dataset


@pytest.fixture(scope="session")
def tiny_gen_cfg():
    """Small, fast dataset config used by most integration tests."""
    return GenConfig(
        n_train=24,
        n_test=12,
        height=16,
        width=16,
        t_frames=4,
        shapes=("square", "circle"),
        motions=("linear",),
    )


@pytest.fixture(scope="session")
def tiny_model_cfg(tiny_gen_cfg):
    return ModelConfig(
        num_classes=tiny_gen_cfg.num_classes,
        enc_channels=(4, 6),
        mid_channels=6,
        dec_channels=(3, 3),
        cls_hidden=8,
    )


@pytest.fixture(scope="session")
def tiny_dataset(tiny_gen_cfg):
    return gen_dataset(tiny_gen_cfg, 7)


def fd_gradient(fn, tensors, h=1e-5):
    """Central finite differences of fn() wrt every element of the tensors."""
    grads = []
    for p in tensors:
        flat = p.data.reshape(-1)
        g = np.zeros_like(flat)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = fn().item()
            flat[i] = old - h
            lm = fn().item()
            flat[i] = old
            g[i] = (lp - lm) / (2 * h)
        grads.append(g.reshape(p.data.shape))
    return grads


def max_rel_err(analytic, numeric):
    analytic = np.asarray(analytic).reshape(-1)
    numeric = np.asarray(numeric).reshape(-1)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))
