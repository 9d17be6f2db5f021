"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Criteria 4 and 5 are statistical, multi-seed training comparisons and
dominate the runtime (roughly 10 and 25 minutes on two CPU cores); everything
else finishes in seconds to a couple of minutes.
"""

import functools
import time
from dataclasses import replace

import numpy as np
import pytest

from ssal import autograd as ag
from ssal.autograd import Tape, Tensor, backprop
from ssal.experiment import (
    config_from_dict,
    run_al_experiment,
    run_selector_comparison,
)
from ssal.losses import bce_loss, margin_loss
from ssal.metrics import average_precision, report, tube_iou
from ssal.model import (
    DetOutput,
    ModelConfig,
    forward_batch,
    init_params,
    supervised_loss_batch,
    temporal_average,
)
from ssal.selection import informativeness, uncertainty_from_maps
from ssal.spectral import center_dc, fft2d, highpass_apply, hpf_weight_map, ifft2d
from ssal.training import (
    SSLConfig,
    TrainConfig,
    consistency_plain,
    ema_update,
    frame_consistency,
    hpf_consistency,
)
from ssal.videogen import gen_dataset

from conftest import fd_gradient, max_rel_err
from oracles import (
    consistency_loop,
    dft2d_direct,
    frame_consistency_loop,
    pr_curve_ap,
    temporal_average_loop,
    uncertainty_loop,
    variance_two_pass,
    weighted_consistency_pipeline_loop,
)

pytestmark = pytest.mark.acceptance


def criterion(number, name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.time()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\nACCEPTANCE {number} ({name}): FAIL [{time.time() - start:.1f}s]")
                raise
            print(f"\nACCEPTANCE {number} ({name}): PASS [{time.time() - start:.1f}s]")

        return wrapper

    return deco


# ---------------------------------------------------------------- criterion 1


@criterion(1, "oracle equivalence of the math core")
def test_criterion_1_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(101)

    # 2-D transform vs the O(N^4) direct-summation DFT
    for _ in range(5):
        field = rng.standard_normal((8, 8))
        np.testing.assert_allclose(fft2d(field).data, dft2d_direct(field), atol=1e-9)

    for case in range(50):
        maps = rng.uniform(0.02, 0.98, (5, 6, 6))
        # temporal averaging with boundary truncation
        i = int(rng.integers(0, 5))
        win = int(rng.choice([1, 3, 5]))
        np.testing.assert_allclose(
            temporal_average(maps, i, win), temporal_average_loop(maps, i, win), atol=1e-9
        )
        # summed negative-log uncertainty of the averaged maps
        assert abs(uncertainty_from_maps(maps, 3) - uncertainty_loop(maps, 3)) < 1e-9
        # population variance of per-variant uncertainties
        us = list(rng.random(8) * 50)
        assert abs(informativeness(us) - variance_two_pass(us)) < 1e-9
        # plain and weighted per-frame consistency
        s, t = rng.random((3, 6, 6)), rng.random((3, 6, 6))
        assert abs(consistency_plain(Tensor(s), t).item() - consistency_loop(s, t)) < 1e-9
        w = rng.random((6, 6))
        assert (
            abs(frame_consistency(Tensor(s[0]), t[0], w).item() - frame_consistency_loop(s[0], t[0], w))
            < 1e-9
        )

    # full weighted-consistency pipeline (filter, weights, frame consistency,
    # loss combination), with and without temporal averaging
    for case in range(50):
        s, t = rng.uniform(0.05, 0.95, (2, 8, 8)), rng.uniform(0.05, 0.95, (2, 8, 8))
        t_win = 3 if case % 2 == 0 else None
        cfg = SSLConfig(fft_source="both", temporal_consistency=t_win is not None, radius=0.2, t_win=3)
        got = hpf_consistency(Tensor(s), t, cfg).item()
        expected = weighted_consistency_pipeline_loop(s, t, 0.5, 0.5, 0.2, t_win=t_win)
        assert abs(got - expected) < 1e-9, case

    assert time.time() - start < 60.0, "criterion 1 exceeded its 1-minute budget"


# ---------------------------------------------------------------- criterion 2


def _fd_cases_elementwise(rng):
    return {
        "add": lambda t: ag.add(t[0], t[1]),
        "sub": lambda t: ag.sub(t[0], t[1]),
        "mul": lambda t: ag.mul(t[0], t[1]),
        "neg": lambda t: ag.neg(t[0]),
        "square": lambda t: ag.square(t[0]),
        "log": lambda t: ag.log(ag.add(ag.square(t[0]), 0.5)),
        "clamp": lambda t: ag.clamp(t[0], -0.45, 0.45),
        "relu": lambda t: ag.relu(t[0]),
        "sigmoid": lambda t: ag.sigmoid(t[0]),
        "reduce_mean": lambda t: ag.reduce(t[0], "mean"),
        "reshape": lambda t: ag.reshape(t[0], (6, 2)),
        "transpose": lambda t: ag.transpose(t[0], (1, 0)),
    }


@criterion(2, "finite-difference gradient suite")
def test_criterion_2_gradients():
    start = time.time()
    rng = np.random.default_rng(202)

    for name, build in _fd_cases_elementwise(rng).items():
        for _ in range(20):
            base = rng.uniform(0.2, 1.2, (3, 4)) * rng.choice([-1.0, 1.0], (3, 4))
            tensors = [Tensor(base, requires_grad=True), Tensor(rng.standard_normal((3, 4)), requires_grad=True)]

            def fn():
                return ag.reduce(ag.square(build(tensors)), "sum")

            with Tape() as tape:
                loss = fn()
            backprop(loss, tape)
            numeric = fd_gradient(fn, [tensors[0]])[0]
            assert max_rel_err(tensors[0].grad, numeric) < 1e-4, name

    # structured ops
    for _ in range(20):
        x = Tensor(rng.standard_normal((1, 2, 4, 4, 2)), requires_grad=True)
        k = Tensor(rng.standard_normal((2, 3, 3, 2, 2)) * 0.4, requires_grad=True)
        b = Tensor(rng.standard_normal(2), requires_grad=True)

        def fn():
            h = ag.bias_add(ag.conv3d_cl(x, k, (1, 2, 2), (1, 1, 1)), b)
            return ag.reduce(ag.square(ag.upsample2x(h)), "mean")

        with Tape() as tape:
            loss = fn()
        backprop(loss, tape)
        for p, g in zip((x, k, b), fd_gradient(fn, [x, k, b])):
            assert max_rel_err(p.grad, g) < 1e-4

    for _ in range(20):
        m = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        ts = Tensor(rng.random((5, 2, 2)), requires_grad=True)
        nr = Tensor(rng.standard_normal((6, 3)), requires_grad=True)
        gm = Tensor(rng.standard_normal((2, 3, 2, 2)), requires_grad=True)

        def fn():
            parts = [
                ag.reduce(ag.square(ag.matmul(m, w)), "sum"),
                ag.reduce(ag.square(ag.temporal_smooth(ts, 3)), "sum"),
                ag.reduce(ag.square(ag.narrow(nr, 0, 1, 4)), "sum"),
                ag.reduce(ag.square(ag.global_max_pool(gm)), "sum"),
            ]
            total = parts[0]
            for p in parts[1:]:
                total = ag.add(total, p)
            return total

        with Tape() as tape:
            loss = fn()
        backprop(loss, tape)
        for p, g in zip((m, w, ts, nr, gm), fd_gradient(fn, [m, w, ts, nr, gm])):
            assert max_rel_err(p.grad, g) < 1e-4

    # composite supervised loss (detection BCE + margin) through the model
    small = ModelConfig(num_classes=2, enc_channels=(2, 3), mid_channels=3, dec_channels=(2, 2), cls_hidden=4)
    for case in range(20):
        params = init_params(small, case)
        for _, p in params.items():
            p.data += rng.standard_normal(p.data.shape) * 0.05  # off the relu kinks
        clip = rng.random((1, 3, 8, 8, 1))
        masks = (rng.random((1, 3, 8, 8)) > 0.5).astype(float)

        def fn():
            det, cls = forward_batch(params, clip, small)
            l_det, l_cls = supervised_loss_batch(det, cls, masks, [case % 2], 2)
            return ag.add(l_det, l_cls)

        with Tape() as tape:
            loss = fn()
        backprop(loss, tape)
        names = list(params.names())
        probe = [names[case % len(names)], "det.b", "cls.w2"]
        for name in probe:
            p = params[name]
            numeric = fd_gradient(fn, [p])[0]
            assert max_rel_err(p.grad, numeric) < 1e-4, name

    # weighted consistency: teacher-source weights are independent of the
    # student maps, so the full path is finite-difference checkable
    for _ in range(20):
        s = Tensor(rng.uniform(0.1, 0.9, (2, 8, 8)), requires_grad=True)
        t = rng.uniform(0.1, 0.9, (2, 8, 8))
        cfg = SSLConfig(fft_source="teacher", temporal_consistency=True, t_win=3)

        def fn():
            return hpf_consistency(s, t, cfg)

        with Tape() as tape:
            loss = fn()
        backprop(loss, tape)
        numeric = fd_gradient(fn, [s])[0]
        assert max_rel_err(s.grad, numeric) < 1e-4

    assert time.time() - start < 120.0, "criterion 2 exceeded its 2-minute budget"


# ---------------------------------------------------------------- criterion 3


@criterion(3, "algebraic identities")
def test_criterion_3_identities():
    rng = np.random.default_rng(303)

    # frame consistency is linear in the weight mask
    for _ in range(20):
        fs, ft = rng.random((6, 6)), rng.random((6, 6))
        w1, w2 = rng.random((6, 6)), rng.random((6, 6))
        a, b = float(rng.random() * 3), float(rng.random() * 3)
        lhs = frame_consistency(Tensor(fs), ft, a * w1 + b * w2).item()
        rhs = a * frame_consistency(Tensor(fs), ft, w1).item() + b * frame_consistency(Tensor(fs), ft, w2).item()
        assert abs(lhs - rhs) < 1e-9

    # dual-filter combination at lambda1 = lambda2 = 0.5 equals the mean filter
    for _ in range(10):
        s, t = rng.random((3, 16, 16)), rng.random((3, 16, 16))
        both = hpf_consistency(Tensor(s), t, SSLConfig(fft_source="both", temporal_consistency=False)).item()
        mean = hpf_consistency(Tensor(s), t, SSLConfig(fft_source="mean", temporal_consistency=False)).item()
        assert abs(both - mean) < 1e-9

    # EMA geometric contraction: after k updates toward a fixed student the
    # teacher-student gap shrinks by alpha^k exactly
    cfg = ModelConfig(num_classes=2, enc_channels=(2, 2), mid_channels=2, dec_channels=(2, 2), cls_hidden=3)
    student = init_params(cfg, 0)
    teacher = student.clone(role="teacher", requires_grad=False)
    for _, p in student.items():
        p.data += rng.standard_normal(p.data.shape)
    alpha = 0.93
    gap0 = {n: teacher[n].data - student[n].data for n in teacher.names()}
    for k in range(1, 10):
        ema_update(teacher, student, alpha)
        for n in teacher.names():
            np.testing.assert_allclose(
                teacher[n].data, student[n].data + (alpha**k) * gap0[n], atol=1e-12
            )

    # high-pass output has (numerically) zero spatial mean for any radius
    for r in (0.0, 0.1, 0.4, 1.0):
        field = rng.random((16, 16))
        rec = ifft2d(highpass_apply(center_dc(fft2d(field)), r))
        assert abs(rec.mean()) <= 1e-9


# ---------------------------------------------------------------- criterion 6


@criterion(6, "edge concentration of the weight masks")
def test_criterion_6_weight_map_sanity():
    field = np.full((32, 32), 0.1)
    field[12:20, 12:20] = 0.9
    w = hpf_weight_map(field, 0.1)
    thresh = np.quantile(w, 0.9)
    ys, xs = np.where(w >= thresh)
    boundary = [
        (y, x)
        for y in range(12, 20)
        for x in range(12, 20)
        if y in (12, 19) or x in (12, 19)
    ]
    boundary = np.array(boundary)
    dists = np.sqrt(
        (ys[:, None] - boundary[None, :, 0]) ** 2 + (xs[:, None] - boundary[None, :, 1]) ** 2
    ).min(axis=1)
    assert (dists <= 2.0).mean() >= 0.9

    flat = hpf_weight_map(np.full((32, 32), 0.42), 0.1)
    assert np.array_equal(flat, np.ones((32, 32)))


# ---------------------------------------------------------------- criterion 7


@criterion(7, "metrics fixtures")
def test_criterion_7_metrics_correctness():
    # brute-force PR oracle on the handcrafted 5-detection / 3-GT case
    confs = [0.9, 0.8, 0.7, 0.6, 0.5]
    flags = [True, False, True, True, False]
    dets = [(c, 1.0 if f else 0.0, i) for i, (c, f) in enumerate(zip(confs, flags))]
    got = average_precision(dets, 3, 0.5).ap
    assert abs(got - pr_curve_ap(flags, 3)) < 1e-9

    # tube IoU: identical boxes on 6 of 8 ground-truth frames
    gt = [(2, 2, 6, 6)] * 8
    pred = [(2, 2, 6, 6)] * 6 + [None, None]
    assert abs(tube_iou(pred, gt) - 0.75) < 1e-9

    # perfect predictions score 1.0 on every reported metric
    from ssal.videogen import GenConfig

    ds = gen_dataset(
        GenConfig(n_train=6, n_test=6, height=16, width=16, t_frames=4,
                  shapes=("square", "circle"), motions=("linear",)),
        seed=3,
    )
    outputs, annotations = {}, {}
    for vid in ds.test_ids:
        s = ds.samples[vid]
        scores = np.full(2, 0.1)
        scores[s.annotation.class_id] = 0.9
        outputs[vid] = DetOutput(
            det_map=np.clip(s.annotation.masks.astype(float), 0.02, 0.98),
            class_scores=scores,
        )
        annotations[vid] = s.annotation
    rep = report(outputs, annotations, 2)
    assert rep.f_map50 == 1.0 and rep.v_map20 == 1.0 and rep.v_map50 == 1.0 and rep.mask_iou == 1.0


# --------------------------------------------------------- criteria 8 and 9


def _tiny_al_config(out_dir, seed=5):
    return config_from_dict(
        {
            "data": {
                "n_train": 24, "n_test": 8, "height": 16, "width": 16, "t_frames": 4,
                "shapes": ["square", "circle"], "motions": ["linear"],
            },
            "model": {"num_classes": 2, "enc_channels": [4, 6], "mid_channels": 6,
                       "dec_channels": [3, 3], "cls_hidden": 8},
            "train": {"epochs": 2, "min_steps": 0},
            "al": {"initial_fraction": 0.25, "increment": 0.125, "rounds": 2, "r_variants": 4},
            "seed": seed,
            "out_dir": str(out_dir),
        }
    )


@criterion(8, "determinism and persistence")
def test_criterion_8_determinism(tmp_path):
    import json

    cfg1 = _tiny_al_config(tmp_path / "a")
    cfg2 = _tiny_al_config(tmp_path / "b")
    logs1 = run_al_experiment(cfg1)
    run_al_experiment(cfg2)
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()

    # interrupt after round 1 and resume; metrics must match bitwise
    cfg3 = _tiny_al_config(tmp_path / "c")
    run_al_experiment(cfg3)
    state_path = tmp_path / "c" / "state.json"
    state = json.loads(state_path.read_text())
    round2_picks = {vid for vid, _ in logs1[2].selected}
    state["rounds"] = state["rounds"][:2]
    state["labeled_ids"] = sorted(set(state["labeled_ids"]) - round2_picks)
    state_path.write_text(json.dumps(state))
    resumed = run_al_experiment(cfg3, resume=True)
    for a, b in zip(logs1, resumed):
        assert a.metrics == b.metrics

    # checkpoint save/load round-trips parameters bitwise
    from ssal.model import load_checkpoint, save_checkpoint

    params = init_params(ModelConfig(num_classes=2, enc_channels=(4, 6), mid_channels=6,
                                     dec_channels=(3, 3), cls_hidden=8), 7)
    path = tmp_path / "roundtrip.ckpt"
    save_checkpoint(path, params, 3, "h")
    loaded, _, _ = load_checkpoint(path)
    for name in params.names():
        assert np.array_equal(loaded[name].data, params[name].data)


@criterion(9, "budget and pool invariants")
def test_criterion_9_pool_invariants(tmp_path):
    cfg = _tiny_al_config(tmp_path / "pools", seed=11)
    logs = run_al_experiment(cfg)
    n_train = 24
    k0, k = round(0.25 * n_train), round(0.125 * n_train)
    assert [log.labeled_count for log in logs] == [k0, k0 + k, k0 + 2 * k]
    test_ids = set(range(24, 32))
    picked = [vid for log in logs for vid, _ in log.selected]
    assert len(picked) == len(set(picked)), "a video was annotated twice"
    assert not (set(picked) & test_ids), "test split leaked into selection"
    fractions = [log.labeled_fraction for log in logs]
    assert all(b > a for a, b in zip(fractions, fractions[1:]))
