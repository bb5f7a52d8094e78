"""Acceptance suite: one test per criterion, one pass/fail line each."""

import json
import math
import time

import numpy as np
import pytest
import torch

from siamtrack.data import CropSpec, sample_pair
from siamtrack.evaluate import SUCCESS_THRESHOLDS, run_benchmark, success_auc
from siamtrack.geometry import Box, GridSpec, decode_box, encode_targets, iou
from siamtrack.heads import xcorr_depthwise
from siamtrack.labels import assign_circle, assign_ellipse, assign_rectangle
from siamtrack.loss import iou_loss
from siamtrack.model import (BackboneConfig, SiamTrackNet, canonical_grid,
                             load_checkpoint)
from siamtrack.synthetic import (MotionSpec, make_synthetic_dataset,
                                 make_synthetic_sequence)
from siamtrack.track import track_sequence
from siamtrack.train import TrainConfig, Trainer, lr_at, train

from test_labels import (brute_force_circle, brute_force_ellipse,
                         brute_force_rectangle, random_centered_box)
from test_model import xcorr_oracle

GRID = canonical_grid()


def report(n, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {n}: {status} {detail}")
    assert ok, f"criterion {n} failed: {detail}"


def test_criterion_1_label_oracle_equivalence():
    rng = np.random.default_rng(1)
    start = time.time()
    mismatches = 0
    for _ in range(200):
        gt = random_centered_box(rng)
        for fast, slow in ((assign_ellipse, brute_force_ellipse),
                           (assign_circle, brute_force_circle),
                           (assign_rectangle, brute_force_rectangle)):
            if not np.array_equal(fast(gt, GRID), slow(gt, GRID)):
                mismatches += 1
    elapsed = time.time() - start
    report(1, mismatches == 0 and elapsed < 5.0,
           f"(0 mismatches required, got {mismatches}; {elapsed:.1f}s < 5s)")


def test_criterion_2_correlation_oracle():
    torch.manual_seed(2)
    rng = np.random.default_rng(2)
    start = time.time()
    worst = 0.0
    for _ in range(200):
        s = int(rng.integers(4, 32))
        k = int(rng.integers(1, min(7, s) + 1))
        c = int(rng.integers(1, 9))
        x = torch.rand(1, c, s, s)
        kern = torch.rand(1, c, k, k)
        out = xcorr_depthwise(x, kern).numpy()
        ref = xcorr_oracle(x, kern)
        rel = np.abs(out - ref).max() / max(np.abs(ref).max(), 1e-12)
        worst = max(worst, rel)
    elapsed = time.time() - start
    report(2, worst < 1e-5 and elapsed < 30.0,
           f"(max relative error {worst:.2e} < 1e-5; {elapsed:.1f}s < 30s)")


def test_criterion_3_shape_contract():
    torch.manual_seed(3)
    model = SiamTrackNet(BackboneConfig(variant="tiny"))
    model.eval()
    z, x = torch.rand(1, 3, 127, 127), torch.rand(1, 3, 255, 255)
    ok = True
    with torch.no_grad():
        tf = model.extract_features(z, "template")
        sf = model.extract_features(x, "search")
        for level in model.cfg.levels:
            cls, reg = model.head_forward(tf, sf, level)
            ok &= cls.shape == (1, 2, 25, 25)
            ok &= reg.shape == (1, 4, 25, 25)
            ok &= float(reg.min()) > 0
        cls, reg = model(z, x)
    ok &= cls.shape == (1, 2, 25, 25) and reg.shape == (1, 4, 25, 25)
    ok &= float(reg.min()) > 0
    report(3, ok, "(cls 25x25x2, reg 25x25x4 per level and fused; reg > 0)")


def test_criterion_4_encode_decode_round_trip():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        x1, y1 = rng.uniform(0, 200, 2)
        w, h = rng.uniform(2, 100, 2)
        b = Box(x1, y1, x1 + w, y1 + h)
        p = (rng.uniform(b.x1 + 1e-3, b.x2 - 1e-3),
             rng.uniform(b.y1 + 1e-3, b.y2 - 1e-3))
        back = decode_box(p, encode_targets(p, b))
        worst = max(worst, abs(back.x1 - b.x1), abs(back.y1 - b.y1),
                    abs(back.x2 - b.x2), abs(back.y2 - b.y2))
    report(4, worst < 1e-6, f"(max round-trip error {worst:.2e} < 1e-6)")


def test_criterion_5_iou_loss_gradient_check():
    rng = np.random.default_rng(5)
    start = time.time()
    step = 1e-4
    center_cell = 12 * 25 + 12
    worst = 0.0
    for _ in range(100):
        w, h = rng.uniform(30, 120, size=2)
        gt = Box.from_cxywh(127 + rng.uniform(-10, 10),
                            127 + rng.uniform(-10, 10), w, h)
        d0 = rng.uniform(8, 60, size=4)

        def loss_at(dvals):
            reg = torch.ones(4, 25, 25, dtype=torch.float64)
            for k in range(4):
                reg[k, 12, 12] = dvals[k]
            return float(iou_loss(reg, gt, [center_cell], GRID))

        d = torch.tensor(d0, requires_grad=True)
        reg = torch.ones(4, 25, 25, dtype=torch.float64)
        reg = reg.index_put(
            (torch.arange(4), torch.full((4,), 12), torch.full((4,), 12)), d)
        iou_loss(reg, gt, [center_cell], GRID).backward()
        for k in range(4):
            dp, dm = d0.copy(), d0.copy()
            dp[k] += step
            dm[k] -= step
            fd = (loss_at(dp) - loss_at(dm)) / (2 * step)
            rel = abs(float(d.grad[k]) - fd) / max(abs(fd), 1e-6)
            worst = max(worst, rel)
    elapsed = time.time() - start
    report(5, worst < 1e-3 and elapsed < 10.0,
           f"(max relative gradient error {worst:.2e} < 1e-3; "
           f"{elapsed:.1f}s < 10s)")


def test_criterion_6_overfit_one_pair():
    start = time.time()
    torch.set_num_threads(1)
    torch.manual_seed(6)
    rng = np.random.default_rng(6)
    dataset = make_synthetic_dataset(1, 4, rng=rng)
    pair = sample_pair(dataset, rng, CropSpec(max_shift=8.0))
    model = SiamTrackNet(BackboneConfig(variant="tiny"))
    cfg = TrainConfig(batch_size=1, epochs=1, steps_per_epoch=500, seed=6)
    trainer = Trainer(model, cfg)
    losses = []
    for _ in range(500):
        rep = trainer.train_step([pair], rng)
        losses.append(rep.total)
        if rep.total < 0.05:
            break
    elapsed = time.time() - start
    reached = min(losses) < 0.05
    window_means = [float(np.mean(losses[i:i + 50]))
                    for i in range(0, len(losses) - 49, 50)]
    decreasing = all(b < a + 0.005
                     for a, b in zip(window_means, window_means[1:]))
    report(6, reached and decreasing and elapsed < 300,
           f"(loss {min(losses):.4f} < 0.05 after {len(losses)} steps; "
           f"50-step means {['%.3f' % m for m in window_means]}; "
           f"{elapsed:.0f}s < 300s)")


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    """Shared desk-scale training run for criteria 7."""
    start = time.time()
    rng = np.random.default_rng(100)
    dataset = make_synthetic_dataset(12, 40, rng=rng)
    cfg = TrainConfig(batch_size=4, epochs=2, steps_per_epoch=1000, seed=0,
                      checkpoint_dir=str(tmp_path_factory.mktemp("desk")))
    train_report = train(dataset, cfg, model_cfg=BackboneConfig(variant="tiny"))
    model, _ = load_checkpoint(train_report.checkpoint_path)
    return model, time.time() - start


def test_criterion_7_end_to_end_synthetic_tracking(desk_run):
    model, train_time = desk_run
    start = time.time()
    spec = MotionSpec(max_step=8.0, size_drift=0.02)
    held_out = make_synthetic_sequence(100, spec, np.random.default_rng(999))
    boxes, _ = track_sequence(model, held_out)
    ious = [iou(b, g) for b, g in zip(boxes, held_out.boxes)]
    total_time = train_time + time.time() - start
    mean_iou = float(np.mean(ious))
    min_iou = float(np.min(ious))
    report(7, mean_iou >= 0.6 and min_iou >= 0.3 and total_time < 600,
           f"(mean IoU {mean_iou:.3f} >= 0.6, min IoU {min_iou:.3f} >= 0.3; "
           f"{total_time:.0f}s < 600s)")


def test_criterion_8_metric_correctness():
    gt = [Box(0, 0, 10, 10), Box(0, 0, 10, 10)]
    pred = [Box(0, 0, 10, 10), Box(0, 0, 10, 5)]  # IoUs {1.0, 0.5}
    res = success_auc(pred, gt)
    idx45 = int(np.argmin(np.abs(SUCCESS_THRESHOLDS - 0.45)))
    idx55 = int(np.argmin(np.abs(SUCCESS_THRESHOLDS - 0.55)))
    ok = abs(res.success_curve[idx45] - 1.0) < 1e-6
    ok &= abs(res.success_curve[idx55] - 0.5) < 1e-6
    ok &= abs(res.auc - float(res.success_curve.mean())) < 1e-6
    oracle = success_auc(gt, gt)
    ok &= abs(oracle.auc - 1.0) < 1e-6
    report(8, ok, f"(success(0.45)={res.success_curve[idx45]:.2f}, "
                  f"success(0.55)={res.success_curve[idx55]:.2f}, "
                  f"oracle AUC={oracle.auc:.3f})")


def test_criterion_9_train_eval_determinism(tmp_path):
    payloads = []
    for run in range(2):
        rng = np.random.default_rng(9)
        dataset = make_synthetic_dataset(2, 6, rng=rng)
        cfg = TrainConfig(batch_size=2, epochs=2, steps_per_epoch=3, seed=9,
                          checkpoint_dir=str(tmp_path / f"run{run}"))
        small = BackboneConfig(variant="tiny", reduced_channels=16,
                               tiny_width=16)
        train_report = train(dataset, cfg, model_cfg=small)
        model, _ = load_checkpoint(train_report.checkpoint_path)
        eval_set = make_synthetic_dataset(2, 6, rng=np.random.default_rng(19))
        out_dir = tmp_path / f"eval{run}"
        run_benchmark(model, eval_set, output_dir=out_dir)
        payloads.append((out_dir / "results.json").read_bytes())
    report(9, payloads[0] == payloads[1],
           "(two seeded train+eval runs, byte-identical results.json)")


def test_criterion_10_lr_schedule():
    cfg = TrainConfig(epochs=20, steps_per_epoch=100, warmup_frac=0.25)
    warmup = round(cfg.warmup_frac * cfg.total_steps)
    ok = abs(lr_at(0, cfg) - 0.001) < 1e-12
    ok &= abs(lr_at(warmup - 1, cfg) - 0.005) < 1e-12
    ok &= abs(lr_at(cfg.total_steps - 1, cfg) - 0.00005) < 1e-9
    report(10, ok, f"(lr(0)={lr_at(0, cfg)}, "
                   f"lr(warmup_end)={lr_at(warmup - 1, cfg)}, "
                   f"lr(final)={lr_at(cfg.total_steps - 1, cfg):.6f})")
