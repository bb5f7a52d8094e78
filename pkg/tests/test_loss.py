import math

import numpy as np
import pytest
import torch

from siamtrack.geometry import Box, GridSpec
from siamtrack.labels import (SampleSelection, assign_ellipse,
                              sample_training_points)
from siamtrack.loss import (LossConfig, classification_loss, iou_loss,
                            total_loss)

SPEC = GridSpec(w=25, h=25, s=8, im_w=255, im_h=255)
CENTER_CELL = 12 * 25 + 12  # maps to (127, 127)


def make_selection(pos, neg):
    return SampleSelection(pos=np.array(pos, dtype=np.int64),
                           neg=np.array(neg, dtype=np.int64))


class TestClassificationLoss:
    def test_uniform_logits_ln2(self):
        cls = torch.zeros(2, 25, 25)
        sel = make_selection([CENTER_CELL], [0, 1, 2])
        loss = classification_loss(cls, None, sel)
        assert abs(float(loss) - math.log(2)) < 1e-6

    def test_single_positive_hand_value(self):
        cls = torch.zeros(2, 25, 25)
        cls[1].view(-1)[CENTER_CELL] = math.log(3)
        sel = make_selection([CENTER_CELL], [])
        loss = classification_loss(cls, None, sel)
        assert abs(float(loss) - math.log(4 / 3)) < 1e-6

    def test_saturated_correct_prediction(self):
        cls = torch.zeros(2, 25, 25)
        cls[1].view(-1)[CENTER_CELL] = 50.0
        cls[0].view(-1)[0] = 50.0
        sel = make_selection([CENTER_CELL], [0])
        assert float(classification_loss(cls, None, sel)) < 1e-6

    def test_empty_selection_rejected(self):
        with pytest.raises(ValueError):
            classification_loss(torch.zeros(2, 25, 25), None,
                                make_selection([], []))

    def test_order_invariance(self):
        torch.manual_seed(0)
        cls = torch.randn(2, 25, 25)
        a = classification_loss(cls, None, make_selection([5, 9], [1, 2, 3]))
        b = classification_loss(cls, None, make_selection([9, 5], [3, 1, 2]))
        assert abs(float(a) - float(b)) < 1e-6


def reg_map_with(cell, d):
    reg = torch.full((4, 25, 25), 1.0)
    for k in range(4):
        reg[k].view(-1)[cell] = d[k]
    return reg


class TestIoULoss:
    def test_perfect_regression_zero_loss(self):
        gt = Box(95, 111, 159, 143)
        reg = reg_map_with(CENTER_CELL, (32, 16, 32, 16))
        loss = iou_loss(reg, gt, [CENTER_CELL], SPEC)
        assert abs(float(loss)) < 1e-6

    def test_one_seventh_overlap(self):
        # predicted (126,126,128,128) vs gt (125,125,127.5,127.5) scaled to
        # the classic 1/7 configuration: use unit boxes around the center
        gt = Box(126, 126, 128, 128)
        reg = reg_map_with(CENTER_CELL, (0.0001, 0.0001, 2, 2))
        # prediction ~ (127,127,129,129): intersection 1x1, union 7
        pred = Box(127 - 0.0001, 127 - 0.0001, 129, 129)
        from siamtrack.geometry import iou
        expected = 1 - iou(pred, gt)
        loss = iou_loss(reg, gt, [CENTER_CELL], SPEC)
        assert abs(float(loss) - expected) < 1e-3
        assert abs(expected - 6 / 7) < 1e-3

    def test_bounded_below_one_for_interior_points(self):
        rng = np.random.default_rng(1)
        gt = Box(95, 111, 159, 143)
        for _ in range(50):
            d = rng.uniform(0.5, 60, size=4)
            reg = reg_map_with(CENTER_CELL, d)
            loss = float(iou_loss(reg, gt, [CENTER_CELL], SPEC))
            assert 0.0 <= loss < 1.0

    def test_empty_positives_rejected(self):
        with pytest.raises(ValueError):
            iou_loss(torch.ones(4, 25, 25), Box(95, 111, 159, 143), [], SPEC)

    def test_order_invariance(self):
        gt = Box(80, 80, 180, 180)
        reg = torch.rand(4, 25, 25) * 30 + 5
        cells = [CENTER_CELL, CENTER_CELL + 1, CENTER_CELL + 25]
        a = float(iou_loss(reg, gt, cells, SPEC))
        b = float(iou_loss(reg, gt, cells[::-1], SPEC))
        assert abs(a - b) < 1e-6

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        step = 1e-4
        for _ in range(100):
            w, h = rng.uniform(30, 120, size=2)
            gt = Box.from_cxywh(127 + rng.uniform(-10, 10),
                                127 + rng.uniform(-10, 10), w, h)
            d0 = rng.uniform(8, 60, size=4)
            d = torch.tensor(d0, dtype=torch.float64, requires_grad=True)
            reg = torch.ones(4, 25, 25, dtype=torch.float64)
            reg = reg.index_put(
                (torch.arange(4), torch.full((4,), 12), torch.full((4,), 12)), d)
            loss = iou_loss(reg, gt, [CENTER_CELL], SPEC)
            loss.backward()
            grad = d.grad.numpy()
            def loss_at(dvals):
                reg64 = torch.ones(4, 25, 25, dtype=torch.float64)
                for k in range(4):
                    reg64[k, 12, 12] = dvals[k]
                return float(iou_loss(reg64, gt, [CENTER_CELL], SPEC))

            for k in range(4):
                dp, dm = d0.copy(), d0.copy()
                dp[k] += step
                dm[k] -= step
                lp = loss_at(dp)
                lm = loss_at(dm)
                fd = (lp - lm) / (2 * step)
                denom = max(abs(fd), 1e-6)
                assert abs(grad[k] - fd) / denom < 1e-3


class TestTotalLoss:
    def _setup(self):
        torch.manual_seed(3)
        gt = Box(95, 111, 159, 143)
        labels = assign_ellipse(gt, SPEC)
        sel = sample_training_points(labels, rng=np.random.default_rng(0))
        cls = torch.randn(2, 25, 25)
        reg = torch.rand(4, 25, 25) * 30 + 5
        return cls, reg, labels, sel, gt

    def test_zero_reg_weight(self):
        cls, reg, labels, sel, gt = self._setup()
        t, rep = total_loss(cls, reg, labels, sel, gt, SPEC,
                            LossConfig(1.0, 0.0))
        assert abs(rep.total - rep.cls_loss) < 1e-6

    def test_additivity_and_linearity(self):
        cls, reg, labels, sel, gt = self._setup()
        _, r1 = total_loss(cls, reg, labels, sel, gt, SPEC, LossConfig(1, 1))
        _, r2 = total_loss(cls, reg, labels, sel, gt, SPEC, LossConfig(1, 2))
        assert abs(r1.total - (r1.cls_loss + r1.reg_loss)) < 1e-6
        assert abs((r2.total - r2.cls_loss) - 2 * (r1.total - r1.cls_loss)) < 1e-5

    def test_report_json(self):
        cls, reg, labels, sel, gt = self._setup()
        _, rep = total_loss(cls, reg, labels, sel, gt, SPEC)
        d = rep.to_json_dict()
        assert set(d) == {"cls_loss", "reg_loss", "total", "num_pos", "num_neg"}
        assert d["num_pos"] == len(sel.pos)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            LossConfig(-1.0, 1.0)
