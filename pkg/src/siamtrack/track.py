"""Inference: init from a first-frame box, then windowed/penalized per-frame
prediction with linear size smoothing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .data import CropSpec, crop_patch, crop_size, get_subwindow
from .geometry import Box, grid_points
from .model import SiamTrackNet, canonical_grid

MIN_SIZE = 4.0


@dataclass(frozen=True)
class PostprocessConfig:
    penalty_k: float = 0.14
    window_influence: float = 0.45
    size_lr: float = 0.30

    def __post_init__(self):
        if not 0.0 <= self.window_influence <= 1.0:
            raise ValueError("window_influence must be in [0, 1]")
        if not 0.0 < self.size_lr <= 1.0:
            raise ValueError("size_lr must be in (0, 1]")


def cosine_window(w: int, h: int):
    """Outer product of 1-D Hann windows, peak 1 at the center."""
    if w < 1 or h < 1:
        raise ValueError("window dims must be >= 1")
    return np.outer(np.hanning(h), np.hanning(w))


def _change(r):
    return np.maximum(r, 1.0 / r)


def _padded_size(w, h):
    pad = (w + h) * 0.5
    return np.sqrt((w + pad) * (h + pad))


class Tracker:
    """Single-target tracker; template features cached at init, state
    (center, size) updated every frame."""

    def __init__(self, model: SiamTrackNet,
                 post_cfg: PostprocessConfig = PostprocessConfig(),
                 crop_spec: CropSpec = CropSpec()):
        self.model = model
        self.model.eval()
        self.post_cfg = post_cfg
        self.crop_spec = crop_spec
        self.grid = canonical_grid()
        self.window = cosine_window(self.grid.w, self.grid.h).reshape(-1)
        px, py = grid_points(self.grid)
        self._px = px.reshape(-1)
        self._py = py.reshape(-1)
        self.template_feats = None
        self.center = None
        self.size = None
        self.last_score = 0.0
        self.last_best_cell = -1
        self.last_candidate_size = None
        self.last_lr = 0.0

    def _to_tensor(self, patch):
        arr = patch.astype(np.float32) / 255.0
        return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0).contiguous()

    def init(self, frame, box: Box):
        """Cache template features and set the initial state from the box."""
        template = crop_patch(frame, box, self.crop_spec, "template")
        with torch.no_grad():
            self.template_feats = self.model.extract_features(
                self._to_tensor(template), "template")
        self.center = np.array(box.center, dtype=np.float64)
        self.size = np.array([box.width, box.height], dtype=np.float64)
        self.last_score = 1.0
        return self

    def track_frame(self, frame) -> Box:
        if self.template_feats is None:
            raise RuntimeError("tracker not initialized")
        cfg = self.post_cfg
        prev = Box.from_cxywh(self.center[0], self.center[1],
                              self.size[0], self.size[1])
        s_z = crop_size(prev, self.crop_spec.context_amount)
        s_x = s_z * self.crop_spec.search_size / self.crop_spec.template_size
        scale = self.crop_spec.search_size / s_x
        patch = get_subwindow(frame, tuple(self.center),
                              self.crop_spec.search_size, s_x)
        with torch.no_grad():
            cls, reg = self.model.forward_cached(self.template_feats,
                                                 self._to_tensor(patch))
            score = torch.softmax(cls[0].reshape(2, -1), dim=0)[1].numpy()
            d = reg[0].reshape(4, -1).numpy()

        # candidate boxes in search-patch coordinates
        cand_cx = self._px + (d[2] - d[0]) / 2.0
        cand_cy = self._py + (d[3] - d[1]) / 2.0
        cand_w = d[0] + d[2]
        cand_h = d[1] + d[3]

        prev_w, prev_h = self.size * scale
        s_c = _change(_padded_size(cand_w, cand_h) / _padded_size(prev_w, prev_h))
        r_c = _change((prev_w / prev_h) / (cand_w / cand_h))
        penalty = np.exp(-cfg.penalty_k * (s_c * r_c - 1.0))
        pscore = penalty * score * (1.0 - cfg.window_influence) \
            + self.window * cfg.window_influence
        best = int(np.argmax(pscore))
        self.last_best_cell = best

        half = self.grid.im_w // 2
        cx = self.center[0] + (cand_cx[best] - half) / scale
        cy = self.center[1] + (cand_cy[best] - half) / scale
        lr = cfg.size_lr * penalty[best] * score[best]
        self.last_candidate_size = np.array([cand_w[best] / scale,
                                             cand_h[best] / scale])
        self.last_lr = float(lr)
        new_w = self.size[0] * (1.0 - lr) + (cand_w[best] / scale) * lr
        new_h = self.size[1] * (1.0 - lr) + (cand_h[best] / scale) * lr

        fh, fw = frame.shape[:2]
        cx = float(np.clip(cx, 0, fw))
        cy = float(np.clip(cy, 0, fh))
        new_w = float(np.clip(new_w, MIN_SIZE, fw))
        new_h = float(np.clip(new_h, MIN_SIZE, fh))

        self.center = np.array([cx, cy])
        self.size = np.array([new_w, new_h])
        self.last_score = float(score[best])
        return Box.from_cxywh(cx, cy, new_w, new_h)


def track_sequence(model: SiamTrackNet, record, init_box: Box | None = None,
                   post_cfg: PostprocessConfig = PostprocessConfig(),
                   crop_spec: CropSpec = CropSpec()):
    """One-pass tracking: init on frame 0, track the rest.

    Returns (boxes, scores) with boxes[0] = the init box.
    """
    init_box = init_box if init_box is not None else record.boxes[0]
    tracker = Tracker(model, post_cfg, crop_spec).init(record.frame(0), init_box)
    boxes = [init_box]
    scores = [1.0]
    for k in range(1, len(record)):
        boxes.append(tracker.track_frame(record.frame(k)))
        scores.append(tracker.last_score)
    return boxes, scores
