"""Synthetic moving-target sequences with exact ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .data import SequenceRecord, save_sequence
from .geometry import Box


@dataclass(frozen=True)
class MotionSpec:
    canvas_w: int = 320
    canvas_h: int = 240
    target_w: float = 48.0
    target_h: float = 36.0
    max_step: float = 8.0        # per-axis displacement cap, px/frame
    size_drift: float = 0.02     # max relative size change per frame
    clutter: int = 12            # distractor shapes on the background

    def __post_init__(self):
        if self.max_step < 0 or self.size_drift < 0:
            raise ValueError("motion caps must be non-negative")


def _make_background(spec: MotionSpec, rng: np.random.Generator):
    base = rng.integers(40, 140, size=3)
    bg = np.empty((spec.canvas_h, spec.canvas_w, 3), dtype=np.uint8)
    bg[...] = base
    noise = rng.normal(0, 12, size=bg.shape)
    bg = np.clip(bg.astype(np.float64) + noise, 0, 255).astype(np.uint8)
    for _ in range(spec.clutter):
        color = tuple(int(v) for v in rng.integers(0, 200, size=3))
        x = int(rng.integers(0, spec.canvas_w))
        y = int(rng.integers(0, spec.canvas_h))
        r = int(rng.integers(4, 24))
        if rng.random() < 0.5:
            cv2.circle(bg, (x, y), r, color, -1)
        else:
            cv2.rectangle(bg, (x - r, y - r), (x + r, y + r), color, -1)
    return bg


def _make_texture(w, h, rng: np.random.Generator):
    """High-contrast checkerboard texture, distinctive against clutter."""
    c1 = rng.integers(160, 256, size=3).astype(np.uint8)
    c2 = rng.integers(0, 80, size=3).astype(np.uint8)
    cells = 4
    tex = np.empty((cells, cells, 3), dtype=np.uint8)
    for i in range(cells):
        for j in range(cells):
            tex[i, j] = c1 if (i + j) % 2 == 0 else c2
    tex = cv2.resize(tex, (max(w, 2), max(h, 2)),
                     interpolation=cv2.INTER_NEAREST)
    border = rng.integers(100, 200, size=3).astype(np.uint8)
    tex[0, :] = tex[-1, :] = border
    tex[:, 0] = tex[:, -1] = border
    return tex


def _render(bg, texture, box: Box):
    frame = bg.copy()
    x1 = int(round(box.x1))
    y1 = int(round(box.y1))
    x2 = int(round(box.x2))
    y2 = int(round(box.y2))
    x1c, y1c = max(0, x1), max(0, y1)
    x2c = min(frame.shape[1], x2)
    y2c = min(frame.shape[0], y2)
    if x2c > x1c and y2c > y1c:
        tex = cv2.resize(texture, (x2 - x1, y2 - y1),
                         interpolation=cv2.INTER_NEAREST)
        frame[y1c:y2c, x1c:x2c] = tex[y1c - y1:y2c - y1, x1c - x1:x2c - x1]
    return frame


def _reflect(value, velocity, lo, hi):
    nxt = value + velocity
    if nxt < lo:
        return 2 * lo - nxt, -velocity
    if nxt > hi:
        return 2 * hi - nxt, -velocity
    return nxt, velocity


def make_synthetic_sequence(length: int, spec: MotionSpec = MotionSpec(),
                            rng: np.random.Generator | None = None,
                            name: str = "synthetic") -> SequenceRecord:
    """Render a textured rectangle drifting over a cluttered background.

    Per-frame motion respects the per-axis displacement cap; the target
    reflects off the canvas borders instead of leaving it.
    """
    if length < 2:
        raise ValueError("synthetic sequences need length >= 2")
    rng = rng if rng is not None else np.random.default_rng()
    bg = _make_background(spec, rng)
    texture = _make_texture(int(spec.target_w), int(spec.target_h), rng)

    w, h = spec.target_w, spec.target_h
    margin = 4.0
    cx = float(rng.uniform(w / 2 + margin, spec.canvas_w - w / 2 - margin))
    cy = float(rng.uniform(h / 2 + margin, spec.canvas_h - h / 2 - margin))
    vx = float(rng.uniform(-spec.max_step, spec.max_step))
    vy = float(rng.uniform(-spec.max_step, spec.max_step))

    frames, boxes = [], []
    for _ in range(length):
        box = Box.from_cxywh(cx, cy, w, h)
        frames.append(_render(bg, texture, box))
        boxes.append(box)
        cx, vx = _reflect(cx, vx, w / 2 + margin, spec.canvas_w - w / 2 - margin)
        cy, vy = _reflect(cy, vy, h / 2 + margin, spec.canvas_h - h / 2 - margin)
        if spec.size_drift > 0:
            w *= 1.0 + rng.uniform(-spec.size_drift, spec.size_drift)
            h *= 1.0 + rng.uniform(-spec.size_drift, spec.size_drift)
            w = float(np.clip(w, 12, spec.canvas_w / 2))
            h = float(np.clip(h, 12, spec.canvas_h / 2))
    return SequenceRecord(name=name, boxes=boxes, frame_arrays=frames,
                          attributes={"max_step": spec.max_step,
                                      "size_drift": spec.size_drift})


def make_synthetic_dataset(num_sequences: int, length: int,
                           spec: MotionSpec = MotionSpec(),
                           rng: np.random.Generator | None = None):
    rng = rng if rng is not None else np.random.default_rng()
    return [make_synthetic_sequence(length, spec, rng, name=f"synth_{k:03d}")
            for k in range(num_sequences)]


def write_synthetic_dataset(root, num_sequences: int, length: int,
                            spec: MotionSpec = MotionSpec(), seed: int = 0):
    """Generate sequences and write them in the on-disk layout."""
    rng = np.random.default_rng(seed)
    records = make_synthetic_dataset(num_sequences, length, spec, rng)
    root = Path(root)
    for rec in records:
        save_sequence(rec, root / rec.name)
    return [root / rec.name for rec in records]
