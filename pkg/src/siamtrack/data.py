"""Sequence ingestion, patch cropping, and training-pair sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .geometry import Box

TEMPLATE_SIZE = 127
SEARCH_SIZE = 255
CONTEXT_AMOUNT = 0.5

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class SequenceRecord:
    """Ordered frames with one ground-truth box per frame."""

    name: str
    boxes: list
    frame_paths: list | None = None
    frame_arrays: list | None = None
    attributes: dict = field(default_factory=dict)

    def __post_init__(self):
        n_frames = len(self.frame_paths if self.frame_paths is not None
                       else self.frame_arrays)
        if n_frames != len(self.boxes):
            raise ValueError(
                f"sequence {self.name!r}: {n_frames} frames but "
                f"{len(self.boxes)} ground-truth boxes")

    def __len__(self):
        return len(self.boxes)

    def frame(self, idx):
        if self.frame_arrays is not None:
            return self.frame_arrays[idx]
        img = cv2.imread(str(self.frame_paths[idx]))
        if img is None:
            raise IOError(f"cannot read frame {self.frame_paths[idx]}")
        return img


def load_sequence(path) -> SequenceRecord:
    """Load `frames/NNNN.ext` + `groundtruth.txt` (x,y,w,h per line)."""
    path = Path(path)
    gt_file = path / "groundtruth.txt"
    if not gt_file.exists():
        raise FileNotFoundError(f"missing {gt_file}")
    boxes = []
    for k, line in enumerate(gt_file.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            boxes.append(Box.parse_line(line))
        except ValueError as e:
            raise ValueError(f"{gt_file}:{k + 1}: {e}") from e
    frames = sorted(p for p in (path / "frames").glob("*")
                    if p.suffix.lower() in IMAGE_EXTS)
    if len(frames) != len(boxes):
        raise ValueError(
            f"{path}: {len(frames)} frames but {len(boxes)} ground-truth lines")
    return SequenceRecord(name=path.name, boxes=boxes, frame_paths=frames)


def save_sequence(record: SequenceRecord, path):
    """Write a record to the on-disk layout load_sequence reads."""
    path = Path(path)
    (path / "frames").mkdir(parents=True, exist_ok=True)
    for k in range(len(record)):
        cv2.imwrite(str(path / "frames" / f"{k:04d}.png"), record.frame(k))
    lines = [b.format_line() for b in record.boxes]
    (path / "groundtruth.txt").write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class CropSpec:
    context_amount: float = CONTEXT_AMOUNT
    template_size: int = TEMPLATE_SIZE
    search_size: int = SEARCH_SIZE
    max_frame_gap: int = 100
    max_shift: float = 64.0
    max_scale_jitter: float = 0.05


def crop_size(box: Box, context_amount: float = CONTEXT_AMOUNT) -> float:
    """Side of the square template region: sqrt((w + c)(h + c)),
    c = context_amount * (w + h)."""
    c = context_amount * (box.width + box.height)
    return math.sqrt((box.width + c) * (box.height + c))


def get_subwindow(frame, center, out_size, crop_side, pad_value=None):
    """Square crop of side crop_side centered at center, resized to out_size.

    Out-of-frame area is padded with the frame's mean color.
    """
    if pad_value is None:
        pad_value = frame.mean(axis=(0, 1))
    crop_side = int(round(crop_side))
    cx, cy = center
    x1 = int(round(cx - (crop_side - 1) / 2.0))
    y1 = int(round(cy - (crop_side - 1) / 2.0))
    x2 = x1 + crop_side - 1
    y2 = y1 + crop_side - 1
    h, w = frame.shape[:2]
    pad_l = max(0, -x1)
    pad_t = max(0, -y1)
    pad_r = max(0, x2 - w + 1)
    pad_b = max(0, y2 - h + 1)
    if pad_l or pad_t or pad_r or pad_b:
        padded = np.empty((h + pad_t + pad_b, w + pad_l + pad_r,
                           frame.shape[2]), dtype=frame.dtype)
        padded[...] = np.asarray(pad_value, dtype=frame.dtype)
        padded[pad_t:pad_t + h, pad_l:pad_l + w] = frame
        frame = padded
        x1 += pad_l
        x2 += pad_l
        y1 += pad_t
        y2 += pad_t
    patch = frame[y1:y2 + 1, x1:x2 + 1]
    if patch.shape[0] != out_size:
        patch = cv2.resize(patch, (out_size, out_size),
                           interpolation=cv2.INTER_LINEAR)
    return patch


def crop_patch(frame, box: Box, spec: CropSpec, role: str):
    """Context crop around the box, 127x127 for template or 255x255 for search."""
    s_z = crop_size(box, spec.context_amount)
    if role == "template":
        return get_subwindow(frame, box.center, spec.template_size, s_z)
    if role == "search":
        s_x = s_z * spec.search_size / spec.template_size
        return get_subwindow(frame, box.center, spec.search_size, s_x)
    raise ValueError(f"unknown crop role {role!r}")


@dataclass
class PairSample:
    template: np.ndarray
    search: np.ndarray
    gt: Box
    sequence: str = ""
    frame_indices: tuple = (0, 0)


def _search_crop_with_jitter(frame, box: Box, spec: CropSpec,
                             rng: np.random.Generator):
    """Crop a jittered search patch; returns (patch, gt box in patch coords)."""
    s_z = crop_size(box, spec.context_amount)
    jitter = 1.0 + rng.uniform(-spec.max_scale_jitter, spec.max_scale_jitter)
    s_x = s_z * spec.search_size / spec.template_size * jitter
    scale = spec.search_size / s_x
    # shift sampled in patch pixels, kept small enough that the box stays inside
    half = spec.search_size / 2.0
    margin_x = max(0.0, half - box.width * scale / 2.0 - 1.0)
    margin_y = max(0.0, half - box.height * scale / 2.0 - 1.0)
    max_sx = min(spec.max_shift, margin_x)
    max_sy = min(spec.max_shift, margin_y)
    shift_x = rng.uniform(-max_sx, max_sx)
    shift_y = rng.uniform(-max_sy, max_sy)
    bcx, bcy = box.center
    crop_center = (bcx - shift_x / scale, bcy - shift_y / scale)
    patch = get_subwindow(frame, crop_center, spec.search_size, s_x)
    c = spec.search_size / 2.0
    gt = Box.from_cxywh(c + shift_x, c + shift_y,
                        box.width * scale, box.height * scale)
    return patch, gt


def sample_pair(dataset, rng: np.random.Generator,
                spec: CropSpec = CropSpec(), max_retries: int = 16):
    """Sample a training pair: template from one frame, jittered search from
    another frame of the same sequence (same frame for stills)."""
    if not dataset:
        raise ValueError("empty dataset")
    for _ in range(max_retries):
        seq = dataset[rng.integers(len(dataset))]
        if len(seq) == 1:
            i = j = 0
        else:
            i = int(rng.integers(len(seq)))
            lo = max(0, i - spec.max_frame_gap)
            hi = min(len(seq) - 1, i + spec.max_frame_gap)
            j = int(rng.integers(lo, hi + 1))
        try:
            template = crop_patch(seq.frame(i), seq.boxes[i], spec, "template")
            search, gt = _search_crop_with_jitter(
                seq.frame(j), seq.boxes[j], spec, rng)
        except (ValueError, IOError):
            continue
        return PairSample(template=template, search=search, gt=gt,
                          sequence=seq.name, frame_indices=(i, j))
    raise RuntimeError("could not sample a valid pair after bounded retries")
