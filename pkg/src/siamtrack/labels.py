"""Per-grid-location classification labels and training-point sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box, GridSpec, grid_points

POSITIVE = 1
NEGATIVE = 0
IGNORE = -1

VARIANTS = ("ellipse", "circle", "rectangle")


@dataclass(frozen=True)
class AssignmentConfig:
    variant: str = "ellipse"
    boundary_inclusive: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown label variant {self.variant!r}")


def _partition(inner: np.ndarray, outer: np.ndarray, inclusive: bool):
    """Build a label map from inner/outer region quotients (1.0 = boundary).

    Positive inside the inner region, negative outside the outer region,
    ignore in between. Boundary points go to IGNORE unless inclusive.
    """
    labels = np.full(inner.shape, IGNORE, dtype=np.int8)
    if inclusive:
        labels[inner <= 1.0] = POSITIVE
    else:
        labels[inner < 1.0] = POSITIVE
    labels[outer > 1.0] = NEGATIVE
    return labels


def assign_ellipse(gt: Box, spec: GridSpec, cfg: AssignmentConfig | None = None):
    """Ellipse labels: positive inside the half-axis ellipse, negative outside
    the full-axis ellipse, ignore between."""
    cfg = cfg or AssignmentConfig("ellipse")
    px, py = grid_points(spec)
    cx, cy = gt.center
    dx2 = (px - cx) ** 2
    dy2 = (py - cy) ** 2
    q1 = dx2 / (gt.width / 2.0) ** 2 + dy2 / (gt.height / 2.0) ** 2
    q2 = dx2 / (gt.width / 4.0) ** 2 + dy2 / (gt.height / 4.0) ** 2
    return _partition(q2, q1, cfg.boundary_inclusive)


def assign_circle(gt: Box, spec: GridSpec, cfg: AssignmentConfig | None = None):
    """Circle labels with radii sqrt(w*h)/2 and sqrt(w*h)/4 about the center."""
    cfg = cfg or AssignmentConfig("circle")
    px, py = grid_points(spec)
    cx, cy = gt.center
    r2 = (px - cx) ** 2 + (py - cy) ** 2
    r_outer = np.sqrt(gt.width * gt.height) / 2.0
    r_inner = np.sqrt(gt.width * gt.height) / 4.0
    return _partition(r2 / r_inner**2, r2 / r_outer**2, cfg.boundary_inclusive)


def assign_rectangle(gt: Box, spec: GridSpec, cfg: AssignmentConfig | None = None):
    """Rectangle labels: positive inside the centered half-size rectangle,
    negative outside the ground-truth box itself."""
    cfg = cfg or AssignmentConfig("rectangle")
    px, py = grid_points(spec)
    cx, cy = gt.center
    # max of normalized per-axis offsets: < 1 inside, > 1 outside
    qx = np.abs(px - cx)
    qy = np.abs(py - cy)
    inner = np.maximum(qx / (gt.width / 4.0), qy / (gt.height / 4.0))
    outer = np.maximum(qx / (gt.width / 2.0), qy / (gt.height / 2.0))
    return _partition(inner, outer, cfg.boundary_inclusive)


_ASSIGNERS = {
    "ellipse": assign_ellipse,
    "circle": assign_circle,
    "rectangle": assign_rectangle,
}


def assign(gt: Box, spec: GridSpec, cfg: AssignmentConfig):
    return _ASSIGNERS[cfg.variant](gt, spec, cfg)


@dataclass(frozen=True)
class SampleSelection:
    """Flat grid indices (j * w + i) of the sampled training points."""

    pos: np.ndarray
    neg: np.ndarray


def sample_training_points(labels: np.ndarray, max_pos: int = 16,
                           max_neg: int = 48,
                           rng: np.random.Generator | None = None):
    """Keep all positives/negatives up to the caps, uniformly subsampling
    without replacement above them. Ignore cells are never selected."""
    rng = rng if rng is not None else np.random.default_rng()
    flat = labels.reshape(-1)
    pos = np.flatnonzero(flat == POSITIVE)
    neg = np.flatnonzero(flat == NEGATIVE)
    if pos.size == 0:
        raise ValueError("no positive cells: degenerate training pair")
    if pos.size > max_pos:
        pos = np.sort(rng.choice(pos, size=max_pos, replace=False))
    if neg.size > max_neg:
        neg = np.sort(rng.choice(neg, size=max_neg, replace=False))
    return SampleSelection(pos=pos, neg=neg)


def format_label_map(labels: np.ndarray) -> str:
    """Render a label map as a character grid ('+', '-', '.') for debugging."""
    chars = {POSITIVE: "+", NEGATIVE: "-", IGNORE: "."}
    return "\n".join("".join(chars[int(v)] for v in row) for row in labels)
