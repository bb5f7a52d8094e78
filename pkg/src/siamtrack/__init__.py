"""Anchor-free Siamese single-object tracker with elliptical label assignment."""

from .geometry import Box, GridSpec, decode_box, encode_targets, iou
from .model import BackboneConfig, SiamTrackNet, canonical_grid
from .track import PostprocessConfig, Tracker

__all__ = [
    "Box", "GridSpec", "decode_box", "encode_targets", "iou",
    "BackboneConfig", "SiamTrackNet", "canonical_grid",
    "PostprocessConfig", "Tracker",
]

__version__ = "0.1.0"
