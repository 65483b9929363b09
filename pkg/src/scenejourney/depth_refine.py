"""Depth post-processing: frontal-plane snapping per segment, sky dome
assignment with boundary stripping, and binary mask morphology."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import DepthMap, GeometryError
from . import io as sio


@dataclass(frozen=True)
class SegmentSet:
    """Pixel grouping masks, sorted by descending area."""

    segments: list[np.ndarray]

    def __post_init__(self):
        segs = [np.asarray(s, dtype=bool) for s in self.segments]
        areas = [int(s.sum()) for s in segs]
        if any(a == 0 for a in areas):
            raise ValueError("empty segment mask")
        if any(areas[i] < areas[i + 1] for i in range(len(areas) - 1)):
            # enforce the descending-area ordering invariant
            order = np.argsort([-a for a in areas], kind="stable")
            segs = [segs[i] for i in order]
        object.__setattr__(self, "segments", segs)

    def __len__(self) -> int:
        return len(self.segments)

    def to_json(self) -> list[dict]:
        return [
            {"rle": sio.mask_to_rle(s), "area": int(s.sum())} for s in self.segments
        ]

    @staticmethod
    def from_json(items: list[dict]) -> "SegmentSet":
        return SegmentSet([sio.rle_to_mask(it["rle"]) for it in items])


@dataclass(frozen=True)
class SkyMask:
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    def to_json(self) -> dict:
        return {"rle": sio.mask_to_rle(self.mask), "area": int(self.mask.sum())}

    @staticmethod
    def from_json(d: dict) -> "SkyMask":
        return SkyMask(sio.rle_to_mask(d["rle"]))


@dataclass(frozen=True)
class RefineConfig:
    disparity_threshold: float = 2.0
    percentile_low: float = 0.30
    percentile_high: float = 0.70
    sky_disparity: float = 0.025
    depth_shift: float = 0.0001
    sky_erosion_radius: int = 8
    boundary_strip_radius: int = 3
    upper_dilation_radius: int = 8
    upper_fraction: float = 0.4
    min_segment_pixels: int = 8

    def __post_init__(self):
        if not (0 <= self.percentile_low < self.percentile_high <= 1):
            raise ValueError("percentiles must satisfy 0 <= low < high <= 1")
        if min(self.sky_erosion_radius, self.boundary_strip_radius,
               self.upper_dilation_radius) < 0:
            raise ValueError("morphology radii must be non-negative")


def _disc(radius: int) -> np.ndarray:
    r = int(radius)
    y, x = np.ogrid[-r:r + 1, -r:r + 1]
    return x * x + y * y <= r * r


def morphology(mask: np.ndarray, op: str, radius: int) -> np.ndarray:
    """Binary erosion/dilation with a disc structuring element."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    mask = np.asarray(mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    st = _disc(radius)
    # erosion treats outside-the-image as foreground so masks touching the
    # frame edge are not eaten from the border (and closing stays extensive)
    if op == "erode":
        return ndimage.binary_erosion(mask, structure=st, border_value=1)
    if op == "dilate":
        return ndimage.binary_dilation(mask, structure=st, border_value=0)
    raise ValueError(f"unknown morphology op {op!r}")


def _nearest_rank(sorted_vals: np.ndarray, q: float) -> float:
    n = len(sorted_vals)
    idx = max(int(np.ceil(q * n)) - 1, 0)
    return float(sorted_vals[idx])


def refine_with_segments(
    depth: DepthMap, segs: SegmentSet, cfg: RefineConfig
) -> DepthMap:
    """Snap low-disparity-range segments to frontal planes at their median depth.

    Segments are visited in descending-area order, so smaller segments may
    overwrite larger ones. The disparity range is robustified with the
    configured low/high percentiles (nearest rank) of 1/depth.
    """
    values = depth.values.copy()
    for seg in segs.segments:
        if seg.shape != depth.shape:
            raise GeometryError("segment mask larger than image")
        sel = seg & depth.valid
        n = int(sel.sum())
        if n < cfg.min_segment_pixels:
            continue
        disp = np.sort(1.0 / values[sel])
        delta = _nearest_rank(disp, cfg.percentile_high) - _nearest_rank(
            disp, cfg.percentile_low
        )
        if delta < cfg.disparity_threshold:
            values[sel] = np.median(values[sel])
    return DepthMap(values=values, valid=depth.valid.copy())


def apply_sky(depth: DepthMap, sky: SkyMask, cfg: RefineConfig) -> DepthMap:
    """Assign a far dome depth to (aggressively eroded) sky pixels and
    invalidate pixels along the eroded sky boundary."""
    if sky.mask.shape != depth.shape:
        raise GeometryError("sky mask shape mismatch")
    eroded = morphology(sky.mask, "erode", cfg.sky_erosion_radius)
    values = depth.values.copy()
    valid = depth.valid.copy()
    dome = 1.0 / cfg.sky_disparity + cfg.depth_shift
    values[eroded] = dome
    valid[eroded] = True
    if eroded.any() and not eroded.all():
        r = cfg.boundary_strip_radius
        if r > 0:
            near_sky = morphology(eroded, "dilate", r)
            near_bg = morphology(~eroded, "dilate", r)
            valid[near_sky & near_bg] = False
    return DepthMap(values=values, valid=valid)
